#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "shapeocr/shape_model.hpp"

namespace shapeocr {

struct ModelBank {
  BuildParams params;
  std::vector<CharacterModel> models;

  // Index of the (label, font) model or -1.
  int find(char label, const std::string& font_id) const;
};

// Throws kInvalidModel on duplicate (label, font_id) pairs or invalid models.
void validate_bank(const ModelBank& bank);

// Versioned text format, header `GLYPHBANK v1`.
void write_bank(std::ostream& out, const ModelBank& bank);
void write_bank(const std::filesystem::path& path, const ModelBank& bank);
ModelBank read_bank(std::istream& in);
ModelBank read_bank(const std::filesystem::path& path);

}  // namespace shapeocr
