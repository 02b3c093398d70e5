#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shapeocr/detector.hpp"
#include "shapeocr/image.hpp"
#include "shapeocr/model_bank.hpp"

namespace shapeocr {

// represents[i][j]: font i's model explains font j's glyph. The diagonal is forced true.
using Representability = std::vector<std::vector<bool>>;

Representability representability(const std::vector<std::vector<double>>& scores, double threshold);

// Greedy cover: repeatedly keeps the font representing the most not-yet-represented fonts
// (lowest index on ties) until at least `coverage` of all fonts are represented.
std::vector<int> greedy_cover(const Representability& represents, double coverage);

double covered_fraction(const Representability& represents, const std::vector<int>& chosen);

// scores[i][j] = compatibility of models[i] on glyphs[j].
std::vector<std::vector<double>> compatibility_matrix(const std::vector<const CharacterModel*>& models,
                                                      const std::vector<const GrayImage*>& glyphs,
                                                      const DetectorParams& params = {});

struct LetterSelection {
  char label = '?';
  std::vector<std::string> fonts;  // in selection order
  double coverage = 0.0;
  std::size_t candidates = 0;      // fonts considered for this letter
};

struct FontSelection {
  std::vector<LetterSelection> letters;  // alphabetical by label
};

using GlyphSet = std::map<std::pair<char, std::string>, GrayImage>;  // (label, font) -> glyph

// Per letter: every font in the bank with that label competes; glyphs must cover them all.
FontSelection select_fonts(const ModelBank& bank, const GlyphSet& glyphs, double threshold = 0.8,
                           double coverage = 0.9, const DetectorParams& params = {});

// Keeps only the selected (label, font) models, in bank order.
ModelBank restrict_bank(const ModelBank& bank, const FontSelection& selection);

// `FONTSELECT v1` then `label coverage font...` per letter.
void write_selection(std::ostream& out, const FontSelection& selection);
FontSelection read_selection(std::istream& in);
void write_selection(const std::filesystem::path& path, const FontSelection& selection);
FontSelection read_selection(const std::filesystem::path& path);

}  // namespace shapeocr
