#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapeocr/image.hpp"
#include "shapeocr/mask.hpp"

namespace shapeocr {

// Stroke-drawn synthetic typeface. Letters are polylines in font units with the baseline at
// 0, x-height 7, cap and ascender height 10 and descender -3; the 13-unit em maps to em_px.
struct FontStyle {
  std::string name = "sans";
  double stroke_units = 1.6;
  double x_scale = 1.0;
  double shear = 0.0;          // x offset per unit of height
  bool single_story_a = false;
  bool boxy = false;           // curves drawn as straight-sided polygons
  double spacing_units = 2.2;  // gap between neighboring letter boxes
};

const std::vector<FontStyle>& builtin_fonts();
const FontStyle& builtin_font(const std::string& name);

inline constexpr const char* kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
bool is_letter(char c);
int letter_index(char c);  // 0..51 for letters, -1 otherwise

struct RenderOptions {
  double em_px = 48.0;
  int pad = 8;
  std::uint8_t ink = 20;
  std::uint8_t paper = 235;
};

// Single glyph on a canvas of height em_px + 2 * pad.
GrayImage render_glyph(char letter, const FontStyle& style, const RenderOptions& options = {});

struct CharTruth {
  char label = '?';
  BinaryMask mask;  // ink coverage >= 0.5, image-sized
  Rect bbox;
};

struct RenderedWord {
  GrayImage image;
  std::vector<CharTruth> chars;
};

RenderedWord render_word(const std::string& text, const FontStyle& style,
                         const RenderOptions& options = {});

}  // namespace shapeocr
