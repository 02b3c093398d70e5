#include "shapeocr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "shapeocr/error.hpp"

namespace shapeocr {

namespace {

constexpr double kEmUnits = 13.0;
constexpr double kAscent = 10.0;

using Stroke = std::vector<PointF>;

struct Glyph {
  std::vector<Stroke> strokes;
  double advance = 0.0;  // ink width in units before x_scale
};

class Pen {
 public:
  explicit Pen(const FontStyle& style) : style_(style) {}

  void line(double x0, double y0, double x1, double y1) { glyph_.strokes.push_back({{x0, y0}, {x1, y1}}); }

  void poly(std::initializer_list<PointF> points) { glyph_.strokes.emplace_back(points); }

  // Elliptical arc from a0 to a1 degrees (counter-clockwise positive, y up).
  void arc(double cx, double cy, double rx, double ry, double a0, double a1) {
    const double span = std::abs(a1 - a0);
    const int steps = style_.boxy ? std::max(1, int(std::round(span / 90.0)))
                                  : std::max(2, int(std::ceil(span / 6.0)));
    Stroke s;
    for (int i = 0; i <= steps; ++i) {
      const double a = (a0 + (a1 - a0) * i / steps) * std::numbers::pi / 180.0;
      double ux = std::cos(a), uy = std::sin(a);
      if (style_.boxy) {
        // Push polygon vertices onto the bounding box corners.
        const double m = std::max(std::abs(ux), std::abs(uy));
        if (m > 0) {
          ux /= m;
          uy /= m;
        }
      }
      s.push_back({cx + rx * ux, cy + ry * uy});
    }
    glyph_.strokes.push_back(std::move(s));
  }

  void ellipse(double cx, double cy, double rx, double ry) {
    if (style_.boxy) {
      poly({{cx - rx, cy - ry}, {cx + rx, cy - ry}, {cx + rx, cy + ry}, {cx - rx, cy + ry},
            {cx - rx, cy - ry}});
    } else {
      arc(cx, cy, rx, ry, 0, 360);
    }
  }

  void dot(double x, double y) { line(x, y - 0.2, x, y + 0.2); }

  Glyph finish(double advance) {
    glyph_.advance = advance;
    return std::move(glyph_);
  }

 private:
  const FontStyle& style_;
  Glyph glyph_;
};

Glyph design(char c, const FontStyle& st) {
  Pen p(st);
  switch (c) {
    case 'A': p.poly({{0, 0}, {3.5, 10}, {7, 0}}); p.line(1.4, 4, 5.6, 4); return p.finish(7);
    case 'B':
      p.line(0, 0, 0, 10); p.line(0, 10, 3, 10); p.arc(3, 7.5, 2.5, 2.5, 90, -90);
      p.line(0, 5, 3.3, 5); p.line(0, 0, 3.3, 0); p.arc(3.3, 2.5, 2.8, 2.5, 90, -90);
      return p.finish(6.1);
    case 'C': p.arc(4, 5, 4, 5, 45, 315); return p.finish(7);
    case 'D':
      p.line(0, 0, 0, 10); p.line(0, 10, 2.5, 10); p.line(0, 0, 2.5, 0);
      p.arc(2.5, 5, 4, 5, 90, -90);
      return p.finish(6.5);
    case 'E':
      p.line(0, 0, 0, 10); p.line(0, 10, 5.5, 10); p.line(0, 5, 4.5, 5); p.line(0, 0, 5.5, 0);
      return p.finish(5.5);
    case 'F':
      p.line(0, 0, 0, 10); p.line(0, 10, 5.5, 10); p.line(0, 5, 4.5, 5);
      return p.finish(5.5);
    case 'G': p.arc(4, 5, 4, 5, 45, 360); p.line(4.5, 5, 8, 5); return p.finish(8);
    case 'H': p.line(0, 0, 0, 10); p.line(6, 0, 6, 10); p.line(0, 5, 6, 5); return p.finish(6);
    case 'I': p.line(0, 0, 0, 10); return p.finish(0);
    case 'J': p.line(5, 10, 5, 3); p.arc(2.5, 3, 2.5, 3, 0, -180); return p.finish(5);
    case 'K': p.line(0, 0, 0, 10); p.line(0, 3.5, 6, 10); p.line(2.2, 6, 6.5, 0); return p.finish(6.5);
    case 'L': p.line(0, 0, 0, 10); p.line(0, 0, 5, 0); return p.finish(5);
    case 'M': p.poly({{0, 0}, {0, 10}, {4, 2}, {8, 10}, {8, 0}}); return p.finish(8);
    case 'N': p.poly({{0, 0}, {0, 10}, {6.5, 0}, {6.5, 10}}); return p.finish(6.5);
    case 'O': p.ellipse(4, 5, 4, 5); return p.finish(8);
    case 'P':
      p.line(0, 0, 0, 10); p.line(0, 10, 3, 10); p.arc(3, 7.5, 2.5, 2.5, 90, -90);
      p.line(3, 5, 0, 5);
      return p.finish(5.5);
    case 'Q': p.ellipse(4, 5, 4, 5); p.line(4.8, 2.2, 8, -1); return p.finish(8);
    case 'R':
      p.line(0, 0, 0, 10); p.line(0, 10, 3, 10); p.arc(3, 7.5, 2.5, 2.5, 90, -90);
      p.line(3, 5, 0, 5); p.line(2.6, 5, 6, 0);
      return p.finish(6);
    case 'S': p.arc(3, 7.5, 3, 2.5, 20, 270); p.arc(3, 2.5, 3, 2.5, 90, -160); return p.finish(6);
    case 'T': p.line(0, 10, 7, 10); p.line(3.5, 10, 3.5, 0); return p.finish(7);
    case 'U': p.line(0, 10, 0, 3.5); p.arc(3, 3.5, 3, 3.5, 180, 360); p.line(6, 3.5, 6, 10); return p.finish(6);
    case 'V': p.poly({{0, 10}, {3.5, 0}, {7, 10}}); return p.finish(7);
    case 'W': p.poly({{0, 10}, {2.5, 0}, {5, 8}, {7.5, 0}, {10, 10}}); return p.finish(10);
    case 'X': p.line(0, 0, 6.5, 10); p.line(0, 10, 6.5, 0); return p.finish(6.5);
    case 'Y': p.poly({{0, 10}, {3.5, 5}, {7, 10}}); p.line(3.5, 5, 3.5, 0); return p.finish(7);
    case 'Z': p.poly({{0, 10}, {6.5, 10}, {0, 0}, {6.5, 0}}); return p.finish(6.5);

    case 'a':
      if (st.single_story_a) {
        p.ellipse(2.8, 3.5, 2.8, 3.5); p.line(5.6, 0, 5.6, 7);
        return p.finish(5.6);
      }
      p.arc(2.9, 5, 2.6, 2, 160, 0); p.line(5.5, 5, 5.5, 0); p.ellipse(2.8, 2, 2.7, 2);
      return p.finish(5.5);
    case 'b': p.line(0, 0, 0, 10); p.ellipse(3, 3.5, 3, 3.5); return p.finish(6);
    case 'c': p.arc(3.2, 3.5, 3.2, 3.5, 45, 315); return p.finish(5.5);
    case 'd': p.ellipse(3, 3.5, 3, 3.5); p.line(6, 0, 6, 10); return p.finish(6);
    case 'e': p.line(0.2, 3.5, 6.2, 3.5); p.arc(3.2, 3.5, 3, 3.5, 0, 315); return p.finish(6.2);
    case 'f':
      p.line(2, 0, 2, 8.3); p.arc(3.7, 8.3, 1.7, 1.7, 180, 20); p.line(0, 7, 4.5, 7);
      return p.finish(5.2);
    case 'g':
      p.ellipse(3, 3.5, 3, 3.5); p.line(6, 7, 6, -0.5); p.arc(3, -0.5, 3, 2.5, 360, 200);
      return p.finish(6);
    case 'h': p.line(0, 0, 0, 10); p.arc(3, 4, 3, 3, 180, 0); p.line(6, 4, 6, 0); return p.finish(6);
    case 'i': p.line(0, 0, 0, 7); p.dot(0, 9.4); return p.finish(0);
    case 'j': p.line(3, 7, 3, -1.5); p.arc(1, -1.5, 2, 1.5, 0, -150); p.dot(3, 9.4); return p.finish(3);
    case 'k': p.line(0, 0, 0, 10); p.line(0, 2.5, 5, 7); p.line(1.8, 4, 5.2, 0); return p.finish(5.2);
    case 'l': p.line(0, 0, 0, 10); return p.finish(0);
    case 'm':
      p.line(0, 0, 0, 7); p.arc(2.2, 4.5, 2.2, 2.5, 180, 0); p.line(4.4, 4.5, 4.4, 0);
      p.arc(6.6, 4.5, 2.2, 2.5, 180, 0); p.line(8.8, 4.5, 8.8, 0);
      return p.finish(8.8);
    case 'n': p.line(0, 0, 0, 7); p.arc(3, 4, 3, 3, 180, 0); p.line(6, 4, 6, 0); return p.finish(6);
    case 'o': p.ellipse(3.2, 3.5, 3.2, 3.5); return p.finish(6.4);
    case 'p': p.line(0, -3, 0, 7); p.ellipse(3, 3.5, 3, 3.5); return p.finish(6);
    case 'q': p.ellipse(3, 3.5, 3, 3.5); p.line(6, -3, 6, 7); return p.finish(6);
    case 'r': p.line(0, 0, 0, 7); p.arc(3, 4, 3, 3, 180, 60); return p.finish(4.5);
    case 's': p.arc(2.7, 5.25, 2.7, 1.75, 20, 270); p.arc(2.7, 1.75, 2.7, 1.75, 90, -160); return p.finish(5.4);
    case 't': p.line(1.5, 9.5, 1.5, 1.5); p.arc(3.3, 1.5, 1.8, 1.5, 180, 320); p.line(0, 7, 4, 7); return p.finish(4.8);
    case 'u': p.line(0, 7, 0, 3); p.arc(3, 3, 3, 3, 180, 360); p.line(6, 7, 6, 0); return p.finish(6);
    case 'v': p.poly({{0, 7}, {3, 0}, {6, 7}}); return p.finish(6);
    case 'w': p.poly({{0, 7}, {2, 0}, {4, 5.5}, {6, 0}, {8, 7}}); return p.finish(8);
    case 'x': p.line(0, 0, 5.5, 7); p.line(0, 7, 5.5, 0); return p.finish(5.5);
    case 'y': p.line(0, 7, 3.2, 0.5); p.line(6.2, 7, 1.5, -3); return p.finish(6.2);
    case 'z': p.poly({{0, 7}, {5.5, 7}, {0, 0}, {5.5, 0}}); return p.finish(5.5);
    default: break;
  }
  fail(ErrorKind::kInvalidInput, std::string("no glyph for character '") + c + "'");
}

struct Placed {
  std::vector<std::pair<PointF, PointF>> segments;  // pixel coordinates
  double half_width = 0.0;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
};

// Maps a glyph into pixel space with its left ink edge at `left_px` and baseline at `base_px`.
Placed place(const Glyph& g, const FontStyle& st, double unit, double left_px, double base_px) {
  Placed out;
  out.half_width = 0.5 * st.stroke_units * unit;
  // Shear is about the baseline; shift so the leftmost transformed point sits at left_px.
  double min_x = 1e300;
  for (const Stroke& s : g.strokes) {
    for (const PointF& p : s) min_x = std::min(min_x, st.x_scale * p.x + st.shear * p.y);
  }
  const double stroke_offset = out.half_width;
  auto map = [&](PointF p) {
    return PointF{left_px + stroke_offset + (st.x_scale * p.x + st.shear * p.y - min_x) * unit,
                  base_px - p.y * unit};
  };
  out.x_min = out.y_min = 1e300;
  out.x_max = out.y_max = -1e300;
  for (const Stroke& s : g.strokes) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const PointF a = map(s[i]), b = map(s[i + 1]);
      out.segments.emplace_back(a, b);
      for (const PointF& q : {a, b}) {
        out.x_min = std::min(out.x_min, q.x);
        out.x_max = std::max(out.x_max, q.x);
        out.y_min = std::min(out.y_min, q.y);
        out.y_max = std::max(out.y_max, q.y);
      }
    }
  }
  out.x_min -= out.half_width;
  out.x_max += out.half_width;
  out.y_min -= out.half_width;
  out.y_max += out.half_width;
  return out;
}

double segment_distance2(PointF p, PointF a, PointF b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return ex * ex + ey * ey;
}

// Supersampled ink coverage in [0,1] per pixel, accumulated with max into `coverage`.
void rasterize(const Placed& g, int width, int height, std::vector<double>& coverage) {
  constexpr int kSub = 4;
  const double r2 = g.half_width * g.half_width;
  const int x0 = std::max(0, int(std::floor(g.x_min)) - 1);
  const int x1 = std::min(width - 1, int(std::ceil(g.x_max)) + 1);
  const int y0 = std::max(0, int(std::floor(g.y_min)) - 1);
  const int y1 = std::min(height - 1, int(std::ceil(g.y_max)) + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const PointF p{x - 0.5 + (sx + 0.5) / kSub, y - 0.5 + (sy + 0.5) / kSub};
          for (const auto& [a, b] : g.segments) {
            if (segment_distance2(p, a, b) <= r2) {
              ++hits;
              break;
            }
          }
        }
      }
      double& c = coverage[std::size_t(y) * width + x];
      c = std::max(c, double(hits) / (kSub * kSub));
    }
  }
}

std::uint8_t shade(double coverage, const RenderOptions& o) {
  return std::uint8_t(std::lround(o.paper + (double(o.ink) - o.paper) * coverage));
}

}  // namespace

bool is_letter(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

int letter_index(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return 26 + (c - 'a');
  return -1;
}

const std::vector<FontStyle>& builtin_fonts() {
  static const std::vector<FontStyle> fonts = [] {
    FontStyle sans;
    sans.name = "sans";
    FontStyle slant;
    slant.name = "slant";
    slant.stroke_units = 1.9;
    slant.x_scale = 1.1;
    slant.shear = 0.18;
    slant.single_story_a = true;
    slant.spacing_units = 2.4;
    return std::vector<FontStyle>{sans, slant};
  }();
  return fonts;
}

const FontStyle& builtin_font(const std::string& name) {
  for (const FontStyle& f : builtin_fonts()) {
    if (f.name == name) return f;
  }
  fail(ErrorKind::kInvalidInput, "unknown built-in font '" + name + "'");
}

GrayImage render_glyph(char letter, const FontStyle& style, const RenderOptions& options) {
  return render_word(std::string(1, letter), style, options).image;
}

RenderedWord render_word(const std::string& text, const FontStyle& style,
                         const RenderOptions& options) {
  if (text.empty()) fail(ErrorKind::kInvalidInput, "cannot render an empty word");
  const double unit = options.em_px / kEmUnits;
  const double base = options.pad + kAscent * unit;
  std::vector<Placed> placed;
  double cursor = options.pad;
  for (char c : text) {
    if (!is_letter(c)) fail(ErrorKind::kInvalidInput, std::string("cannot render '") + c + "'");
    Placed g = place(design(c, style), style, unit, cursor, base);
    cursor = g.x_max + style.spacing_units * unit;
    placed.push_back(std::move(g));
  }
  const int width = int(std::ceil(placed.back().x_max)) + options.pad + 1;
  const int height = int(std::ceil(options.em_px)) + 2 * options.pad;

  RenderedWord out;
  std::vector<double> total(std::size_t(width) * height, 0.0);
  for (std::size_t i = 0; i < placed.size(); ++i) {
    std::vector<double> own(std::size_t(width) * height, 0.0);
    rasterize(placed[i], width, height, own);
    CharTruth truth;
    truth.label = text[i];
    truth.mask = BinaryMask(width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double c = own[std::size_t(y) * width + x];
        if (c >= 0.5) truth.mask.set(x, y);
        total[std::size_t(y) * width + x] = std::max(total[std::size_t(y) * width + x], c);
      }
    }
    truth.bbox = truth.mask.bounds();
    out.chars.push_back(std::move(truth));
  }
  out.image = GrayImage(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.image.at(x, y) = shade(total[std::size_t(y) * width + x], options);
  }
  return out;
}

}  // namespace shapeocr
