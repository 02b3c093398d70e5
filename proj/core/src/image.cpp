#include "shapeocr/image.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include "shapeocr/error.hpp"

namespace shapeocr {

GrayImage::GrayImage(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    fail(ErrorKind::kInvalidInput, "image dimensions must be positive");
  }
  pixels_.assign(std::size_t(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    fail(ErrorKind::kInvalidInput, "image dimensions must be positive");
  }
  if (pixels_.size() != std::size_t(width) * height) {
    fail(ErrorKind::kInvalidInput, "pixel buffer does not match image dimensions");
  }
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(char(ch));
  }
  return token;
}

int parse_header_int(std::istream& in, const char* what) {
  const std::string token = next_token(in);
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    fail(ErrorKind::kFormat, std::string("bad PGM ") + what + ": '" + token + "'");
  }
}

}  // namespace

GrayImage read_pgm(std::istream& in) {
  if (next_token(in) != "P5") fail(ErrorKind::kFormat, "not a binary PGM (P5) stream");
  const int width = parse_header_int(in, "width");
  const int height = parse_header_int(in, "height");
  const int maxval = parse_header_int(in, "maxval");
  if (width < 1 || height < 1) fail(ErrorKind::kFormat, "PGM has non-positive dimensions");
  if (maxval < 1 || maxval > 255) fail(ErrorKind::kFormat, "only 8-bit PGM is supported");

  std::vector<std::uint8_t> pixels(std::size_t(width) * height);
  in.read(reinterpret_cast<char*>(pixels.data()), std::streamsize(pixels.size()));
  if (std::size_t(in.gcount()) != pixels.size()) fail(ErrorKind::kFormat, "truncated PGM pixel data");
  if (maxval != 255) {
    for (auto& p : pixels) {
      p = std::uint8_t(std::min(255, (int(p) * 255 + maxval / 2) / maxval));
    }
  }
  return GrayImage(width, height, std::move(pixels));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return read_pgm(in);
}

void write_pgm(std::ostream& out, const GrayImage& image) {
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels().data()),
            std::streamsize(image.pixels().size()));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_pgm(out, image);
}

Affine Affine::inverse() const {
  const double det = a * d - b * c;
  if (std::abs(det) < 1e-12) fail(ErrorKind::kInvalidInput, "singular affine map");
  Affine inv;
  inv.a = d / det;
  inv.b = -b / det;
  inv.c = -c / det;
  inv.d = a / det;
  inv.tx = -(inv.a * tx + inv.b * ty);
  inv.ty = -(inv.c * tx + inv.d * ty);
  return inv;
}

GrayImage warp_affine(const GrayImage& src, const Affine& inverse_map, int out_width,
                      int out_height, std::uint8_t fill) {
  GrayImage out(out_width, out_height, fill);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const PointF s = inverse_map.apply({double(x), double(y)});
      const double fx = std::floor(s.x);
      const double fy = std::floor(s.y);
      const int ix = int(fx);
      const int iy = int(fy);
      const double ax = s.x - fx;
      const double ay = s.y - fy;
      auto sample = [&](int px, int py) -> double {
        return src.contains(px, py) ? double(src.at(px, py)) : double(fill);
      };
      const double v = (1 - ax) * (1 - ay) * sample(ix, iy) + ax * (1 - ay) * sample(ix + 1, iy) +
                       (1 - ax) * ay * sample(ix, iy + 1) + ax * ay * sample(ix + 1, iy + 1);
      out.at(x, y) = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

GrayImage upsample(const GrayImage& src, int factor) {
  if (factor < 1) fail(ErrorKind::kInvalidInput, "upsampling factor must be >= 1");
  if (factor == 1) return src;
  // Pixel-center aligned: out pixel x samples src at (x + 0.5) / f - 0.5.
  Affine inv;
  inv.a = 1.0 / factor;
  inv.d = 1.0 / factor;
  inv.tx = 0.5 / factor - 0.5;
  inv.ty = 0.5 / factor - 0.5;
  GrayImage out(src.width() * factor, src.height() * factor);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const PointF s = inv.apply({double(x), double(y)});
      const double cx = std::clamp(s.x, 0.0, double(src.width() - 1));
      const double cy = std::clamp(s.y, 0.0, double(src.height() - 1));
      const int ix = std::min(int(cx), src.width() - 2 < 0 ? 0 : src.width() - 2);
      const int iy = std::min(int(cy), src.height() - 2 < 0 ? 0 : src.height() - 2);
      const int jx = std::min(ix + 1, src.width() - 1);
      const int jy = std::min(iy + 1, src.height() - 1);
      const double ax = cx - ix;
      const double ay = cy - iy;
      const double v = (1 - ax) * (1 - ay) * src.at(ix, iy) + ax * (1 - ay) * src.at(jx, iy) +
                       (1 - ax) * ay * src.at(ix, jy) + ax * ay * src.at(jx, jy);
      out.at(x, y) = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

GrayImage scale_rotate(const GrayImage& src, double scale, double degrees, std::uint8_t fill) {
  if (scale <= 0.0) fail(ErrorKind::kInvalidInput, "scale must be positive");
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad) * scale;
  const double sn = std::sin(rad) * scale;
  const double w = src.width();
  const double h = src.height();
  const int out_w = std::max(1, int(std::ceil(std::abs(cs) * w + std::abs(sn) * h)));
  const int out_h = std::max(1, int(std::ceil(std::abs(sn) * w + std::abs(cs) * h)));

  // forward: out = R*S*(p - c_src) + c_out
  Affine fwd;
  fwd.a = cs;
  fwd.b = -sn;
  fwd.c = sn;
  fwd.d = cs;
  const double csx = 0.5 * (w - 1);
  const double csy = 0.5 * (h - 1);
  const double cox = 0.5 * (out_w - 1);
  const double coy = 0.5 * (out_h - 1);
  fwd.tx = cox - (fwd.a * csx + fwd.b * csy);
  fwd.ty = coy - (fwd.c * csx + fwd.d * csy);
  return warp_affine(src, fwd.inverse(), out_w, out_h, fill);
}

GrayImage add_salt_pepper(const GrayImage& src, double fraction, std::uint64_t seed) {
  GrayImage out = src;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& p : out.pixels()) {
    if (u(rng) < fraction) p = u(rng) < 0.5 ? 0 : 255;
  }
  return out;
}

GrayImage add_gaussian_noise(const GrayImage& src, double sigma, std::uint64_t seed) {
  GrayImage out = src;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& p : out.pixels()) {
    p = std::uint8_t(std::clamp(std::lround(p + n(rng)), 0L, 255L));
  }
  return out;
}

GrayImage invert(const GrayImage& src) {
  GrayImage out = src;
  for (auto& p : out.pixels()) p = std::uint8_t(255 - p);
  return out;
}

}  // namespace shapeocr
