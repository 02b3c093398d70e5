#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "shapeocr/geometry.hpp"

namespace shapeocr {

// 8-bit grayscale raster, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::uint8_t at(int x, int y) const { return pixels_[std::size_t(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[std::size_t(y) * width_ + x]; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Binary portable graymap (P5), maxval <= 255.
GrayImage read_pgm(std::istream& in);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(std::ostream& out, const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// 2x3 affine map from output pixel coordinates to source coordinates.
struct Affine {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  PointF apply(PointF p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  Affine inverse() const;
};

// Bilinear resampling; out(x, y) = src(inverse_map(x, y)), outside pixels take `fill`.
GrayImage warp_affine(const GrayImage& src, const Affine& inverse_map, int out_width,
                      int out_height, std::uint8_t fill);

GrayImage upsample(const GrayImage& src, int factor);

// Scales and rotates about the image center onto a canvas large enough to hold the result.
GrayImage scale_rotate(const GrayImage& src, double scale, double degrees, std::uint8_t fill);

GrayImage add_salt_pepper(const GrayImage& src, double fraction, std::uint64_t seed);
GrayImage add_gaussian_noise(const GrayImage& src, double sigma, std::uint64_t seed);
GrayImage invert(const GrayImage& src);

}  // namespace shapeocr
