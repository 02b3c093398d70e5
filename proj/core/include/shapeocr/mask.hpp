#pragma once

#include <cstdint>
#include <vector>

#include "shapeocr/geometry.hpp"

namespace shapeocr {

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height) : width_(width), height_(height), bits_(std::size_t(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const { return bits_[std::size_t(y) * width_ + x] != 0; }
  void set(int x, int y, bool on = true) { bits_[std::size_t(y) * width_ + x] = on ? 1 : 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::size_t count() const;
  // Smallest rectangle holding every set pixel; empty rect for an empty mask.
  Rect bounds() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

double mask_iou(const BinaryMask& a, const BinaryMask& b);

struct Polyline {
  std::vector<PointF> points;
  bool closed = false;
};

// Closed polylines are filled with the even-odd rule at pixel centers and their outline
// is added; open polylines are stroked with the given width.
BinaryMask rasterize_outline(const std::vector<Polyline>& polylines, int width, int height,
                             double stroke_width);

void stroke_segment(BinaryMask& mask, PointF a, PointF b, double width);

// Row-run decomposition of a mask into axis-aligned rectangles, and back.
std::vector<Rect> mask_to_runs(const BinaryMask& mask);
BinaryMask runs_to_mask(const std::vector<Rect>& runs, int width, int height);

}  // namespace shapeocr
