#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "shapeocr/image.hpp"

namespace shapeocr {

inline constexpr int kOrientations = 16;

// Circular distance between two orientation bins, in [0, 8].
inline int bin_distance(int a, int b) {
  const int d = ((a - b) % kOrientations + kOrientations) % kOrientations;
  return d > kOrientations / 2 ? kOrientations - d : d;
}

// Bin k is the edge tangent at k * 22.5 degrees (x right, y down) with polarity:
// a dark-to-light step along +x lands in bin 4, its inverse in bin 12.
struct EdgeParams {
  double sigma = 1.5;
  int kernel_radius = 4;  // 9x9 support
  double threshold_fraction = 0.10;
};

class OrientedEdgeMap {
 public:
  OrientedEdgeMap() = default;
  OrientedEdgeMap(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  bool active(int x, int y) const { return orientation_[index(x, y)] >= 0; }
  int orientation(int x, int y) const { return orientation_[index(x, y)]; }
  float magnitude(int x, int y) const { return magnitude_[index(x, y)]; }

  void set(int x, int y, int orientation, float magnitude);
  void clear(int x, int y);

  std::size_t active_count() const;

 private:
  std::size_t index(int x, int y) const { return std::size_t(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int8_t> orientation_;
  std::vector<float> magnitude_;
};

// Largest response any 8-bit image can produce on the strongest filter of the bank.
double max_filter_response(const EdgeParams& params = {});

// Winner-take-all over the 16 oriented derivative-of-Gaussian filters, thresholded, then
// thinned across the edge so each contour is about one pixel wide.
OrientedEdgeMap detect_edges(const GrayImage& image, double threshold,
                             const EdgeParams& params = {});
OrientedEdgeMap detect_edges(const GrayImage& image, const EdgeParams& params = {});

struct Landmark {
  int x = 0;
  int y = 0;
  int orientation = 0;
  float magnitude = 0.0f;

  Point position() const { return {x, y}; }
  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct LandmarkSet {
  std::vector<Landmark> landmarks;  // pick order
  int suppression_radius = 0;
};

// Greedy sparsification: strongest remaining edge first (ties row-major), suppressing every
// active pixel closer than `radius`.
LandmarkSet sparsify_landmarks(const OrientedEdgeMap& edges, int radius);

// Debug dumps: header line then `x y orientation magnitude` per line.
void write_edge_dump(std::ostream& out, const OrientedEdgeMap& edges);
void write_landmark_dump(std::ostream& out, const LandmarkSet& set, int width, int height);

}  // namespace shapeocr
