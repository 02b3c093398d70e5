#pragma once

#include <algorithm>
#include <cmath>
#include <compare>

namespace shapeocr {

struct Point {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const Point&, const Point&) = default;
  Point operator+(Point o) const { return {x + o.x, y + o.y}; }
  Point operator-(Point o) const { return {x - o.x, y - o.y}; }
};

struct PointF {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PointF&, const PointF&) = default;
};

inline double distance(Point a, Point b) {
  return std::hypot(double(a.x - b.x), double(a.y - b.y));
}

inline double distance(PointF a, PointF b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline int chebyshev(Point a, Point b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

// Axis-aligned box with inclusive real-valued extents (pixel centers).
struct BoxF {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0 + 1.0; }
  double height() const { return y1 - y0 + 1.0; }
  double center_x() const { return 0.5 * (x0 + x1); }
  double area() const { return width() * height(); }

  friend bool operator==(const BoxF&, const BoxF&) = default;
};

inline double box_iou(const BoxF& a, const BoxF& b) {
  const double ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0) + 1.0;
  const double iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0) + 1.0;
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

// Integer rectangle [x0, x0 + width) x [y0, y0 + height).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  bool empty() const { return width <= 0 || height <= 0; }
  bool contains(Point p) const {
    return p.x >= x0 && p.y >= y0 && p.x < x0 + width && p.y < y0 + height;
  }
  int x1() const { return x0 + width; }
  int y1() const { return y0 + height; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

inline Rect intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x0, b.x0);
  const int y0 = std::max(a.y0, b.y0);
  const int x1 = std::min(a.x1(), b.x1());
  const int y1 = std::min(a.y1(), b.y1());
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace shapeocr
