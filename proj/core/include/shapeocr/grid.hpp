#pragma once

#include <algorithm>
#include <vector>

#include "shapeocr/geometry.hpp"

namespace shapeocr {

// Dense scalar field over an image-space rectangle.
template <class T>
struct Grid {
  Rect rect;
  std::vector<T> values;

  Grid() = default;
  Grid(const Rect& r, T fill) : rect(r), values(std::size_t(std::max(0, r.width)) * std::max(0, r.height), fill) {}

  T at(Point p) const { return values[index(p)]; }
  T& at(Point p) { return values[index(p)]; }
  std::size_t index(Point p) const { return std::size_t(p.y - rect.y0) * rect.width + (p.x - rect.x0); }
  T* row(int y) { return values.data() + std::size_t(y - rect.y0) * rect.width; }
  const T* row(int y) const { return values.data() + std::size_t(y - rect.y0) * rect.width; }
};

// out(x) = max of src over the box [x + offset - radius, x + offset + radius]^2 clipped to
// src.rect, for every x in dst; `neg` where the clipped box is empty. Separable, so the cost
// is O(area * radius).
template <class T>
void shifted_box_max(const Grid<T>& src, Point offset, int radius, const Rect& dst, T neg,
                     Grid<T>& out, Grid<T>& scratch) {
  out.rect = dst;
  out.values.assign(std::size_t(std::max(0, dst.width)) * std::max(0, dst.height), neg);
  if (dst.empty() || src.rect.empty()) return;

  // Horizontal pass over src rows, dst columns.
  scratch.rect = {dst.x0, src.rect.y0, dst.width, src.rect.height};
  scratch.values.assign(std::size_t(dst.width) * src.rect.height, neg);
  for (int dx = -radius; dx <= radius; ++dx) {
    const int s = offset.x + dx;
    const int xa = std::max(dst.x0, src.rect.x0 - s);
    const int xb = std::min(dst.x1(), src.rect.x1() - s);
    if (xa >= xb) continue;
    for (int y = src.rect.y0; y < src.rect.y1(); ++y) {
      T* h = scratch.row(y) + (xa - dst.x0);
      const T* v = src.row(y) + (xa + s - src.rect.x0);
      const int n = xb - xa;
      for (int i = 0; i < n; ++i) h[i] = std::max(h[i], v[i]);
    }
  }
  // Vertical pass.
  for (int dy = -radius; dy <= radius; ++dy) {
    const int s = offset.y + dy;
    const int ya = std::max(dst.y0, src.rect.y0 - s);
    const int yb = std::min(dst.y1(), src.rect.y1() - s);
    for (int y = ya; y < yb; ++y) {
      T* o = out.row(y);
      const T* h = scratch.row(y + s);
      for (int i = 0; i < dst.width; ++i) o[i] = std::max(o[i], h[i]);
    }
  }
}

}  // namespace shapeocr
