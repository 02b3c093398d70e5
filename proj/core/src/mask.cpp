#include "shapeocr/mask.hpp"

#include <algorithm>
#include <cmath>

#include "shapeocr/error.hpp"

namespace shapeocr {

std::size_t BinaryMask::count() const {
  return std::size_t(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Rect BinaryMask::bounds() const {
  int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!get(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    fail(ErrorKind::kInvalidInput, "mask_iou needs masks of equal size");
  }
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const bool pa = a.get(x, y), pb = b.get(x, y);
      inter += (pa && pb) ? 1 : 0;
      uni += (pa || pb) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

void stroke_segment(BinaryMask& mask, PointF a, PointF b, double width) {
  const double half = 0.5 * width;
  const int x0 = std::max(0, int(std::floor(std::min(a.x, b.x) - half)));
  const int x1 = std::min(mask.width() - 1, int(std::ceil(std::max(a.x, b.x) + half)));
  const int y0 = std::max(0, int(std::floor(std::min(a.y, b.y) - half)));
  const int y1 = std::min(mask.height() - 1, int(std::ceil(std::max(a.y, b.y) + half)));
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double t = len2 > 0.0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = a.x + t * dx - x, ey = a.y + t * dy - y;
      if (ex * ex + ey * ey <= half * half) mask.set(x, y);
    }
  }
}

BinaryMask rasterize_outline(const std::vector<Polyline>& polylines, int width, int height,
                             double stroke_width) {
  BinaryMask mask(width, height);
  // Even-odd parity over all closed rings together so holes stay open.
  std::vector<std::pair<PointF, PointF>> ring_edges;
  for (const Polyline& p : polylines) {
    if (!p.closed || p.points.size() < 3) continue;
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      ring_edges.emplace_back(p.points[i], p.points[(i + 1) % p.points.size()]);
    }
  }
  if (!ring_edges.empty()) {
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
      xs.clear();
      const double cy = y;
      for (const auto& [a, b] : ring_edges) {
        if ((a.y > cy) == (b.y > cy)) continue;
        xs.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
        const int xa = std::max(0, int(std::ceil(xs[i])));
        const int xb = std::min(width - 1, int(std::floor(xs[i + 1])));
        for (int x = xa; x <= xb; ++x) mask.set(x, y);
      }
    }
  }
  for (const Polyline& p : polylines) {
    const std::size_t n = p.points.size();
    if (n == 0) continue;
    const double w = p.closed ? 1.0 : stroke_width;
    if (n == 1) {
      stroke_segment(mask, p.points[0], p.points[0], w);
      continue;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) stroke_segment(mask, p.points[i], p.points[i + 1], w);
    if (p.closed) stroke_segment(mask, p.points[n - 1], p.points[0], w);
  }
  return mask;
}

std::vector<Rect> mask_to_runs(const BinaryMask& mask) {
  std::vector<Rect> runs;
  for (int y = 0; y < mask.height(); ++y) {
    int x = 0;
    while (x < mask.width()) {
      if (!mask.get(x, y)) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < mask.width() && mask.get(x, y)) ++x;
      runs.push_back({start, y, x - start, 1});
    }
  }
  return runs;
}

BinaryMask runs_to_mask(const std::vector<Rect>& runs, int width, int height) {
  BinaryMask mask(width, height);
  for (const Rect& r : runs) {
    const Rect clipped = intersect(r, {0, 0, width, height});
    for (int y = clipped.y0; y < clipped.y1(); ++y) {
      for (int x = clipped.x0; x < clipped.x1(); ++x) mask.set(x, y);
    }
  }
  return mask;
}

}  // namespace shapeocr
