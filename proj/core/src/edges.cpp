#include "shapeocr/edges.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "shapeocr/error.hpp"

namespace shapeocr {

OrientedEdgeMap::OrientedEdgeMap(int width, int height)
    : width_(width),
      height_(height),
      orientation_(std::size_t(width) * height, -1),
      magnitude_(std::size_t(width) * height, 0.0f) {}

void OrientedEdgeMap::set(int x, int y, int orientation, float magnitude) {
  orientation_[index(x, y)] = std::int8_t(orientation);
  magnitude_[index(x, y)] = magnitude;
}

void OrientedEdgeMap::clear(int x, int y) {
  orientation_[index(x, y)] = -1;
  magnitude_[index(x, y)] = 0.0f;
}

std::size_t OrientedEdgeMap::active_count() const {
  return std::size_t(std::count_if(orientation_.begin(), orientation_.end(),
                                   [](std::int8_t o) { return o >= 0; }));
}

namespace {

struct FilterBank {
  std::vector<double> gauss;       // g(u), u in [-R, R], normalized
  std::vector<double> derivative;  // u / sigma^2 * g(u)
  std::array<double, kOrientations> nx{};
  std::array<double, kOrientations> ny{};
  int radius = 0;
};

FilterBank make_bank(const EdgeParams& params) {
  if (params.sigma <= 0.0 || params.kernel_radius < 1) {
    fail(ErrorKind::kInvalidInput, "edge filter needs sigma > 0 and radius >= 1");
  }
  FilterBank bank;
  bank.radius = params.kernel_radius;
  const int n = 2 * bank.radius + 1;
  bank.gauss.resize(n);
  bank.derivative.resize(n);
  double sum = 0.0;
  for (int u = -bank.radius; u <= bank.radius; ++u) {
    bank.gauss[u + bank.radius] = std::exp(-double(u * u) / (2.0 * params.sigma * params.sigma));
    sum += bank.gauss[u + bank.radius];
  }
  for (int u = -bank.radius; u <= bank.radius; ++u) {
    bank.gauss[u + bank.radius] /= sum;
    bank.derivative[u + bank.radius] =
        double(u) / (params.sigma * params.sigma) * bank.gauss[u + bank.radius];
  }
  // Opposite bins are exact negations so that inverting the image flips bins by 8 exactly.
  for (int k = 0; k < kOrientations / 2; ++k) {
    const double theta = k * std::numbers::pi / (kOrientations / 2);
    bank.nx[k] = std::sin(theta);
    bank.ny[k] = -std::cos(theta);
    bank.nx[k + kOrientations / 2] = -bank.nx[k];
    bank.ny[k + kOrientations / 2] = -bank.ny[k];
  }
  return bank;
}

// Undirected axis of the edge normal for thinning; polarity-independent.
Point normal_axis(int bin) {
  const double normal_deg = std::fmod(bin * 22.5 - 90.0 + 360.0, 180.0);
  const int axis = int(std::floor((normal_deg + 22.5) / 45.0)) % 4;
  static constexpr Point kAxes[4] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  return kAxes[axis];
}

}  // namespace

double max_filter_response(const EdgeParams& params) {
  const FilterBank bank = make_bank(params);
  const int n = 2 * bank.radius + 1;
  double best = 0.0;
  for (int k = 0; k < kOrientations; ++k) {
    double positive = 0.0;
    for (int v = 0; v < n; ++v) {
      for (int u = 0; u < n; ++u) {
        const double w = bank.nx[k] * bank.derivative[u] * bank.gauss[v] +
                         bank.ny[k] * bank.gauss[u] * bank.derivative[v];
        if (w > 0.0) positive += w;
      }
    }
    best = std::max(best, positive);
  }
  return 255.0 * best;
}

OrientedEdgeMap detect_edges(const GrayImage& image, const EdgeParams& params) {
  return detect_edges(image, params.threshold_fraction * max_filter_response(params), params);
}

OrientedEdgeMap detect_edges(const GrayImage& image, double threshold, const EdgeParams& params) {
  if (image.width() < 3 || image.height() < 3) {
    fail(ErrorKind::kInvalidInput, "edge detection needs an image of at least 3x3");
  }
  const FilterBank bank = make_bank(params);
  const int w = image.width();
  const int h = image.height();
  const int R = bank.radius;
  auto px = [&](int x, int y) {
    return int(image.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
  };

  // Antisymmetric first pass keeps responses exactly odd under intensity inversion.
  std::vector<double> hx(std::size_t(w) * h), hy(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0.0, sy = 0.0;
      for (int u = 1; u <= R; ++u) {
        sx += bank.derivative[R + u] * double(px(x + u, y) - px(x - u, y));
        sy += bank.derivative[R + u] * double(px(x, y + u) - px(x, y - u));
      }
      hx[std::size_t(y) * w + x] = sx;
      hy[std::size_t(y) * w + x] = sy;
    }
  }
  std::vector<double> gx(std::size_t(w) * h), gy(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0.0, sy = 0.0;
      for (int v = -R; v <= R; ++v) {
        sx += bank.gauss[R + v] * hx[std::size_t(std::clamp(y + v, 0, h - 1)) * w + x];
        sy += bank.gauss[R + v] * hy[std::size_t(y) * w + std::clamp(x + v, 0, w - 1)];
      }
      gx[std::size_t(y) * w + x] = sx;
      gy[std::size_t(y) * w + x] = sy;
    }
  }

  std::vector<double> mag(std::size_t(w) * h, 0.0);
  std::vector<std::int8_t> bin(std::size_t(w) * h, -1);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    double best = 0.0;
    int best_k = -1;
    for (int k = 0; k < kOrientations; ++k) {
      const double r = bank.nx[k] * gx[i] + bank.ny[k] * gy[i];
      if (r > best) {
        best = r;
        best_k = k;
      }
    }
    mag[i] = best;
    bin[i] = std::int8_t(best_k);
  }

  OrientedEdgeMap edges(w, h);
  auto mag_at = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[std::size_t(y) * w + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (bin[i] < 0 || mag[i] < threshold) continue;
      const Point d = normal_axis(bin[i]);
      if (mag[i] > mag_at(x - d.x, y - d.y) && mag[i] >= mag_at(x + d.x, y + d.y)) {
        edges.set(x, y, bin[i], float(mag[i]));
      }
    }
  }
  return edges;
}

LandmarkSet sparsify_landmarks(const OrientedEdgeMap& edges, int radius) {
  if (radius < 1) fail(ErrorKind::kInvalidInput, "suppression radius must be >= 1");
  struct Entry {
    float magnitude;
    int x, y;
  };
  std::vector<Entry> active;
  for (int y = 0; y < edges.height(); ++y) {
    for (int x = 0; x < edges.width(); ++x) {
      if (edges.active(x, y)) active.push_back({edges.magnitude(x, y), x, y});
    }
  }
  std::sort(active.begin(), active.end(), [](const Entry& a, const Entry& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  LandmarkSet out;
  out.suppression_radius = radius;
  std::vector<std::uint8_t> suppressed(std::size_t(edges.width()) * edges.height(), 0);
  const int r2 = radius * radius;
  for (const Entry& e : active) {
    if (suppressed[std::size_t(e.y) * edges.width() + e.x]) continue;
    out.landmarks.push_back({e.x, e.y, edges.orientation(e.x, e.y), e.magnitude});
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const int x = e.x + dx;
        const int y = e.y + dy;
        if (dx * dx + dy * dy >= r2 || x < 0 || y < 0 || x >= edges.width() ||
            y >= edges.height()) {
          continue;
        }
        suppressed[std::size_t(y) * edges.width() + x] = 1;
      }
    }
  }
  return out;
}

void write_edge_dump(std::ostream& out, const OrientedEdgeMap& edges) {
  out << "EDGES " << edges.width() << ' ' << edges.height() << ' ' << edges.active_count() << '\n';
  for (int y = 0; y < edges.height(); ++y) {
    for (int x = 0; x < edges.width(); ++x) {
      if (!edges.active(x, y)) continue;
      out << x << ' ' << y << ' ' << edges.orientation(x, y) << ' ' << edges.magnitude(x, y) << '\n';
    }
  }
}

void write_landmark_dump(std::ostream& out, const LandmarkSet& set, int width, int height) {
  out << "LANDMARKS " << width << ' ' << height << ' ' << set.landmarks.size() << ' '
      << set.suppression_radius << '\n';
  for (const Landmark& l : set.landmarks) {
    out << l.x << ' ' << l.y << ' ' << l.orientation << ' ' << l.magnitude << '\n';
  }
}

}  // namespace shapeocr
