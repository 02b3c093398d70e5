#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "shapeocr/edges.hpp"
#include "shapeocr/error.hpp"
#include "shapeocr/image.hpp"

using namespace shapeocr;

namespace {

GrayImage step_image(int w, int h, int split, std::uint8_t dark, std::uint8_t light) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = x < split ? dark : light;
  }
  return img;
}

// Half-plane with the light side along the normal at `degrees`, 4x4 supersampled.
GrayImage half_plane(int size, double degrees) {
  const double t = degrees * M_PI / 180.0;
  const double nx = std::cos(t), ny = std::sin(t), c = 0.5 * (size - 1);
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int light = 0;
      for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
          const double px = x - 0.375 + 0.25 * sx - c, py = y - 0.375 + 0.25 * sy - c;
          light += px * nx + py * ny >= 0.0 ? 1 : 0;
        }
      }
      img.at(x, y) = std::uint8_t(20 + (215 * light) / 16);
    }
  }
  return img;
}

// Oriented derivative-of-Gaussian response computed by direct 2D convolution.
double direct_response(const GrayImage& img, int x, int y, int bin, const EdgeParams& p) {
  const int R = p.kernel_radius;
  double norm = 0.0;
  for (int u = -R; u <= R; ++u) norm += std::exp(-u * u / (2.0 * p.sigma * p.sigma));
  auto g = [&](int u) { return std::exp(-u * u / (2.0 * p.sigma * p.sigma)) / norm; };
  auto dg = [&](int u) { return u / (p.sigma * p.sigma) * g(u); };
  const double theta = bin * M_PI / 8.0;
  const double nx = std::sin(theta), ny = -std::cos(theta);
  double r = 0.0;
  for (int v = -R; v <= R; ++v) {
    for (int u = -R; u <= R; ++u) {
      const int sx = std::clamp(x + u, 0, img.width() - 1), sy = std::clamp(y + v, 0, img.height() - 1);
      r += (nx * dg(u) * g(v) + ny * g(u) * dg(v)) * img.at(sx, sy);
    }
  }
  return r;
}

int mode_bin_near_center(const OrientedEdgeMap& e, int radius) {
  std::map<int, int> votes;
  const int c = e.width() / 2;
  for (int y = c - radius; y <= c + radius; ++y) {
    for (int x = c - radius; x <= c + radius; ++x) {
      if (e.active(x, y)) ++votes[e.orientation(x, y)];
    }
  }
  int best = -1, count = 0;
  for (auto [bin, n] : votes) {
    if (n > count) {
      best = bin;
      count = n;
    }
  }
  return best;
}

}  // namespace

TEST(Pgm, RoundTripsPixels) {
  std::mt19937 rng(3);
  GrayImage img(7, 5);
  for (auto& p : img.pixels()) p = std::uint8_t(rng());
  std::stringstream s;
  write_pgm(s, img);
  EXPECT_EQ(read_pgm(s), img);
}

TEST(Pgm, ScalesSmallMaxval) {
  std::stringstream s;
  s << "P5\n# comment\n2 1\n15\n";
  s.put(char(0));
  s.put(char(15));
  const GrayImage img = read_pgm(s);
  EXPECT_EQ(img.at(0, 0), 0);
  EXPECT_EQ(img.at(1, 0), 255);
}

TEST(Pgm, RejectsBadStreams) {
  std::stringstream ascii("P2\n1 1\n255\n0\n");
  EXPECT_THROW(read_pgm(ascii), Error);
  std::stringstream truncated("P5\n4 4\n255\nab");
  try {
    read_pgm(truncated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
}

TEST(ImageOps, NoiseIsSeeded) {
  const GrayImage img(40, 30, 128);
  EXPECT_EQ(add_salt_pepper(img, 0.1, 5), add_salt_pepper(img, 0.1, 5));
  EXPECT_NE(add_salt_pepper(img, 0.1, 5), add_salt_pepper(img, 0.1, 6));
  EXPECT_EQ(add_gaussian_noise(img, 10.0, 1), add_gaussian_noise(img, 10.0, 1));
  int flipped = 0;
  for (auto p : add_salt_pepper(img, 0.1, 5).pixels()) flipped += p != 128;
  EXPECT_NEAR(flipped / 1200.0, 0.1, 0.03);
}

TEST(ImageOps, UpsampleAndInvert) {
  GrayImage img(2, 2);
  img.at(1, 0) = 200;
  const GrayImage up = upsample(img, 3);
  ASSERT_EQ(up.width(), 6);
  ASSERT_EQ(up.height(), 6);
  EXPECT_EQ(invert(invert(img)), img);
  EXPECT_EQ(invert(img).at(0, 0), 255);
}

TEST(Edges, ConstantImageHasNoEdges) {
  EXPECT_EQ(detect_edges(GrayImage(30, 20, 77)).active_count(), 0u);
}

TEST(Edges, VerticalStepMatchesDirectConvolution) {
  const EdgeParams p;
  const GrayImage img = step_image(32, 24, 16, 20, 235);
  const OrientedEdgeMap e = detect_edges(img, p);
  ASSERT_GT(e.active_count(), 0u);
  for (int y = 0; y < img.height(); ++y) {
    int in_row = 0;
    for (int x = 0; x < img.width(); ++x) {
      if (!e.active(x, y)) continue;
      ++in_row;
      EXPECT_EQ(e.orientation(x, y), 4) << x << "," << y;
      EXPECT_LE(std::abs(x - 15.5), 1.0);
      int best = 0;
      double best_r = -1e300;
      for (int k = 0; k < kOrientations; ++k) {
        const double r = direct_response(img, x, y, k, p);
        if (r > best_r) {
          best_r = r;
          best = k;
        }
      }
      EXPECT_EQ(best, e.orientation(x, y));
      EXPECT_NEAR(best_r, e.magnitude(x, y), 1e-3 * best_r);
    }
    EXPECT_EQ(in_row, 1) << "row " << y;
  }
}

TEST(Edges, InvertedStepFlipsPolarity) {
  const OrientedEdgeMap e = detect_edges(step_image(32, 24, 16, 235, 20));
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) {
      if (e.active(x, y)) EXPECT_EQ(e.orientation(x, y), 12);
    }
  }
}

TEST(Edges, RotationBy22_5ShiftsOneBin) {
  int shift = 0;
  for (int k = 0; k < 16; ++k) {
    const int a = mode_bin_near_center(detect_edges(half_plane(41, k * 22.5)), 6);
    const int b = mode_bin_near_center(detect_edges(half_plane(41, (k + 1) * 22.5)), 6);
    ASSERT_GE(a, 0);
    ASSERT_GE(b, 0);
    const int d = ((b - a) % 16 + 16) % 16;
    const int s = d == 1 ? 1 : d == 15 ? -1 : 0;
    ASSERT_NE(s, 0) << "angle step " << k << ": bins " << a << " -> " << b;
    if (shift == 0) shift = s;
    EXPECT_EQ(s, shift);
  }
}

TEST(Edges, BinDistanceIsCircular) {
  EXPECT_EQ(bin_distance(0, 15), 1);
  EXPECT_EQ(bin_distance(3, 11), 8);
  EXPECT_EQ(bin_distance(5, 5), 0);
}

TEST(Landmarks, SinglePixel) {
  OrientedEdgeMap e(10, 10);
  e.set(4, 6, 3, 2.0f);
  const LandmarkSet s = sparsify_landmarks(e, 3);
  ASSERT_EQ(s.landmarks.size(), 1u);
  EXPECT_EQ(s.landmarks[0].position(), (Point{4, 6}));
  EXPECT_EQ(s.landmarks[0].orientation, 3);
}

TEST(Landmarks, StrongerOfTwoNearbyWins) {
  OrientedEdgeMap e(20, 20);
  e.set(5, 5, 0, 1.0f);
  e.set(8, 5, 0, 3.0f);
  const LandmarkSet s = sparsify_landmarks(e, 5);
  ASSERT_EQ(s.landmarks.size(), 1u);
  EXPECT_EQ(s.landmarks[0].position(), (Point{8, 5}));
}

TEST(Landmarks, CircleMatchesGreedyOracle) {
  for (int radius : {2, 3, 5, 7}) {
    OrientedEdgeMap e(64, 64);
    std::vector<Point> pts;
    for (int i = 0; i < 720; ++i) {
      const double t = i * M_PI / 360.0;
      const Point p{int(std::lround(32 + 20 * std::cos(t))), int(std::lround(32 + 20 * std::sin(t)))};
      if (!e.active(p.x, p.y)) {
        e.set(p.x, p.y, 0, 1.0f);
        pts.push_back(p);
      }
    }
    // Oracle: row-major order for equal magnitudes, keep when no kept point is closer than radius.
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
    std::vector<Point> kept;
    for (Point p : pts) {
      bool near = false;
      for (Point k : kept) near = near || distance(p, k) < radius;
      if (!near) kept.push_back(p);
    }
    const LandmarkSet s = sparsify_landmarks(e, radius);
    EXPECT_LE(std::abs(int(s.landmarks.size()) - int(kept.size())), 1) << "radius " << radius;
    for (std::size_t i = 0; i < s.landmarks.size(); ++i) {
      for (std::size_t j = i + 1; j < s.landmarks.size(); ++j) {
        EXPECT_GE(distance(s.landmarks[i].position(), s.landmarks[j].position()), radius);
      }
    }
  }
}

TEST(Landmarks, RejectsNonPositiveRadius) {
  EXPECT_THROW(sparsify_landmarks(OrientedEdgeMap(4, 4), 0), Error);
}
