#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "shapeocr/detector.hpp"
#include "shapeocr/error.hpp"
#include "shapeocr/synth.hpp"

using namespace shapeocr;

namespace {

CharacterModel points_model(const std::vector<Point>& pts, const std::vector<std::pair<int, int>>& links) {
  CharacterModel m;
  m.label = 'x';
  m.font_id = "t";
  for (Point p : pts) m.pools.push_back({{p.x, p.y, 0, 1.0f}, 1});
  for (auto [a, b] : links) m.constraints.push_back({a, b, 1});
  return m;
}

std::set<std::pair<int, int>> edge_set(const SpanningTreeModel& t) {
  return {t.edges.begin(), t.edges.end()};
}

// Prim's algorithm over the constraint graph with Euclidean weights.
double prim_weight(const CharacterModel& m) {
  const int n = int(m.pools.size());
  std::vector<std::vector<double>> w(n, std::vector<double>(n, -1.0));
  for (const LateralConstraint& c : m.constraints) {
    w[c.a][c.b] = w[c.b][c.a] = distance(m.position(c.a), m.position(c.b));
  }
  std::vector<bool> in(n, false);
  std::vector<double> key(n, 1e300);
  key[0] = 0.0;
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    int u = -1;
    for (int i = 0; i < n; ++i) {
      if (!in[i] && (u < 0 || key[i] < key[u])) u = i;
    }
    in[u] = true;
    total += key[u];
    for (int v = 0; v < n; ++v) {
      if (!in[v] && w[u][v] >= 0.0) key[v] = std::min(key[v], w[u][v]);
    }
  }
  return total;
}

const CharacterModel& glyph_model(char letter) {
  static std::map<char, CharacterModel> cache;
  auto it = cache.find(letter);
  if (it == cache.end()) {
    it = cache.emplace(letter, build_model_from_glyph(letter, "sans", render_glyph(letter, builtin_font("sans")),
                                                      BuildParams{})).first;
  }
  return it->second;
}

ActivationHeatmap heatmap_from(int w, int h, const std::vector<float>& values) {
  ActivationHeatmap m;
  m.width = w;
  m.height = h;
  m.score = values;
  return m;
}

}  // namespace

TEST(SpanningTree, TriangleDropsLongestSide) {
  const CharacterModel m = points_model({{0, 0}, {3, 0}, {0, 4}}, {{0, 1}, {1, 2}, {0, 2}});
  const SpanningTreeModel t = to_spanning_tree(m);
  EXPECT_EQ(edge_set(t), (std::set<std::pair<int, int>>{{0, 1}, {0, 2}}));
}

TEST(SpanningTree, TreeIsKeptAndOrientedFromRoot) {
  const CharacterModel m = points_model({{0, 0}, {5, 0}, {5, 5}, {9, 9}}, {{0, 1}, {1, 2}, {2, 3}});
  const SpanningTreeModel t = to_spanning_tree(m);
  EXPECT_EQ(edge_set(t), (std::set<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}}));
  ASSERT_EQ(t.order.size(), 4u);
  EXPECT_EQ(t.order.front(), t.root);
  EXPECT_EQ(t.parent[std::size_t(t.root)], -1);
  std::vector<int> seen(4, 0);
  for (int p : t.order) {
    if (p != t.root) EXPECT_TRUE(seen[std::size_t(t.parent[std::size_t(p)])]) << "parent after child";
    seen[std::size_t(p)] = 1;
  }
}

TEST(SpanningTree, WeightMatchesPrim) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const CharacterModel m = oracle::toy_model(rng, 12);
    const SpanningTreeModel t = to_spanning_tree(m);
    ASSERT_EQ(int(t.edges.size()), int(m.pools.size()) - 1);
    double w = 0.0;
    for (auto [a, b] : t.edges) w += distance(m.position(a), m.position(b));
    EXPECT_NEAR(w, prim_weight(m), 1e-9);
  }
}

TEST(SpanningTree, DisconnectedModelThrows) {
  const CharacterModel m = points_model({{0, 0}, {3, 0}, {0, 4}}, {{0, 1}});
  EXPECT_THROW(to_spanning_tree(m), Error);
}

TEST(ForwardPass, TrainingGlyphScoresOneAtItsRoot) {
  const CharacterModel& m = glyph_model('R');
  const SpanningTreeModel t = to_spanning_tree(m);
  const ActivationHeatmap h = forward_pass(m, t, detect_edges(render_glyph('R', builtin_font("sans"))));
  const Point root = m.position(t.root);
  EXPECT_FLOAT_EQ(h.at(root.x, root.y), 1.0f);
  EXPECT_FLOAT_EQ(*std::max_element(h.score.begin(), h.score.end()), 1.0f);
}

TEST(ForwardPass, BlankImageScoresZero) {
  const CharacterModel& m = glyph_model('R');
  const ActivationHeatmap h = forward_pass(m, to_spanning_tree(m), OrientedEdgeMap(60, 70));
  for (float s : h.score) ASSERT_EQ(s, 0.0f);
}

TEST(ForwardPass, HeatmapMatchesExhaustiveTreeSearch) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    const CharacterModel m = oracle::toy_model(rng, 4);
    const SpanningTreeModel t = to_spanning_tree(m);
    const OrientedEdgeMap e = oracle::random_edges(rng, 12, 12, 0.3);
    const EvidenceMaps ev(e, 1);
    const TreeForward fwd(m, t, ev);
    for (int y = 0; y < 12; y += 3) {
      for (int x = 0; x < 12; x += 3) {
        std::vector<Rect> domains(m.pools.size(), ev.rect());
        domains[std::size_t(t.root)] = {x, y, 1, 1};
        EXPECT_EQ(fwd.root_count({x, y}), oracle::exhaustive_tree(m, t, ev, domains)) << trial;
      }
    }
  }
}

TEST(TreeScore, MatchesExhaustiveTreeAndBoundsLoopyMap) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const CharacterModel m = oracle::toy_model(rng, 6);
    const SpanningTreeModel t = to_spanning_tree(m);
    const EvidenceMaps ev(oracle::random_edges(rng, 12, 12, 0.35), 1);
    const Point anchor = m.position(t.root);
    const auto domains = anchored_domains(m, t.root, anchor, 1, ev.rect());
    const int tree = tree_score_in_domains(m, t, ev, domains);
    EXPECT_EQ(tree, oracle::exhaustive_tree(m, t, ev, domains));
    EXPECT_GE(tree, oracle::exhaustive_map(m, ev, domains));
  }
}

TEST(MapInDomains, ExactSearchMatchesExhaustive) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const CharacterModel m = oracle::toy_model(rng, 6);
    const EvidenceMaps ev(oracle::random_edges(rng, 12, 12, 0.35), 1);
    const auto domains = anchored_domains(m, 0, m.position(0), 1, ev.rect());
    const MapResult r = map_in_domains(m, ev, domains, MapOptions{});
    const int want = oracle::exhaustive_map(m, ev, domains);
    ASSERT_EQ(r.feasible, want >= 0);
    if (!r.feasible) continue;
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.matched, want);
    EXPECT_TRUE(satisfies_constraints(m, r.positions));
    int hits = 0;
    for (std::size_t p = 0; p < m.pools.size(); ++p) {
      EXPECT_TRUE(domains[p].contains(r.positions[p]));
      hits += ev.match(m.pools[p].landmark.orientation, r.positions[p]);
    }
    EXPECT_EQ(hits, r.matched);
  }
}

TEST(Nms, SinglePeak) {
  std::vector<float> v(100, 0.1f);
  v[3 * 10 + 7] = 0.9f;
  const auto kept = nonmax_suppress(heatmap_from(10, 10, v), 3, 0.5);
  EXPECT_EQ(kept, (std::vector<Point>{{7, 3}}));
}

TEST(Nms, EqualPeaksTwoRadiiApartBothSurvive) {
  std::vector<float> v(20 * 5, 0.0f);
  v[2 * 20 + 4] = 0.8f;
  v[2 * 20 + 12] = 0.8f;
  EXPECT_EQ(nonmax_suppress(heatmap_from(20, 5, v), 4, 0.5).size(), 2u);
  EXPECT_EQ(nonmax_suppress(heatmap_from(20, 5, v), 9, 0.5).size(), 1u);
  EXPECT_THROW(nonmax_suppress(heatmap_from(20, 5, v), 0, 0.5), Error);
}

TEST(Nms, MatchesGreedyOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<float> v(30 * 20);
    for (float& s : v) s = float(rng() % 8) / 8.0f;
    const int radius = 1 + int(rng() % 5);
    std::vector<std::pair<float, Point>> order;
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 30; ++x) {
        if (v[std::size_t(y) * 30 + x] >= 0.5f) order.push_back({v[std::size_t(y) * 30 + x], {x, y}});
      }
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<Point> want;
    for (const auto& [s, p] : order) {
      bool near = false;
      for (Point k : want) near = near || (k.x - p.x) * (k.x - p.x) + (k.y - p.y) * (k.y - p.y) < radius * radius;
      if (!near) want.push_back(p);
    }
    EXPECT_EQ(nonmax_suppress(heatmap_from(30, 20, v), radius, 0.5), want);
  }
}

TEST(Backtrace, CleanGlyphRecoversTheModel) {
  for (char letter : std::string("Rag")) {
    const CharacterModel& m = glyph_model(letter);
    const SpanningTreeModel t = to_spanning_tree(m);
    const EvidenceMaps ev(detect_edges(render_glyph(letter, builtin_font("sans"))), 1);
    const TreeForward fwd(m, t, ev);
    const BacktraceResult r = backtrace_raw(m, t, ev, &fwd, m.position(t.root), DetectorParams{});
    EXPECT_DOUBLE_EQ(r.score, 1.0) << letter;
    ASSERT_EQ(r.map.positions.size(), m.pools.size());
    for (std::size_t p = 0; p < m.pools.size(); ++p) {
      EXPECT_LE(std::abs(r.map.positions[p].x - m.position(int(p)).x), 1);
      EXPECT_LE(std::abs(r.map.positions[p].y - m.position(int(p)).y), 1);
    }
  }
}

TEST(Backtrace, NeverBeatsTheTreeRelaxation) {
  std::mt19937_64 rng(17);
  const CharacterModel& m = glyph_model('k');
  const SpanningTreeModel t = to_spanning_tree(m);
  const DetectorParams params;
  for (int trial = 0; trial < 5; ++trial) {
    const EvidenceMaps ev(oracle::random_edges(rng, 80, 80, 0.25), 1);
    const TreeForward fwd(m, t, ev);
    const ActivationHeatmap h = fwd.heatmap();
    for (Point a : nonmax_suppress(h, 12, 0.0, 3)) {
      const BacktraceResult r = backtrace_raw(m, t, ev, &fwd, a, params);
      if (!r.map.feasible) continue;
      EXPECT_TRUE(satisfies_constraints(m, r.map.positions));
      float best = 0.0f;
      for (int y = a.y - params.root_slack; y <= a.y + params.root_slack; ++y) {
        for (int x = a.x - params.root_slack; x <= a.x + params.root_slack; ++x) {
          if (x >= 0 && y >= 0 && x < h.width && y < h.height) best = std::max(best, h.at(x, y));
        }
      }
      EXPECT_LE(r.score, best + 1e-6);
    }
  }
}

TEST(Detection, WordAtModelScaleFindsEveryLetter) {
  ModelBank bank;
  for (char c : std::string("ABE")) bank.models.push_back(glyph_model(c));
  const RenderedWord w = render_word("BEA", builtin_font("sans"));
  DetectorParams params;
  params.scales = {1};
  const auto found = detect_multiscale(bank, w.image, params);
  for (const CharTruth& t : w.chars) {
    double best = 0.0;
    for (const CandidateDetection& d : found) {
      if (d.label == t.label) best = std::max(best, mask_iou(detection_mask(d, w.image.width(), w.image.height()), t.mask));
    }
    EXPECT_GE(best, 0.8) << t.label;
  }
}

TEST(Detection, HalfSizeGlyphNeedsUpsampling) {
  ModelBank bank;
  bank.models.push_back(glyph_model('B'));
  RenderOptions small;
  small.em_px = 24.0;
  const GrayImage img = render_glyph('B', builtin_font("sans"), small);
  DetectorParams params;
  params.scales = {1};
  EXPECT_TRUE(detect_multiscale(bank, img, params).empty());
  params.scales = {2};
  const auto found = detect_multiscale(bank, img, params);
  ASSERT_FALSE(found.empty());
  EXPECT_EQ(found.front().label, 'B');
  EXPECT_EQ(found.front().scale, 2);
  EXPECT_GE(found.front().score, params.theta_backtrace);
}

TEST(Detection, BlankImageGivesNothing) {
  ModelBank bank;
  bank.models.push_back(glyph_model('B'));
  EXPECT_TRUE(detect_multiscale(bank, GrayImage(90, 60, 200), DetectorParams{}).empty());
}

TEST(Compatibility, SelfOneBlankZeroAndOrdering) {
  const CharacterModel& m = glyph_model('a');
  EXPECT_DOUBLE_EQ(compatibility_score(m, render_glyph('a', builtin_font("sans"))), 1.0);
  EXPECT_DOUBLE_EQ(compatibility_score(m, GrayImage(50, 64, 235)), 0.0);
  FontStyle near = builtin_font("sans");
  near.x_scale = 1.05;
  FontStyle far = builtin_font("sans");
  far.single_story_a = true;
  far.boxy = true;
  EXPECT_GT(compatibility_score(m, render_glyph('a', near)), compatibility_score(m, render_glyph('a', far)));
}
