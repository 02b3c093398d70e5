#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <numeric>

#include "shapeocr/synth.hpp"

namespace oracle {

using namespace shapeocr;

namespace {

double clamp_to(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// log(1 - min_max(x, 0.0, 0.99))
double prob_row(double p) { return std::log(1.0 - clamp_to(p, 0.0, 0.99)); }

double border_of(const CandidateDetection& c, int width, int height) {
  double d = c.bbox.x0;
  d = std::min(d, c.bbox.y0);
  d = std::min(d, width - 1.0 - c.bbox.x1);
  d = std::min(d, height - 1.0 - c.bbox.y1);
  if (d < 0.0) d = 0.0;
  return std::log(clamp_to(d, 1.0, 20.0) / 20.0);
}

double angle_at(PointF a, PointF b, PointF c) {
  const double ux = b.x - a.x, uy = b.y - a.y;
  const double vx = c.x - b.x, vy = c.y - b.y;
  const double lu = std::hypot(ux, uy), lv = std::hypot(vx, vy);
  if (lu == 0.0 || lv == 0.0) return 0.0;
  const double cosine = clamp_to((ux * vx + uy * vy) / (lu * lv), -1.0, 1.0);
  return std::acos(cosine) * 180.0 / M_PI;
}

}  // namespace

std::array<double, 12> transition_row(const CandidateDetection* l, const CandidateDetection* r, int width,
                                      int height, double median, const CharNGramModel* lm, bool ngrams) {
  std::array<double, 12> f{};
  if (l != nullptr) {
    f[0] = prob_row(l->score);
    const double size = std::abs(std::log2(l->height / median));
    f[1] = std::log(1.0 - clamp_to(size, 0.0, 4.0) / 5.0);
    if (ngrams) f[6] = prob_row(lm->unigram(l->label));
  }
  if (l == nullptr) {
    f[2] = border_of(*r, width, height);
    if (ngrams) f[7] = prob_row(lm->head_unigram(r->label));
  } else if (r == nullptr) {
    f[2] = border_of(*l, width, height);
    if (ngrams) f[8] = prob_row(lm->tail_unigram(l->label));
  } else {
    const double tallest = std::max(l->height, r->height);
    f[3] = std::log(clamp_to(std::abs(r->height - l->height) / tallest, 0.01, 1.0));
    f[4] = std::log(clamp_to(std::abs(r->bbox.y1 - l->bbox.y1) / tallest, 0.01, 1.0));
    f[5] = std::log(clamp_to(std::abs(r->mean_color - l->mean_color), 0.1, 10.0) / 10.0);
    if (ngrams) {
      f[9] = prob_row(lm->bigram(l->label, r->label));
      f[10] = prob_row(lm->head_bigram(l->label, r->label));
      f[11] = prob_row(lm->tail_bigram(l->label, r->label));
    }
  }
  return f;
}

std::array<double, 6> smoothness_row(const CandidateDetection* a, const CandidateDetection& b,
                                     const CandidateDetection* c, const CharNGramModel* lm, bool ngrams) {
  std::array<double, 6> f{};
  if (a == nullptr && c != nullptr) {
    if (ngrams) f[1] = prob_row(lm->head_bigram(b.label, c->label));
  } else if (a != nullptr && c == nullptr) {
    if (ngrams) f[2] = prob_row(lm->tail_bigram(a->label, b.label));
  } else if (a != nullptr && c != nullptr) {
    if (ngrams) f[0] = prob_row(lm->trigram(a->label, b.label, c->label));
    auto bottom = [](const CandidateDetection& d) { return PointF{0.5 * (d.bbox.x0 + d.bbox.x1), d.bbox.y1}; };
    auto top = [](const CandidateDetection& d) { return PointF{0.5 * (d.bbox.x0 + d.bbox.x1), d.bbox.y0}; };
    f[3] = std::log(clamp_to(angle_at(bottom(*a), bottom(b), bottom(*c)), 0.01, 45.0) / 45.0);
    f[4] = std::log(clamp_to(angle_at(top(*a), top(b), top(*c)), 0.01, 45.0) / 45.0);
    const double gap1 = b.bbox.x0 - a->bbox.x1;
    const double gap2 = c->bbox.x0 - b.bbox.x1;
    f[5] = std::log(clamp_to(std::abs(gap2 - gap1), 0.01, 16.0) / 16.0);
  }
  return f;
}

double median_height(const std::vector<CandidateDetection>& cs) {
  std::vector<double> h;
  for (const auto& c : cs) h.push_back(c.height);
  std::sort(h.begin(), h.end());
  const std::size_t n = h.size();
  return n % 2 ? h[n / 2] : (h[n / 2 - 1] + h[n / 2]) / 2.0;
}

std::vector<std::vector<int>> all_paths(const ParseGraph& g) {
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  std::function<void(int)> walk = [&](int node) {
    for (const ParseEdge& e : g.edges) {
      if (e.from != node) continue;
      if (e.to == kEndNode) {
        out.push_back(stack);
        continue;
      }
      stack.push_back(e.to);
      walk(e.to);
      stack.pop_back();
    }
  };
  walk(kStartNode);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double path_score(const ParseGraph& g, const FeatureWeights& w, const std::vector<int>& nodes,
                  const CharNGramModel& lm, bool ngrams) {
  const double median = median_height(g.candidates);
  auto at = [&](std::size_t i) -> const CandidateDetection* {
    return i == 0 || i > nodes.size() ? nullptr : &g.candidates[std::size_t(nodes[i - 1])];
  };
  // Positions 0 and n+1 are the pseudo-nodes.
  double s = 0.0;
  for (std::size_t i = 0; i <= nodes.size(); ++i) {
    const auto t = transition_row(at(i), at(i + 1), g.image_width, g.image_height, median, &lm, ngrams);
    for (int k = 0; k < 12; ++k) s += w.transition[k] * t[k];
  }
  for (std::size_t i = 1; i <= nodes.size(); ++i) {
    const auto f = smoothness_row(at(i - 1), *at(i), at(i + 1), &lm, ngrams);
    for (int k = 0; k < 6; ++k) s += w.smoothness[k] * f[k];
  }
  return s;
}

Best best_path(const ParseGraph& g, const FeatureWeights& w, const CharNGramModel& lm, bool ngrams) {
  Best best;
  for (const auto& p : all_paths(g)) {
    const double s = path_score(g, w, p, lm, ngrams);
    if (!best.found || s > best.score) {
      best.nodes = p;
      best.score = s;
      best.found = true;
    }
  }
  return best;
}

namespace {

Point model_offset(const CharacterModel& m, int a, int b) { return m.position(b) - m.position(a); }

bool pair_ok(const CharacterModel& m, int a, int b, int radius, Point pa, Point pb) {
  const Point want = model_offset(m, a, b);
  const Point got = pb - pa;
  return std::abs(got.x - want.x) <= radius && std::abs(got.y - want.y) <= radius;
}

struct PairLimit {
  int a, b, radius;
};

int search(const CharacterModel& m, const EvidenceMaps& ev, const std::vector<Rect>& domains,
           const std::vector<PairLimit>& limits, std::vector<Point>* best_positions) {
  const int n = int(m.pools.size());
  std::vector<Point> pos(static_cast<std::size_t>(n));
  int best = -1;
  std::function<void(int, int)> place = [&](int p, int matched) {
    if (p == n) {
      if (matched > best) {
        best = matched;
        if (best_positions != nullptr) *best_positions = pos;
      }
      return;
    }
    if (best >= 0 && matched + (n - p) <= best) return;  // cannot improve on the incumbent
    const Rect& d = domains[std::size_t(p)];
    for (int y = d.y0; y < d.y1(); ++y) {
      for (int x = d.x0; x < d.x1(); ++x) {
        pos[std::size_t(p)] = {x, y};
        bool ok = true;
        for (const PairLimit& l : limits) {
          const int other = l.a == p ? l.b : l.b == p ? l.a : -1;
          if (other < 0 || other > p) continue;
          if (!pair_ok(m, l.a, l.b, l.radius, pos[std::size_t(l.a)], pos[std::size_t(l.b)])) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        const int hit = ev.match(m.pools[std::size_t(p)].landmark.orientation, {x, y}) ? 1 : 0;
        place(p + 1, matched + hit);
      }
    }
  };
  place(0, 0);
  return best;
}

}  // namespace

int exhaustive_map(const CharacterModel& m, const EvidenceMaps& ev, const std::vector<Rect>& domains,
                   std::vector<Point>* best) {
  std::vector<PairLimit> limits;
  for (const auto& c : m.constraints) limits.push_back({c.a, c.b, c.radius});
  return search(m, ev, domains, limits, best);
}

int exhaustive_tree(const CharacterModel& m, const SpanningTreeModel& tree, const EvidenceMaps& ev,
                    const std::vector<Rect>& domains) {
  std::vector<PairLimit> limits;
  for (std::size_t p = 0; p < tree.parent.size(); ++p) {
    if (tree.parent[p] >= 0) limits.push_back({tree.parent[p], int(p), tree.radius[p]});
  }
  return search(m, ev, domains, limits, nullptr);
}

double enumerated_margin(const TrainingSample& s, const FeatureWeights& w) {
  const double gold = score_path(s.graph, w, s.gold.nodes);
  const std::set<int> gold_edges(s.gold.edges.begin(), s.gold.edges.end());
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& nodes : all_paths(s.graph)) {
    if (nodes == s.gold.nodes) continue;
    const std::vector<int> edges = path_edges(s.graph, nodes);
    const std::set<int> mine(edges.begin(), edges.end());
    int hamming = 0;
    for (int e : mine) hamming += gold_edges.count(e) ? 0 : 1;
    for (int e : gold_edges) hamming += mine.count(e) ? 0 : 1;
    margin = std::min(margin, gold - score_path(s.graph, w, nodes) - hamming);
  }
  return margin;
}

std::vector<int> greedy_cover(const std::vector<std::vector<bool>>& rep, double coverage) {
  const int n = int(rep.size());
  std::vector<bool> covered(std::size_t(n), false);
  std::vector<bool> used(std::size_t(n), false);
  std::vector<int> chosen;
  int count = 0;
  while (double(count) / n < coverage) {
    int pick = -1, gain = 0;
    for (int i = 0; i < n; ++i) {
      if (used[std::size_t(i)]) continue;
      int g = 0;
      for (int j = 0; j < n; ++j) g += (rep[std::size_t(i)][std::size_t(j)] || i == j) && !covered[std::size_t(j)];
      if (g > gain) {
        gain = g;
        pick = i;
      }
    }
    if (pick < 0) break;
    used[std::size_t(pick)] = true;
    chosen.push_back(pick);
    for (int j = 0; j < n; ++j) {
      if ((rep[std::size_t(pick)][std::size_t(j)] || pick == j) && !covered[std::size_t(j)]) {
        covered[std::size_t(j)] = true;
        ++count;
      }
    }
  }
  return chosen;
}

CharNGramModel small_lm() {
  const std::vector<std::string> words = {"the", "then", "than", "that", "hat", "hit", "tin", "ten", "net",
                                          "Net", "Ant", "ant", "nine", "tent", "Hen", "hint", "inn", "tan"};
  return train_char_ngrams(words, 0.01);
}

CandidateDetection random_candidate(std::mt19937_64& rng, int width, int height) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CandidateDetection c;
  c.label = kAlphabet[std::uniform_int_distribution<int>(0, 51)(rng)];
  c.font_id = "toy";
  c.score = u(rng) * 1.1;
  const double w = 5.0 + u(rng) * 30.0;
  const double h = 8.0 + u(rng) * 40.0;
  c.bbox.x0 = u(rng) * (width - w) - 2.0;
  c.bbox.y0 = u(rng) * (height - h) - 2.0;
  c.bbox.x1 = c.bbox.x0 + w;
  c.bbox.y1 = c.bbox.y0 + h;
  c.height = h * (0.5 + u(rng));
  c.mean_color = u(rng) * 255.0;
  if (u(rng) < 0.1) c.mean_color = 100.0;  // exact color ties
  c.stroke_width = 4.0;
  return c;
}

ParseGraph random_dag(std::mt19937_64& rng, int n, int max_edges, const CharNGramModel& lm, bool ngrams) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int width = 320, height = 80;
  std::vector<CandidateDetection> cs;
  for (int i = 0; i < n; ++i) cs.push_back(random_candidate(rng, width, height));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ParseEdge> edges;
  for (int i = 0; i < n; ++i) {
    if (i == 0 || u(rng) < 0.5) edges.push_back({kStartNode, order[std::size_t(i)]});
    if (i == n - 1 || u(rng) < 0.5) edges.push_back({order[std::size_t(i)], kEndNode});
  }
  std::vector<ParseEdge> inner;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) inner.push_back({order[std::size_t(i)], order[std::size_t(j)]});
  }
  std::shuffle(inner.begin(), inner.end(), rng);
  for (const ParseEdge& e : inner) {
    if (int(edges.size()) >= max_edges) break;
    if (u(rng) < 0.6) edges.push_back(e);
  }
  std::shuffle(edges.begin(), edges.end(), rng);
  ParseGraph g = make_graph(std::move(cs), width, height, edges);
  FeatureOptions fo;
  fo.use_ngrams = ngrams;
  attach_features(g, lm, fo);
  return g;
}

FeatureWeights random_weights(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  FeatureWeights w;
  for (double& v : w.transition) v = nd(rng);
  for (double& v : w.smoothness) v = nd(rng);
  return w;
}

std::vector<TrainingSample> separable_samples(std::mt19937_64& rng, int count, const CharNGramModel& lm) {
  const FeatureWeights hidden = random_weights(rng);
  std::vector<TrainingSample> out;
  while (int(out.size()) < count) {
    ParseGraph g = random_dag(rng, 2 + int(rng() % 5), 16, lm);
    const auto paths = all_paths(g);
    if (paths.size() < 2) continue;
    std::vector<double> scores;
    for (const auto& p : paths) scores.push_back(score_path(g, hidden, p));
    const std::size_t best = std::size_t(std::max_element(scores.begin(), scores.end()) - scores.begin());
    TrainingSample s;
    s.gold = make_path(g, hidden, paths[best]);
    s.graph = std::move(g);
    if (!(enumerated_margin(s, hidden) > 0.1)) continue;
    s.source = "separable-" + std::to_string(out.size());
    out.push_back(std::move(s));
  }
  return out;
}

CharacterModel toy_model(std::mt19937_64& rng, int max_pools) {
  std::uniform_int_distribution<int> coord(2, 9), orient(0, 15), radius(1, 2);
  const int n = std::uniform_int_distribution<int>(3, max_pools)(rng);
  CharacterModel m;
  m.label = 'x';
  m.font_id = "toy";
  m.normalized_height = 12.0;
  for (int i = 0; i < n; ++i) {
    Landmark l;
    l.x = coord(rng);
    l.y = coord(rng);
    l.orientation = orient(rng);
    l.magnitude = 1.0f;
    m.pools.push_back({l, 1});
  }
  std::vector<std::pair<int, int>> used;
  auto add = [&](int a, int b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    if (a == b || std::find(used.begin(), used.end(), key) != used.end()) return;
    used.push_back(key);
    m.constraints.push_back({key.first, key.second, radius(rng), ConstraintKind::kContour});
  };
  for (int i = 1; i < n; ++i) add(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
  const int extra = std::uniform_int_distribution<int>(1, n)(rng);
  for (int k = 0; k < extra; ++k) {
    add(std::uniform_int_distribution<int>(0, n - 1)(rng), std::uniform_int_distribution<int>(0, n - 1)(rng));
  }
  return m;
}

OrientedEdgeMap random_edges(std::mt19937_64& rng, int width, int height, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  OrientedEdgeMap e(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (u(rng) < density) e.set(x, y, std::uniform_int_distribution<int>(0, 15)(rng), 1.0f);
    }
  }
  return e;
}

}  // namespace oracle
