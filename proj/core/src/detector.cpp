#include "shapeocr/detector.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>

#include "shapeocr/error.hpp"
#include "shapeocr/parallel.hpp"

namespace shapeocr {

namespace {

constexpr std::int16_t kNeg16 = -8192;
constexpr float kNegF = -1e9f;

Point offset_between(const CharacterModel& m, int from, int to) { return m.position(to) - m.position(from); }

}  // namespace

SpanningTreeModel to_spanning_tree(const CharacterModel& model) {
  const int n = int(model.pools.size());
  if (n == 0) fail(ErrorKind::kInvalidModel, "model has no pools");
  struct Weighted {
    double w;
    int a, b, radius;
    auto operator<=>(const Weighted&) const = default;
  };
  std::vector<Weighted> cand;
  for (const LateralConstraint& c : model.constraints) {
    const int a = std::min(c.a, c.b), b = std::max(c.a, c.b);
    cand.push_back({distance(model.position(a), model.position(b)), a, b, c.radius});
  }
  std::sort(cand.begin(), cand.end());
  std::vector<int> comp(n);
  std::iota(comp.begin(), comp.end(), 0);
  auto find = [&](int x) {
    while (comp[x] != x) x = comp[x] = comp[comp[x]];
    return x;
  };
  SpanningTreeModel t;
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  for (const Weighted& e : cand) {
    const int ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    comp[std::max(ra, rb)] = std::min(ra, rb);
    t.edges.emplace_back(e.a, e.b);
    adj[e.a].emplace_back(e.b, e.radius);
    adj[e.b].emplace_back(e.a, e.radius);
  }
  if (int(t.edges.size()) != n - 1) fail(ErrorKind::kInvalidModel, "constraint graph is disconnected");

  double cx = 0.0, cy = 0.0;
  for (int i = 0; i < n; ++i) {
    cx += model.position(i).x;
    cy += model.position(i).y;
  }
  cx /= n;
  cy /= n;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double d = std::hypot(model.position(i).x - cx, model.position(i).y - cy);
    if (d < best) {
      best = d;
      t.root = i;
    }
  }

  t.parent.assign(n, -1);
  t.radius.assign(n, 0);
  t.children.assign(n, {});
  for (auto& a : adj) std::sort(a.begin(), a.end());
  std::vector<bool> seen(n, false);
  std::deque<int> queue{t.root};
  seen[t.root] = true;
  while (!queue.empty()) {
    const int p = queue.front();
    queue.pop_front();
    t.order.push_back(p);
    for (const auto& [q, r] : adj[p]) {
      if (seen[q]) continue;
      seen[q] = true;
      t.parent[q] = p;
      t.radius[q] = r;
      t.children[p].push_back(q);
      queue.push_back(q);
    }
  }
  return t;
}

EvidenceMaps::EvidenceMaps(const OrientedEdgeMap& edges, int tolerance)
    : width_(edges.width()), height_(edges.height()) {
  maps_.assign(kOrientations, Grid<std::int16_t>(rect(), 0));
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!edges.active(x, y)) continue;
      const int b = edges.orientation(x, y);
      for (int o = 0; o < kOrientations; ++o) {
        if (bin_distance(o, b) <= tolerance) maps_[o].at({x, y}) = 1;
      }
    }
  }
}

TreeForward::TreeForward(const CharacterModel& model, const SpanningTreeModel& tree,
                         const EvidenceMaps& evidence)
    : model_(model), tree_(tree), rect_(evidence.rect()) {
  const int n = int(model.pools.size());
  belief_.resize(n);
  for (int p = 0; p < n; ++p) belief_[p] = evidence.map(model.pools[p].landmark.orientation);
  Grid<std::int16_t> msg, scratch;
  for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
    const int c = *it;
    const int p = tree.parent[c];
    if (p < 0) continue;
    shifted_box_max(belief_[c], offset_between(model, p, c), tree.radius[c], rect_, kNeg16, msg, scratch);
    std::int16_t* dst = belief_[p].values.data();
    const std::int16_t* src = msg.values.data();
    const std::size_t size = msg.values.size();
    for (std::size_t i = 0; i < size; ++i) dst[i] = std::int16_t(std::max<int>(kNeg16, dst[i] + src[i]));
  }
}

ActivationHeatmap TreeForward::heatmap() const {
  ActivationHeatmap h;
  h.width = rect_.width;
  h.height = rect_.height;
  h.score.resize(std::size_t(h.width) * h.height);
  const auto& root = belief_[tree_.root].values;
  const float n = float(model_.pools.size());
  for (std::size_t i = 0; i < root.size(); ++i) h.score[i] = root[i] < 0 ? 0.0f : float(root[i]) / n;
  return h;
}

int TreeForward::root_count(Point root) const {
  if (!rect_.contains(root)) return -1;
  const int v = belief_[tree_.root].at(root);
  return v < 0 ? -1 : v;
}

std::vector<Point> TreeForward::decode(Point root) const {
  if (root_count(root) < 0) return {};
  std::vector<Point> pos(model_.pools.size());
  pos[tree_.root] = root;
  for (int c : tree_.order) {
    const int p = tree_.parent[c];
    if (p < 0) continue;
    const Point target = pos[p] + offset_between(model_, p, c);
    const int r = tree_.radius[c];
    const Rect box = intersect({target.x - r, target.y - r, 2 * r + 1, 2 * r + 1}, rect_);
    int best = kNeg16 - 1, best_d = 0;
    Point best_p{};
    for (int y = box.y0; y < box.y1(); ++y) {
      for (int x = box.x0; x < box.x1(); ++x) {
        const int v = belief_[c].at({x, y});
        const int d = (x - target.x) * (x - target.x) + (y - target.y) * (y - target.y);
        if (v > best || (v == best && d < best_d)) {
          best = v;
          best_d = d;
          best_p = {x, y};
        }
      }
    }
    if (best < 0) return {};
    pos[c] = best_p;
  }
  return pos;
}

ActivationHeatmap forward_pass(const CharacterModel& model, const SpanningTreeModel& tree,
                               const OrientedEdgeMap& edges, int orientation_tolerance) {
  const EvidenceMaps evidence(edges, orientation_tolerance);
  return TreeForward(model, tree, evidence).heatmap();
}

std::vector<Point> nonmax_suppress(const ActivationHeatmap& heatmap, int radius, double min_score,
                                   std::size_t max_count) {
  if (radius < 1) fail(ErrorKind::kInvalidInput, "suppression radius must be >= 1");
  struct Peak {
    float score;
    int y, x;
  };
  std::vector<Peak> peaks;
  for (int y = 0; y < heatmap.height; ++y) {
    for (int x = 0; x < heatmap.width; ++x) {
      const float s = heatmap.at(x, y);
      if (s >= min_score) peaks.push_back({s, y, x});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Point> kept;
  const long long r2 = (long long)radius * radius;
  for (const Peak& p : peaks) {
    if (kept.size() >= max_count) break;
    bool near = false;
    for (const Point& k : kept) {
      const long long dx = k.x - p.x, dy = k.y - p.y;
      if (dx * dx + dy * dy < r2) {
        near = true;
        break;
      }
    }
    if (!near) kept.push_back({p.x, p.y});
  }
  return kept;
}

std::vector<Rect> anchored_domains(const CharacterModel& model, int root, Point anchor, int window,
                                   const Rect& image) {
  std::vector<Rect> d;
  for (int p = 0; p < int(model.pools.size()); ++p) {
    const Point c = anchor + offset_between(model, root, p);
    d.push_back(intersect({c.x - window, c.y - window, 2 * window + 1, 2 * window + 1}, image));
  }
  return d;
}

int tree_score_in_domains(const CharacterModel& model, const SpanningTreeModel& tree,
                          const EvidenceMaps& evidence, const std::vector<Rect>& domains) {
  const int n = int(model.pools.size());
  std::vector<Grid<std::int16_t>> belief(n);
  for (int p = 0; p < n; ++p) {
    if (domains[p].empty()) return -1;
    belief[p] = Grid<std::int16_t>(domains[p], 0);
    const auto& ev = evidence.map(model.pools[p].landmark.orientation);
    for (int y = domains[p].y0; y < domains[p].y1(); ++y) {
      for (int x = domains[p].x0; x < domains[p].x1(); ++x) belief[p].at({x, y}) = ev.at({x, y});
    }
  }
  Grid<std::int16_t> msg, scratch;
  for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
    const int c = *it;
    const int p = tree.parent[c];
    if (p < 0) continue;
    shifted_box_max(belief[c], offset_between(model, p, c), tree.radius[c], domains[p], kNeg16, msg, scratch);
    for (std::size_t i = 0; i < msg.values.size(); ++i) {
      belief[p].values[i] = std::int16_t(std::max<int>(kNeg16, belief[p].values[i] + msg.values[i]));
    }
  }
  const auto& root = belief[tree.root].values;
  const int best = *std::max_element(root.begin(), root.end());
  return best < 0 ? -1 : best;
}

bool satisfies_constraints(const CharacterModel& model, const std::vector<Point>& pos) {
  if (pos.size() != model.pools.size()) return false;
  for (const LateralConstraint& c : model.constraints) {
    const Point want = offset_between(model, c.a, c.b);
    const Point got = pos[c.b] - pos[c.a];
    if (std::abs(got.x - want.x) > c.radius || std::abs(got.y - want.y) > c.radius) return false;
  }
  return true;
}

namespace {

constexpr long long kInf = std::numeric_limits<long long>::max() / 4;

// Shortest-path closure of one axis of the difference constraints, with node n standing for
// the origin so pool domains become edges. dist[i][j] bounds x_j - x_i from above.
struct AxisClosure {
  int n = 0;
  std::vector<long long> d;

  long long& at(int i, int j) { return d[std::size_t(i) * (n + 1) + j]; }
  long long at(int i, int j) const { return d[std::size_t(i) * (n + 1) + j]; }

  long long lo(int p) const { return -at(p, n); }
  long long hi(int p) const { return at(n, p); }

  // Adds x_j - x_i <= w and restores the closure.
  void tighten(int i, int j, long long w) {
    if (w >= at(i, j)) return;
    const int m = n + 1;
    std::vector<long long> to_i(m), from_j(m);
    for (int k = 0; k < m; ++k) {
      to_i[k] = at(k, i);
      from_j[k] = at(j, k);
    }
    for (int a = 0; a < m; ++a) {
      if (to_i[a] >= kInf) continue;
      for (int b = 0; b < m; ++b) {
        if (from_j[b] >= kInf) continue;
        const long long via = to_i[a] + w + from_j[b];
        if (via < at(a, b)) at(a, b) = via;
      }
    }
  }
};

bool build_closure(const CharacterModel& model, const std::vector<Rect>& domains, bool x_axis,
                   AxisClosure& c) {
  const int n = int(model.pools.size());
  c.n = n;
  c.d.assign(std::size_t(n + 1) * (n + 1), kInf);
  for (int i = 0; i <= n; ++i) c.at(i, i) = 0;
  for (const LateralConstraint& k : model.constraints) {
    const Point o = offset_between(model, k.a, k.b);
    const long long off = x_axis ? o.x : o.y;
    c.at(k.a, k.b) = std::min(c.at(k.a, k.b), off + k.radius);
    c.at(k.b, k.a) = std::min(c.at(k.b, k.a), -off + k.radius);
  }
  for (int p = 0; p < n; ++p) {
    const Rect& r = domains[p];
    const long long lo = x_axis ? r.x0 : r.y0;
    const long long hi = (x_axis ? r.x1() : r.y1()) - 1;
    c.at(n, p) = std::min(c.at(n, p), hi);
    c.at(p, n) = std::min(c.at(p, n), -lo);
  }
  const int m = n + 1;
  for (int k = 0; k < m; ++k) {
    for (int i = 0; i < m; ++i) {
      const long long ik = c.at(i, k);
      if (ik >= kInf) continue;
      for (int j = 0; j < m; ++j) {
        const long long kj = c.at(k, j);
        if (kj >= kInf) continue;
        if (ik + kj < c.at(i, j)) c.at(i, j) = ik + kj;
      }
    }
  }
  for (int i = 0; i < m; ++i) {
    if (c.at(i, i) < 0) return false;
  }
  return true;
}

struct Link {
  int to;
  int edge;
  int dir;      // 0: message a->b stored in msg[edge][0]
  Point offset; // model offset from this pool to `to`
  int radius;
};

struct Problem {
  const CharacterModel& model;
  const EvidenceMaps& evidence;
  const std::vector<Rect>& domains;
  std::vector<std::vector<Link>> links;
  std::vector<int> order;
  std::vector<Point> preferred;

  bool matched(int p, Point q) const { return evidence.match(model.pools[p].landmark.orientation, q); }
};

std::vector<int> bfs_order(const Problem& pr) {
  const int n = int(pr.model.pools.size());
  int root = 0;
  for (int p = 1; p < n; ++p) {
    const long long a = (long long)pr.domains[p].width * pr.domains[p].height;
    const long long b = (long long)pr.domains[root].width * pr.domains[root].height;
    if (a < b) root = p;
  }
  std::vector<int> order;
  std::vector<bool> seen(n, false);
  for (int start = root, k = 0; k < n; ++k) {
    if (k > 0) {
      start = -1;
      for (int p = 0; p < n && start < 0; ++p) {
        if (!seen[p]) start = p;
      }
      if (start < 0) break;
    }
    if (seen[start]) continue;
    std::deque<int> q{start};
    seen[start] = true;
    while (!q.empty()) {
      const int p = q.front();
      q.pop_front();
      order.push_back(p);
      std::vector<int> nb;
      for (const Link& l : pr.links[p]) nb.push_back(l.to);
      std::sort(nb.begin(), nb.end());
      for (int v : nb) {
        if (!seen[v]) {
          seen[v] = true;
          q.push_back(v);
        }
      }
    }
  }
  return order;
}

// Loopy max-product with damping; returns per-pool beliefs and whether it converged.
std::vector<Grid<float>> loopy_bp(const Problem& pr, const MapOptions& opt, bool& converged, int& iterations) {
  const int n = int(pr.model.pools.size());
  std::vector<Grid<float>> unary(n);
  for (int p = 0; p < n; ++p) {
    unary[p] = Grid<float>(pr.domains[p], 0.0f);
    const auto& ev = pr.evidence.map(pr.model.pools[p].landmark.orientation);
    for (int y = pr.domains[p].y0; y < pr.domains[p].y1(); ++y) {
      for (int x = pr.domains[p].x0; x < pr.domains[p].x1(); ++x) unary[p].at({x, y}) = float(ev.at({x, y}));
    }
  }
  const std::size_t m = pr.model.constraints.size();
  std::vector<std::array<Grid<float>, 2>> msg(m);
  for (std::size_t e = 0; e < m; ++e) {
    const LateralConstraint& c = pr.model.constraints[e];
    msg[e][0] = Grid<float>(pr.domains[c.b], 0.0f);
    msg[e][1] = Grid<float>(pr.domains[c.a], 0.0f);
  }
  auto incoming = [&](const Link& l) -> const Grid<float>& { return msg[l.edge][1 - l.dir]; };
  auto total = [&](int p) {
    Grid<float> t = unary[p];
    for (const Link& l : pr.links[p]) {
      const Grid<float>& in = incoming(l);
      for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = std::max(kNegF, t.values[i] + in.values[i]);
    }
    return t;
  };

  std::vector<int> sweep = pr.order;
  sweep.insert(sweep.end(), pr.order.rbegin(), pr.order.rend());
  Grid<float> pre, out, scratch;
  converged = false;
  iterations = 0;
  const float damp = float(opt.bp_damping);
  for (int it = 0; it < opt.bp_iterations; ++it) {
    ++iterations;
    float delta = 0.0f;
    for (int p : sweep) {
      const Grid<float> t = total(p);
      for (const Link& l : pr.links[p]) {
        const Grid<float>& back = incoming(l);
        pre = t;
        for (std::size_t i = 0; i < pre.values.size(); ++i) {
          pre.values[i] = pre.values[i] <= kNegF ? kNegF : std::max(kNegF, pre.values[i] - back.values[i]);
        }
        shifted_box_max(pre, Point{-l.offset.x, -l.offset.y}, l.radius, pr.domains[l.to], kNegF, out, scratch);
        float peak = kNegF;
        for (float v : out.values) peak = std::max(peak, v);
        Grid<float>& cur = msg[l.edge][l.dir];
        for (std::size_t i = 0; i < out.values.size(); ++i) {
          float v = out.values[i] <= kNegF * 0.5f ? kNegF : out.values[i] - peak;
          if (v > kNegF && cur.values[i] > kNegF) v = damp * cur.values[i] + (1.0f - damp) * v;
          if ((v > kNegF) != (cur.values[i] > kNegF)) {
            delta = std::max(delta, 1.0f);
          } else if (v > kNegF) {
            delta = std::max(delta, std::abs(v - cur.values[i]));
          }
          cur.values[i] = v;
        }
      }
    }
    if (it > 0 && delta < 1e-4f) {
      converged = true;
      break;
    }
  }
  std::vector<Grid<float>> beliefs(n);
  for (int p = 0; p < n; ++p) beliefs[p] = total(p);
  return beliefs;
}

long long sq_dist(Point a, Point b) {
  const long long dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Backtrack-free sequential decoding: each pool takes its best belief within the interval the
// closure leaves open given the pools already placed.
std::vector<Point> decode_with_closure(const Problem& pr, const std::vector<Grid<float>>& beliefs,
                                       const AxisClosure& cx, const AxisClosure& cy) {
  const int n = int(pr.model.pools.size());
  std::vector<Point> pos(n);
  std::vector<int> placed;
  for (int p : pr.order) {
    long long lx = cx.lo(p), hx = cx.hi(p), ly = cy.lo(p), hy = cy.hi(p);
    for (int q : placed) {
      lx = std::max(lx, pos[q].x - cx.at(p, q));
      hx = std::min(hx, pos[q].x + cx.at(q, p));
      ly = std::max(ly, pos[q].y - cy.at(p, q));
      hy = std::min(hy, pos[q].y + cy.at(q, p));
    }
    float best = -std::numeric_limits<float>::infinity();
    long long best_d = 0;
    Point best_p{int(lx), int(ly)};
    for (long long y = ly; y <= hy; ++y) {
      for (long long x = lx; x <= hx; ++x) {
        const Point q{int(x), int(y)};
        const float v = beliefs.empty() ? 0.0f : beliefs[p].at(q);
        const long long d = pr.preferred.empty() ? 0 : sq_dist(q, pr.preferred[p]);
        if (v > best || (v == best && d < best_d)) {
          best = v;
          best_d = d;
          best_p = q;
        }
      }
    }
    pos[p] = best_p;
    placed.push_back(p);
  }
  return pos;
}

int count_matched(const Problem& pr, const std::vector<Point>& pos) {
  int c = 0;
  for (int p = 0; p < int(pos.size()); ++p) c += pr.matched(p, pos[p]) ? 1 : 0;
  return c;
}

// Moves unmatched pools onto evidence wherever their direct constraints allow.
void polish(const Problem& pr, std::vector<Point>& pos) {
  for (int round = 0; round < 8; ++round) {
    bool changed = false;
    for (int p : pr.order) {
      if (pr.matched(p, pos[p])) continue;
      const Rect& d = pr.domains[p];
      int lx = d.x0, hx = d.x1() - 1, ly = d.y0, hy = d.y1() - 1;
      for (const Link& l : pr.links[p]) {
        // x_p - x_q must lie within -offset(p->q) +- radius
        lx = std::max(lx, pos[l.to].x - l.offset.x - l.radius);
        hx = std::min(hx, pos[l.to].x - l.offset.x + l.radius);
        ly = std::max(ly, pos[l.to].y - l.offset.y - l.radius);
        hy = std::min(hy, pos[l.to].y - l.offset.y + l.radius);
      }
      long long best_d = -1;
      Point best{};
      for (int y = ly; y <= hy; ++y) {
        for (int x = lx; x <= hx; ++x) {
          if (!pr.matched(p, {x, y})) continue;
          const long long dd = sq_dist({x, y}, pos[p]);
          if (best_d < 0 || dd < best_d) {
            best_d = dd;
            best = {x, y};
          }
        }
      }
      if (best_d >= 0) {
        pos[p] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
}

// Summed-area table of one pool's evidence over its domain.
struct Integral {
  Rect rect;
  std::vector<int> s;  // (w+1) x (h+1)

  int sum(long long x0, long long y0, long long x1, long long y1) const {  // inclusive bounds
    x0 = std::max<long long>(x0, rect.x0);
    y0 = std::max<long long>(y0, rect.y0);
    x1 = std::min<long long>(x1, rect.x1() - 1);
    y1 = std::min<long long>(y1, rect.y1() - 1);
    if (x0 > x1 || y0 > y1) return 0;
    const int w = rect.width + 1;
    auto at = [&](long long x, long long y) { return s[std::size_t(y - rect.y0) * w + (x - rect.x0)]; };
    return at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
  }
};

class BranchAndBound {
 public:
  BranchAndBound(const Problem& pr, const std::vector<Grid<float>>& beliefs, int budget)
      : pr_(pr), beliefs_(beliefs), budget_(budget) {
    const int n = int(pr.model.pools.size());
    integral_.resize(n);
    for (int p = 0; p < n; ++p) {
      const Rect& r = pr.domains[p];
      Integral& I = integral_[p];
      I.rect = r;
      I.s.assign(std::size_t(r.width + 1) * (r.height + 1), 0);
      const int w = r.width + 1;
      for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
          const int v = pr.matched(p, {r.x0 + x, r.y0 + y}) ? 1 : 0;
          I.s[std::size_t(y + 1) * w + (x + 1)] =
              v + I.s[std::size_t(y) * w + (x + 1)] + I.s[std::size_t(y + 1) * w + x] - I.s[std::size_t(y) * w + x];
        }
      }
    }
  }

  // Improves `best`/`best_pos` if possible; returns true when the search finished.
  bool run(AxisClosure cx, AxisClosure cy, int& best, std::vector<Point>& best_pos) {
    best_ = best;
    best_pos_ = best_pos;
    fixed_.assign(pr_.model.pools.size(), false);
    search(0, 0, cx, cy);
    best = best_;
    best_pos = best_pos_;
    return nodes_ <= budget_;
  }

 private:
  bool can_match(int p, const AxisClosure& cx, const AxisClosure& cy) const {
    return integral_[p].sum(cx.lo(p), cy.lo(p), cx.hi(p), cy.hi(p)) > 0;
  }

  void search(std::size_t depth, int matched, const AxisClosure& cx, const AxisClosure& cy) {
    if (++nodes_ > budget_) return;
    int bound = matched;
    for (std::size_t k = depth; k < pr_.order.size(); ++k) {
      bound += can_match(pr_.order[k], cx, cy) ? 1 : 0;
    }
    if (bound <= best_) return;
    if (depth == pr_.order.size()) {
      std::vector<Grid<float>> none;
      std::vector<Point> pos = decode_with_closure(pr_, none, cx, cy);
      const int score = count_matched(pr_, pos);
      if (score > best_) {
        best_ = score;
        best_pos_ = pos;
      }
      return;
    }
    const int p = pr_.order[depth];
    struct Choice {
      float belief;
      long long d;
      int y, x;
    };
    std::vector<Choice> choices;
    for (long long y = cy.lo(p); y <= cy.hi(p); ++y) {
      for (long long x = cx.lo(p); x <= cx.hi(p); ++x) {
        const Point q{int(x), int(y)};
        if (!pr_.matched(p, q)) continue;
        choices.push_back({beliefs_.empty() ? 0.0f : beliefs_[p].at(q),
                           pr_.preferred.empty() ? 0 : sq_dist(q, pr_.preferred[p]), q.y, q.x});
      }
    }
    std::sort(choices.begin(), choices.end(), [](const Choice& a, const Choice& b) {
      if (a.belief != b.belief) return a.belief > b.belief;
      if (a.d != b.d) return a.d < b.d;
      if (a.y != b.y) return a.y < b.y;
      return a.x < b.x;
    });
    const int origin = int(pr_.model.pools.size());
    for (const Choice& c : choices) {
      if (nodes_ > budget_) return;
      AxisClosure nx = cx, ny = cy;
      nx.tighten(origin, p, c.x);
      nx.tighten(p, origin, -c.x);
      ny.tighten(origin, p, c.y);
      ny.tighten(p, origin, -c.y);
      search(depth + 1, matched + 1, nx, ny);
    }
    search(depth + 1, matched, cx, cy);
  }

  const Problem& pr_;
  const std::vector<Grid<float>>& beliefs_;
  std::vector<Integral> integral_;
  std::vector<bool> fixed_;
  int budget_;
  int nodes_ = 0;
  int best_ = 0;
  std::vector<Point> best_pos_;
};

Problem make_problem(const CharacterModel& model, const EvidenceMaps& evidence, const std::vector<Rect>& domains,
                     const std::vector<Point>& preferred) {
  const int n = int(model.pools.size());
  Problem pr{model, evidence, domains, std::vector<std::vector<Link>>(n), {}, preferred};
  for (int e = 0; e < int(model.constraints.size()); ++e) {
    const LateralConstraint& c = model.constraints[e];
    pr.links[c.a].push_back({c.b, e, 0, offset_between(model, c.a, c.b), c.radius});
    pr.links[c.b].push_back({c.a, e, 1, offset_between(model, c.b, c.a), c.radius});
  }
  pr.order = bfs_order(pr);
  return pr;
}

// Constraint-satisfying placement as close as the closure allows to `preferred`, pool by pool.
std::optional<std::vector<Point>> project_feasible(const CharacterModel& model, const EvidenceMaps& evidence,
                                                   const std::vector<Rect>& domains,
                                                   const std::vector<Point>& preferred) {
  for (const Rect& r : domains) {
    if (r.empty()) return std::nullopt;
  }
  AxisClosure cx, cy;
  if (!build_closure(model, domains, true, cx) || !build_closure(model, domains, false, cy)) return std::nullopt;
  const Problem pr = make_problem(model, evidence, domains, preferred);
  return decode_with_closure(pr, {}, cx, cy);
}

}  // namespace

MapResult map_in_domains(const CharacterModel& model, const EvidenceMaps& evidence,
                         const std::vector<Rect>& domains, const MapOptions& options) {
  const int n = int(model.pools.size());
  MapResult res;
  if (int(domains.size()) != n) fail(ErrorKind::kInvalidInput, "one domain per pool required");
  for (const Rect& r : domains) {
    if (r.empty()) return res;
  }
  AxisClosure cx, cy;
  if (!build_closure(model, domains, true, cx) || !build_closure(model, domains, false, cy)) return res;

  Problem pr = make_problem(model, evidence, domains, options.preferred);
  if (options.min_matched > 0) {
    int bound = 0;
    for (int p = 0; p < n; ++p) {
      const Rect box = intersect(domains[p], {int(cx.lo(p)), int(cy.lo(p)), int(cx.hi(p) - cx.lo(p) + 1),
                                              int(cy.hi(p) - cy.lo(p) + 1)});
      bool any = false;
      for (int y = box.y0; y < box.y1() && !any; ++y) {
        for (int x = box.x0; x < box.x1() && !any; ++x) any = pr.matched(p, {x, y});
      }
      bound += any ? 1 : 0;
    }
    if (bound < options.min_matched) {
      res.feasible = true;
      res.pruned = true;
      return res;
    }
  }

  const std::vector<Grid<float>> beliefs = loopy_bp(pr, options, res.converged, res.iterations);
  std::vector<Point> pos = decode_with_closure(pr, beliefs, cx, cy);
  polish(pr, pos);
  int matched = count_matched(pr, pos);
  res.exact = matched == n;
  if (!res.exact && options.exact_node_budget > 0) {
    BranchAndBound bb(pr, beliefs, options.exact_node_budget);
    res.exact = bb.run(cx, cy, matched, pos);
  }
  res.feasible = true;
  res.positions = std::move(pos);
  res.matched = matched;
  return res;
}

namespace {

std::vector<int> root_bounds(const CharacterModel& model, int root) {
  const int n = int(model.pools.size());
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  for (const LateralConstraint& c : model.constraints) {
    adj[c.a].emplace_back(c.b, c.radius);
    adj[c.b].emplace_back(c.a, c.radius);
  }
  std::vector<int> dist(n, kUnbounded);
  using Item = std::pair<int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  dist[root] = 0;
  q.push({0, root});
  while (!q.empty()) {
    const auto [d, p] = q.top();
    q.pop();
    if (d > dist[p]) continue;
    for (const auto& [v, r] : adj[p]) {
      if (d + r < dist[v]) {
        dist[v] = d + r;
        q.push({dist[v], v});
      }
    }
  }
  return dist;
}

}  // namespace

BacktraceResult backtrace_raw(const CharacterModel& model, const SpanningTreeModel& tree,
                              const EvidenceMaps& evidence, const TreeForward* forward, Point anchor,
                              const DetectorParams& params, double min_score) {
  const int n = int(model.pools.size());
  const Rect image = evidence.rect();
  const int s = params.root_slack;
  const Rect root_box = intersect({anchor.x - s, anchor.y - s, 2 * s + 1, 2 * s + 1}, image);

  BacktraceResult out;
  out.root = anchor;
  MapOptions opt;
  opt.bp_iterations = params.bp_iterations;
  opt.bp_damping = params.bp_damping;
  opt.exact_node_budget = params.exact_node_budget;
  opt.min_matched = int(std::ceil(min_score * n - 1e-9));

  std::vector<Point> hint;
  if (forward != nullptr) {
    int best = -1;
    long long best_d = 0;
    for (int y = root_box.y0; y < root_box.y1(); ++y) {
      for (int x = root_box.x0; x < root_box.x1(); ++x) {
        const int v = forward->root_count({x, y});
        const long long d = sq_dist({x, y}, anchor);
        if (v > best || (v == best && d < best_d)) {
          best = v;
          best_d = d;
          out.root = {x, y};
        }
      }
    }
    if (best >= 0) hint = forward->decode(out.root);
  }
  if (!hint.empty()) {
    std::vector<Rect> domains(n);
    const int m = params.window_margin;
    for (int p = 0; p < n; ++p) {
      domains[p] = intersect({hint[p].x - m, hint[p].y - m, 2 * m + 1, 2 * m + 1}, image);
    }
    domains[tree.root] = root_box;
    opt.preferred = hint;
    out.map = map_in_domains(model, evidence, domains, opt);
  }
  if (!out.map.feasible) {
    // Pull the tree solution (or the undeformed model) onto the constraint set, then search
    // the same small windows around that placement.
    const std::vector<int> bounds = root_bounds(model, tree.root);
    std::vector<Rect> domains(n);
    std::vector<Point> undeformed(n);
    for (int p = 0; p < n; ++p) {
      undeformed[p] = out.root + offset_between(model, tree.root, p);
      const int w = std::min(bounds[p], params.fallback_slack_cap) + 2;
      domains[p] = intersect({undeformed[p].x - w, undeformed[p].y - w, 2 * w + 1, 2 * w + 1}, image);
    }
    domains[tree.root] = root_box;
    const std::vector<Point>& target = hint.empty() ? undeformed : hint;
    if (const auto placed = project_feasible(model, evidence, domains, target)) {
      std::vector<Rect> windows(n);
      const int m = params.window_margin;
      for (int p = 0; p < n; ++p) {
        const Point q = (*placed)[p];
        windows[p] = intersect(intersect({q.x - m, q.y - m, 2 * m + 1, 2 * m + 1}, image), domains[p]);
      }
      opt.preferred = *placed;
      out.map = map_in_domains(model, evidence, windows, opt);
    }
  }
  out.score = out.map.feasible ? double(out.map.matched) / n : 0.0;
  return out;
}

namespace {

CandidateDetection make_detection(const CharacterModel& model, const BacktraceResult& bt,
                                  const DetectorParams& params) {
  CandidateDetection d;
  d.label = model.label;
  d.font_id = model.font_id;
  d.score = bt.score;
  d.anchor = {double(bt.root.x), double(bt.root.y)};
  d.low_confidence = !bt.map.converged;
  d.exact = bt.map.exact;
  d.stroke_width = params.open_stroke_width;
  for (const Point& p : bt.map.positions) d.positions.push_back({double(p.x), double(p.y)});
  return d;
}

// Fills bbox, segmentation and size estimate from positions.
void finish_geometry(const CharacterModel& model, CandidateDetection& d) {
  d.bbox = {1e300, 1e300, -1e300, -1e300};
  double mx = 0, my = 0, px = 0, py = 0;
  const int n = int(d.positions.size());
  for (int i = 0; i < n; ++i) {
    const PointF& p = d.positions[i];
    d.bbox.x0 = std::min(d.bbox.x0, p.x);
    d.bbox.y0 = std::min(d.bbox.y0, p.y);
    d.bbox.x1 = std::max(d.bbox.x1, p.x);
    d.bbox.y1 = std::max(d.bbox.y1, p.y);
    mx += model.position(i).x;
    my += model.position(i).y;
    px += p.x;
    py += p.y;
  }
  mx /= n;
  my /= n;
  px /= n;
  py /= n;
  double sm = 0, sp = 0;
  for (int i = 0; i < n; ++i) {
    sm += std::pow(model.position(i).x - mx, 2) + std::pow(model.position(i).y - my, 2);
    sp += std::pow(d.positions[i].x - px, 2) + std::pow(d.positions[i].y - py, 2);
  }
  d.height = sm > 0 ? model.normalized_height * std::sqrt(sp / sm) : model.normalized_height;
  d.segmentation.clear();
  for (const Contour& c : model.contours) {
    Polyline pl;
    pl.closed = c.closed;
    for (int i : c.pools) pl.points.push_back(d.positions[i]);
    d.segmentation.push_back(std::move(pl));
  }
}

}  // namespace

std::optional<CandidateDetection> backtrace(const CharacterModel& model, const SpanningTreeModel& tree,
                                            const EvidenceMaps& evidence, const TreeForward* forward,
                                            Point anchor, const DetectorParams& params) {
  const BacktraceResult bt = backtrace_raw(model, tree, evidence, forward, anchor, params, params.theta_backtrace);
  if (!bt.map.feasible || bt.map.pruned || bt.score < params.theta_backtrace) return std::nullopt;
  CandidateDetection d = make_detection(model, bt, params);
  finish_geometry(model, d);
  return d;
}

BinaryMask detection_mask(const CandidateDetection& det, int width, int height) {
  return rasterize_outline(det.segmentation, width, height, det.stroke_width);
}

std::vector<CandidateDetection> detect_model(const CharacterModel& model, int model_index,
                                             const SpanningTreeModel& tree, const EvidenceMaps& evidence,
                                             const DetectorParams& params) {
  std::vector<CandidateDetection> out;
  const TreeForward fwd(model, tree, evidence);
  const ActivationHeatmap heat = fwd.heatmap();
  const int radius = std::max(1, int(std::lround(params.nms_radius_fraction * model.normalized_height)));
  const std::vector<Point> anchors =
      nonmax_suppress(heat, radius, params.forward_min_score, std::size_t(std::max(0, params.anchors_per_model)));
  const int n = int(model.pools.size());
  const int s = params.root_slack;
  for (const Point& a : anchors) {
    // The clamped loopy optimum can never beat the tree bound over the root window.
    int bound = -1;
    for (int y = a.y - s; y <= a.y + s; ++y) {
      for (int x = a.x - s; x <= a.x + s; ++x) bound = std::max(bound, fwd.root_count({x, y}));
    }
    if (double(bound) / n < params.theta_backtrace) continue;
    if (auto d = backtrace(model, tree, evidence, &fwd, a, params)) {
      // Configurations squeezed or stretched far beyond the trained size are parts of
      // other letters, not instances of this one.
      const double ratio = d->height / model.normalized_height;
      if (ratio < params.min_height_ratio || ratio > params.max_height_ratio) continue;
      d->model_index = model_index;
      out.push_back(std::move(*d));
    }
  }
  return out;
}

std::vector<CandidateDetection> detect_multiscale(const ModelBank& bank, const GrayImage& image,
                                                  const DetectorParams& params) {
  std::vector<SpanningTreeModel> trees(bank.models.size());
  for (std::size_t i = 0; i < bank.models.size(); ++i) trees[i] = to_spanning_tree(bank.models[i]);

  std::vector<CandidateDetection> all;
  for (int scale : params.scales) {
    if (scale < 1) fail(ErrorKind::kInvalidInput, "detection scales must be >= 1");
    const GrayImage scaled = upsample(image, scale);
    const OrientedEdgeMap edges = detect_edges(scaled, params.edges);
    if (edges.active_count() == 0) continue;
    const EvidenceMaps evidence(edges, params.orientation_tolerance);
    std::vector<std::vector<CandidateDetection>> per_model(bank.models.size());
    parallel_for(bank.models.size(), params.threads, [&](std::size_t i) {
      per_model[i] = detect_model(bank.models[i], int(i), trees[i], evidence, params);
    });
    const double inv = 1.0 / scale;
    auto back = [&](PointF p) { return PointF{(p.x + 0.5) * inv - 0.5, (p.y + 0.5) * inv - 0.5}; };
    for (std::size_t i = 0; i < per_model.size(); ++i) {
      for (CandidateDetection& d : per_model[i]) {
        d.scale = scale;
        d.anchor = back(d.anchor);
        for (PointF& p : d.positions) p = back(p);
        finish_geometry(bank.models[i], d);
        d.height *= inv;
        d.stroke_width *= inv;
        all.push_back(std::move(d));
      }
    }
  }

  // Label-aware merge across fonts and scales, strongest first.
  std::sort(all.begin(), all.end(), [](const CandidateDetection& a, const CandidateDetection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scale != b.scale) return a.scale < b.scale;
    if (a.model_index != b.model_index) return a.model_index < b.model_index;
    if (a.anchor.y != b.anchor.y) return a.anchor.y < b.anchor.y;
    return a.anchor.x < b.anchor.x;
  });
  std::vector<CandidateDetection> kept;
  for (CandidateDetection& d : all) {
    bool dup = false;
    for (const CandidateDetection& k : kept) {
      if (k.label == d.label && box_iou(k.bbox, d.bbox) > params.merge_iou) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(std::move(d));
  }
  for (CandidateDetection& d : kept) {
    const BinaryMask mask = detection_mask(d, image.width(), image.height());
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (!mask.get(x, y)) continue;
        sum += image.at(x, y);
        ++count;
      }
    }
    d.mean_color = count ? sum / double(count) : 0.0;
  }
  std::sort(kept.begin(), kept.end(), [](const CandidateDetection& a, const CandidateDetection& b) {
    if (a.bbox.x0 != b.bbox.x0) return a.bbox.x0 < b.bbox.x0;
    if (a.label != b.label) return a.label < b.label;
    if (a.score != b.score) return a.score > b.score;
    return a.model_index < b.model_index;
  });
  return kept;
}

double compatibility_score(const CharacterModel& model, const GrayImage& glyph, const DetectorParams& params) {
  const OrientedEdgeMap edges = detect_edges(glyph, params.edges);
  if (edges.active_count() == 0) return 0.0;
  const EvidenceMaps evidence(edges, params.orientation_tolerance);
  const SpanningTreeModel tree = to_spanning_tree(model);
  const TreeForward fwd(model, tree, evidence);
  const int radius = std::max(1, int(std::lround(params.nms_radius_fraction * model.normalized_height)));
  double best = 0.0;
  for (const Point& a : nonmax_suppress(fwd.heatmap(), radius, 0.0, 3)) {
    best = std::max(best, backtrace_raw(model, tree, evidence, &fwd, a, params).score);
  }
  return best;
}

}  // namespace shapeocr
