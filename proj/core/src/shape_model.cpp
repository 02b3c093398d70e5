#include "shapeocr/shape_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>

#include "shapeocr/error.hpp"

namespace shapeocr {

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kContour: return "contour";
    case ConstraintKind::kDistant: return "distant";
    case ConstraintKind::kBridge: return "bridge";
  }
  return "?";
}

ConstraintKind constraint_kind_from_string(const std::string& text) {
  if (text == "contour") return ConstraintKind::kContour;
  if (text == "distant") return ConstraintKind::kDistant;
  if (text == "bridge") return ConstraintKind::kBridge;
  fail(ErrorKind::kFormat, "unknown constraint kind '" + text + "'");
}

int BuildParams::radius_for(double dist) const {
  return perturbation_radius + int(std::floor(radius_per_pixel * dist + 1e-9));
}

namespace {

struct Neighbor {
  double dist;
  int other;
  auto operator<=>(const Neighbor&) const = default;
};

std::vector<Contour> chains_from_adjacency(int n, const std::vector<std::vector<int>>& adj) {
  std::vector<Contour> out;
  std::vector<bool> used(n, false);
  auto walk = [&](int start, bool closed) {
    Contour c;
    c.closed = closed;
    int prev = -1, cur = start;
    while (cur >= 0 && !used[cur]) {
      used[cur] = true;
      c.pools.push_back(cur);
      int next = -1;
      for (int nb : adj[cur]) {
        if (nb != prev && !used[nb]) {
          next = nb;
          break;
        }
      }
      prev = cur;
      cur = next;
    }
    if (c.pools.size() < 3) c.closed = false;
    out.push_back(std::move(c));
  };
  // Paths first, from their lower-index end; everything left over lies on a cycle.
  for (int i = 0; i < n; ++i) {
    if (!used[i] && adj[i].size() <= 1) walk(i, false);
  }
  for (int i = 0; i < n; ++i) {
    if (!used[i]) walk(i, true);
  }
  return out;
}

}  // namespace

std::vector<Contour> trace_contours(const LandmarkSet& set, const OrientedEdgeMap& edges) {
  const auto& lms = set.landmarks;
  const int n = int(lms.size());
  const int w = edges.width(), h = edges.height();
  if (n == 0) return {};

  // Multi-source BFS along active edge pixels; ties go to the earlier-picked landmark.
  std::vector<int> owner(std::size_t(w) * h, -1);
  std::deque<Point> queue;
  for (int i = 0; i < n; ++i) {
    const Landmark& l = lms[i];
    if (l.x < 0 || l.y < 0 || l.x >= w || l.y >= h) {
      fail(ErrorKind::kInvalidInput, "landmark outside the edge map");
    }
    const std::size_t idx = std::size_t(l.y) * w + l.x;
    if (owner[idx] < 0) {
      owner[idx] = i;
      queue.push_back(l.position());
    }
  }
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    const int own = owner[std::size_t(p.y) * w + p.x];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = p.x + dx, y = p.y + dy;
        if ((dx == 0 && dy == 0) || x < 0 || y < 0 || x >= w || y >= h) continue;
        if (!edges.active(x, y) || owner[std::size_t(y) * w + x] >= 0) continue;
        owner[std::size_t(y) * w + x] = own;
        queue.push_back({x, y});
      }
    }
  }

  std::set<std::pair<int, int>> touching;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = owner[std::size_t(y) * w + x];
      if (a < 0) continue;
      static constexpr Point kForward[4] = {{1, 0}, {-1, 1}, {0, 1}, {1, 1}};
      for (Point d : kForward) {
        const int xx = x + d.x, yy = y + d.y;
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
        const int b = owner[std::size_t(yy) * w + xx];
        if (b >= 0 && b != a) touching.insert({std::min(a, b), std::max(a, b)});
      }
    }
  }

  // Keep each landmark's two nearest touching neighbors; an adjacency survives when both
  // endpoints keep it, so every landmark ends with degree <= 2.
  std::vector<std::vector<Neighbor>> cand(n);
  for (const auto& [a, b] : touching) {
    const double d = distance(lms[a].position(), lms[b].position());
    cand[a].push_back({d, b});
    cand[b].push_back({d, a});
  }
  std::vector<std::set<int>> keep(n);
  for (int i = 0; i < n; ++i) {
    auto& c = cand[i];
    std::sort(c.begin(), c.end());
    for (std::size_t k = 0; k < c.size() && k < 2; ++k) keep[i].insert(c[k].other);
  }
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    for (const Neighbor& nb : cand[i]) {
      if (keep[i].count(nb.other) && keep[nb.other].count(i)) {
        adj[i].push_back(nb.other);
      }
    }
  }

  std::vector<Contour> chains = chains_from_adjacency(n, adj);

  // Mutual-nearest pruning can cut a contour at crowded spots; rejoin open ends that sit
  // close together, nearest pairs first.
  const double join = 2.0 * set.suppression_radius + 1.0;
  for (bool merged = true; merged;) {
    merged = false;
    struct End {
      double dist;
      int ca, cb;
      bool a_tail, b_tail;
      auto operator<=>(const End&) const = default;
    };
    std::vector<End> ends;
    for (int a = 0; a < int(chains.size()); ++a) {
      const Contour& A = chains[a];
      if (A.closed) continue;
      if (A.pools.size() >= 3) {
        const double d = distance(lms[A.pools.front()].position(),
                                  lms[A.pools.back()].position());
        if (d <= join) ends.push_back({d, a, a, false, true});
      }
      for (int b = a + 1; b < int(chains.size()); ++b) {
        const Contour& B = chains[b];
        if (B.closed) continue;
        for (int ea = 0; ea < 2; ++ea) {
          for (int eb = 0; eb < 2; ++eb) {
            const int pa = ea ? A.pools.back() : A.pools.front();
            const int pb = eb ? B.pools.back() : B.pools.front();
            const double d = distance(lms[pa].position(), lms[pb].position());
            if (d <= join) ends.push_back({d, a, b, ea == 1, eb == 1});
          }
        }
      }
    }
    if (ends.empty()) break;
    const End e = *std::min_element(ends.begin(), ends.end());
    if (e.ca == e.cb) {
      chains[e.ca].closed = true;
    } else {
      Contour A = chains[e.ca];
      Contour B = chains[e.cb];
      if (!e.a_tail) std::reverse(A.pools.begin(), A.pools.end());
      if (e.b_tail) std::reverse(B.pools.begin(), B.pools.end());
      A.pools.insert(A.pools.end(), B.pools.begin(), B.pools.end());
      chains[e.ca] = std::move(A);
      chains.erase(chains.begin() + e.cb);
    }
    merged = true;
  }
  return chains;
}

std::vector<std::vector<int>> deformation_bounds(int n, const std::vector<LateralConstraint>& cs) {
  std::vector<std::vector<long long>> d(n, std::vector<long long>(n, kUnbounded));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (const LateralConstraint& c : cs) {
    auto& v = d[c.a][c.b];
    v = std::min<long long>(v, c.radius);
    d[c.b][c.a] = v;
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      if (d[i][k] >= kUnbounded) continue;
      for (int j = 0; j < n; ++j) {
        const long long via = d[i][k] + d[k][j];
        if (via < d[i][j]) d[i][j] = via;
      }
    }
  }
  std::vector<std::vector<int>> out(n, std::vector<int>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out[i][j] = int(std::min<long long>(d[i][j], kUnbounded));
    }
  }
  return out;
}

int deformation_bound(const CharacterModel& model, int i, int j) {
  const int n = int(model.pools.size());
  if (i < 0 || j < 0 || i >= n || j >= n) fail(ErrorKind::kInvalidInput, "pool index out of range");
  return deformation_bounds(n, model.constraints)[i][j];
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

struct PairByDistance {
  double dist;
  int a, b;
  auto operator<=>(const PairByDistance&) const = default;
};

}  // namespace

bool constraint_graph_connected(int n, const std::vector<LateralConstraint>& cs) {
  if (n <= 1) return true;
  UnionFind uf(n);
  int groups = n;
  for (const LateralConstraint& c : cs) groups -= uf.unite(c.a, c.b) ? 1 : 0;
  return groups == 1;
}

CharacterModel build_model(char label, const std::string& font_id, const LandmarkSet& landmarks,
                           const OrientedEdgeMap& edges, const BuildParams& params) {
  const int n = int(landmarks.landmarks.size());
  if (n < 2) fail(ErrorKind::kInvalidInput, std::string("model for '") + label + "' needs >= 2 landmarks");
  if (params.perturbation_radius < 1 || params.radius_per_pixel < 0.0 || params.gamma < 0.0 ||
      params.window < 0) {
    fail(ErrorKind::kInvalidInput, "invalid model build parameters");
  }

  CharacterModel m;
  m.label = label;
  m.font_id = font_id;
  m.normalized_height = params.normalized_height;
  for (const Landmark& l : landmarks.landmarks) m.pools.push_back({l, params.window});
  m.contours = trace_contours(landmarks, edges);

  std::set<std::pair<int, int>> linked;
  auto dist = [&](int a, int b) { return distance(m.position(a), m.position(b)); };
  auto add = [&](int a, int b, ConstraintKind kind) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    if (a == b || linked.count(key)) return false;
    linked.insert(key);
    m.constraints.push_back({key.first, key.second, params.radius_for(dist(a, b)), kind});
    return true;
  };
  for (const Contour& c : m.contours) {
    for (std::size_t i = 0; i + 1 < c.pools.size(); ++i) add(c.pools[i], c.pools[i + 1], ConstraintKind::kContour);
    if (c.closed && c.pools.size() >= 3) add(c.pools.back(), c.pools.front(), ConstraintKind::kContour);
  }

  std::vector<PairByDistance> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) pairs.push_back({dist(a, b), a, b});
  }
  std::sort(pairs.begin(), pairs.end());

  // Join disjoint contours through their closest pools (Kruskal over components).
  UnionFind uf(n);
  for (const LateralConstraint& c : m.constraints) uf.unite(c.a, c.b);
  for (const PairByDistance& p : pairs) {
    if (uf.unite(p.a, p.b)) add(p.a, p.b, ConstraintKind::kBridge);
  }

  // Greedy distant constraints, shortest pairs first, while tracking all-pairs slack.
  std::vector<std::vector<long long>> bound(n, std::vector<long long>(n, kUnbounded));
  {
    const auto init = deformation_bounds(n, m.constraints);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) bound[i][j] = init[i][j];
    }
  }
  for (const PairByDistance& p : pairs) {
    const int r = params.radius_for(p.dist);
    if (double(bound[p.a][p.b]) <= params.gamma * r) continue;
    if (!add(p.a, p.b, ConstraintKind::kDistant)) continue;
    for (int i = 0; i < n; ++i) {
      const long long ia = bound[i][p.a];
      const long long ib = bound[i][p.b];
      for (int j = 0; j < n; ++j) {
        const long long via = std::min(ia + r + bound[p.b][j],
                                       ib + r + bound[p.a][j]);
        if (via < bound[i][j]) bound[i][j] = via;
      }
    }
  }
  return m;
}

CharacterModel build_model_from_glyph(char label, const std::string& font_id,
                                      const GrayImage& glyph, const BuildParams& params) {
  const OrientedEdgeMap edges = detect_edges(glyph, params.edges);
  const LandmarkSet landmarks = sparsify_landmarks(edges, params.suppression_radius);
  return build_model(label, font_id, landmarks, edges, params);
}

void validate_model(const CharacterModel& m) {
  const int n = int(m.pools.size());
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::kInvalidModel, std::string("model '") + m.label + "/" + m.font_id + "': " + what);
  };
  if (n < 2) bad("fewer than 2 pools");
  std::set<std::pair<int, int>> seen;
  for (const LateralConstraint& c : m.constraints) {
    if (c.a < 0 || c.b < 0 || c.a >= n || c.b >= n || c.a == c.b) bad("constraint index");
    if (c.radius <= 0) bad("non-positive radius");
    if (!seen.insert({std::min(c.a, c.b), std::max(c.a, c.b)}).second) bad("duplicate constraint");
  }
  for (const Contour& c : m.contours) {
    for (int p : c.pools) {
      if (p < 0 || p >= n) bad("contour index");
    }
    for (std::size_t i = 0; i + 1 < c.pools.size(); ++i) {
      if (!seen.count({std::min(c.pools[i], c.pools[i + 1]), std::max(c.pools[i], c.pools[i + 1])})) {
        bad("contour neighbors without a constraint");
      }
    }
  }
  if (!constraint_graph_connected(n, m.constraints)) bad("constraint graph is disconnected");
}

}  // namespace shapeocr
