#include "shapeocr/parse_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "shapeocr/error.hpp"
#include "shapeocr/text_io.hpp"

namespace shapeocr {

const std::array<const char*, kTransitionFeatures> kTransitionNames = {
    "char_score", "size_prior", "border_distance", "height_diff", "y_offset",    "color_diff",
    "unigram",    "head_unigram", "tail_unigram",  "bigram",      "head_bigram", "tail_bigram",
};

const std::array<const char*, kSmoothnessFeatures> kSmoothnessNames = {
    "trigram", "head_bigram3", "tail_bigram3", "bottom_angle", "top_angle", "spacing_evenness",
};

double min_max(double x, double a, double b) {
  if (!(a <= b)) fail(ErrorKind::kInvalidInput, "min_max requires a <= b");
  return std::min(std::max(x, a), b);
}

double probability_feature(double x) { return std::log(1.0 - min_max(x, 0.0, 0.99)); }
double size_prior_feature(double x) { return std::log(1.0 - min_max(x, 0.0, 4.0) / 5.0); }
double border_feature(double x) { return std::log(min_max(x, 1.0, 20.0) / 20.0); }
double ratio_feature(double x) { return std::log(min_max(x, 0.01, 1.0)); }
double color_feature(double x) { return std::log(min_max(x, 0.1, 10.0) / 10.0); }
double angle_feature(double degrees) { return std::log(min_max(degrees, 0.01, 45.0) / 45.0); }
double evenness_feature(double x) { return std::log(min_max(x, 0.01, 16.0) / 16.0); }

namespace {

double ratio_of(double diff, double a, double b) {
  const double m = std::max(a, b);
  return m > 0.0 ? diff / m : 0.0;
}

double border_distance(const CandidateDetection& c, const FeatureContext& ctx) {
  const double d = std::min({c.bbox.x0, c.bbox.y0, ctx.image_width - 1.0 - c.bbox.x1,
                             ctx.image_height - 1.0 - c.bbox.y1});
  return std::max(0.0, d);
}

double size_prior(const CandidateDetection& c, const FeatureContext& ctx) {
  if (!(c.height > 0.0) || !(ctx.median_height > 0.0)) return 0.0;
  return std::abs(std::log2(c.height / ctx.median_height));
}

const CharNGramModel& lm_of(const FeatureContext& ctx) {
  if (ctx.lm == nullptr) fail(ErrorKind::kInvalidInput, "n-gram features need a language model");
  return *ctx.lm;
}

PointF bottom_center(const CandidateDetection& c) { return {c.bbox.center_x(), c.bbox.y1}; }
PointF top_center(const CandidateDetection& c) { return {c.bbox.center_x(), c.bbox.y0}; }

}  // namespace

TransitionFeatureVector transition_features(const CandidateDetection* left, const CandidateDetection* right,
                                            const FeatureContext& ctx) {
  TransitionFeatureVector f{};
  if (left == nullptr && right == nullptr) fail(ErrorKind::kInvalidInput, "edge needs at least one candidate");
  if (left != nullptr) {
    f[kCharScore] = probability_feature(left->score);
    f[kSizePrior] = size_prior_feature(size_prior(*left, ctx));
    if (ctx.use_ngrams) f[kUnigram] = probability_feature(lm_of(ctx).unigram(left->label));
  }
  if (left == nullptr) {
    f[kBorderDistance] = border_feature(border_distance(*right, ctx));
    if (ctx.use_ngrams) f[kHeadUnigram] = probability_feature(lm_of(ctx).head_unigram(right->label));
  } else if (right == nullptr) {
    f[kBorderDistance] = border_feature(border_distance(*left, ctx));
    if (ctx.use_ngrams) f[kTailUnigram] = probability_feature(lm_of(ctx).tail_unigram(left->label));
  } else {
    const double h1 = left->height, h2 = right->height;
    f[kHeightDiff] = ratio_feature(ratio_of(std::abs(h2 - h1), h1, h2));
    f[kYOffset] = ratio_feature(ratio_of(std::abs(right->bbox.y1 - left->bbox.y1), h1, h2));
    f[kColorDiff] = color_feature(std::abs(right->mean_color - left->mean_color));
    if (ctx.use_ngrams) {
      const CharNGramModel& lm = lm_of(ctx);
      f[kBigram] = probability_feature(lm.bigram(left->label, right->label));
      f[kHeadBigram] = probability_feature(lm.head_bigram(left->label, right->label));
      f[kTailBigram] = probability_feature(lm.tail_bigram(left->label, right->label));
    }
  }
  return f;
}

double turn_angle(PointF a, PointF b, PointF c) {
  const double ux = b.x - a.x, uy = b.y - a.y;
  const double vx = c.x - b.x, vy = c.y - b.y;
  const double nu = std::hypot(ux, uy), nv = std::hypot(vx, vy);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double cosv = std::clamp((ux * vx + uy * vy) / (nu * nv), -1.0, 1.0);
  return std::acos(cosv) * 180.0 / M_PI;
}

SmoothnessFeatureVector smoothness_features(const CandidateDetection* a, const CandidateDetection& b,
                                            const CandidateDetection* c, const FeatureContext& ctx) {
  SmoothnessFeatureVector f{};
  if (a == nullptr && c == nullptr) return f;
  if (a == nullptr) {
    if (ctx.use_ngrams) f[kHeadBigram3] = probability_feature(lm_of(ctx).head_bigram(b.label, c->label));
    return f;
  }
  if (c == nullptr) {
    if (ctx.use_ngrams) f[kTailBigram3] = probability_feature(lm_of(ctx).tail_bigram(a->label, b.label));
    return f;
  }
  if (ctx.use_ngrams) f[kTrigram] = probability_feature(lm_of(ctx).trigram(a->label, b.label, c->label));
  f[kBottomAngle] = angle_feature(turn_angle(bottom_center(*a), bottom_center(b), bottom_center(*c)));
  f[kTopAngle] = angle_feature(turn_angle(top_center(*a), top_center(b), top_center(*c)));
  const double d1 = b.bbox.x0 - a->bbox.x1;
  const double d2 = c->bbox.x0 - b.bbox.x1;
  f[kSpacingEvenness] = evenness_feature(std::abs(d2 - d1));
  return f;
}

ParseFeatureVector FeatureWeights::flat() const {
  ParseFeatureVector v{};
  std::copy(transition.begin(), transition.end(), v.begin());
  std::copy(smoothness.begin(), smoothness.end(), v.begin() + kTransitionFeatures);
  return v;
}

FeatureWeights FeatureWeights::from_flat(const ParseFeatureVector& v) {
  FeatureWeights w;
  std::copy(v.begin(), v.begin() + kTransitionFeatures, w.transition.begin());
  std::copy(v.begin() + kTransitionFeatures, v.end(), w.smoothness.begin());
  return w;
}

void write_weights(std::ostream& out, const FeatureWeights& w) {
  out << "PARSERWEIGHTS v1\n";
  for (int i = 0; i < kTransitionFeatures; ++i) out << "T." << kTransitionNames[i] << ' ' << format_double(w.transition[i]) << '\n';
  for (int i = 0; i < kSmoothnessFeatures; ++i) out << "S." << kSmoothnessNames[i] << ' ' << format_double(w.smoothness[i]) << '\n';
}

FeatureWeights read_weights(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "PARSERWEIGHTS v1") fail(ErrorKind::kFormat, "missing PARSERWEIGHTS v1 header");
  std::map<std::string, double*> slots;
  FeatureWeights w;
  for (int i = 0; i < kTransitionFeatures; ++i) slots[std::string("T.") + kTransitionNames[i]] = &w.transition[i];
  for (int i = 0; i < kSmoothnessFeatures; ++i) slots[std::string("S.") + kSmoothnessNames[i]] = &w.smoothness[i];
  std::map<std::string, bool> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, value, extra;
    if (!(ls >> name >> value) || (ls >> extra)) {
      fail(ErrorKind::kFormat, "weights line " + std::to_string(lineno) + ": expected `name value`");
    }
    auto it = slots.find(name);
    if (it == slots.end()) fail(ErrorKind::kFormat, "weights line " + std::to_string(lineno) + ": unknown weight " + name);
    if (seen[name]) fail(ErrorKind::kFormat, "weights: duplicate " + name);
    seen[name] = true;
    double v = 0.0;
    if (!parse_double(value, v)) fail(ErrorKind::kFormat, "weights: bad number for " + name);
    if (!std::isfinite(v)) fail(ErrorKind::kFormat, "weights: " + name + " is not finite");
    *it->second = v;
  }
  if (seen.size() != slots.size()) fail(ErrorKind::kFormat, "weights file lists " + std::to_string(seen.size()) + " of 18 weights");
  return w;
}

void write_weights(const std::filesystem::path& path, const FeatureWeights& w) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_weights(out, w);
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

FeatureWeights read_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  return read_weights(in);
}

int ParseGraph::find_edge(int from, int to) const {
  const std::vector<int>& list = from == kStartNode ? start_edges : out[std::size_t(from)];
  for (int e : list) {
    if (edges[std::size_t(e)].to == to) return e;
  }
  return -1;
}

ParseGraph make_graph(std::vector<CandidateDetection> candidates, int image_width, int image_height,
                      const std::vector<ParseEdge>& edges) {
  if (candidates.empty()) fail(ErrorKind::kEmptyGraph, "parse graph needs at least one candidate");
  ParseGraph g;
  g.candidates = std::move(candidates);
  g.image_width = image_width;
  g.image_height = image_height;
  const int n = int(g.candidates.size());
  g.in.assign(std::size_t(n), {});
  g.out.assign(std::size_t(n), {});
  for (const ParseEdge& e : edges) {
    const bool from_ok = e.from == kStartNode || (e.from >= 0 && e.from < n);
    const bool to_ok = e.to == kEndNode || (e.to >= 0 && e.to < n);
    if (!from_ok || !to_ok || (e.from == kStartNode && e.to == kEndNode) || e.from == e.to) {
      fail(ErrorKind::kInvalidInput, "parse edge endpoints out of range");
    }
    const int id = int(g.edges.size());
    g.edges.push_back(e);
    if (e.from == kStartNode) {
      g.start_edges.push_back(id);
    } else {
      g.out[std::size_t(e.from)].push_back(id);
    }
    if (e.to == kEndNode) {
      g.end_edges.push_back(id);
    } else {
      g.in[std::size_t(e.to)].push_back(id);
    }
  }
  return g;
}

ParseGraph build_graph(std::vector<CandidateDetection> candidates, int image_width, int image_height,
                       const GraphParams& params) {
  if (candidates.empty()) fail(ErrorKind::kEmptyGraph, "parse graph needs at least one candidate");
  if (!(params.max_gap >= 0.0) || !(params.max_overlap >= 0.0)) {
    fail(ErrorKind::kInvalidInput, "graph gap and overlap limits must be non-negative");
  }
  const int n = int(candidates.size());
  double mean_h = 0.0;
  for (const CandidateDetection& c : candidates) mean_h += c.bbox.height();
  mean_h /= n;
  const double max_gap_px = params.max_gap * mean_h;

  std::vector<ParseEdge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({kStartNode, i});
  for (int i = 0; i < n; ++i) {
    const BoxF& a = candidates[std::size_t(i)].bbox;
    for (int j = 0; j < n; ++j) {
      const BoxF& b = candidates[std::size_t(j)].bbox;
      if (!(b.center_x() > a.center_x())) continue;
      const double gap = b.x0 - a.x1 - 1.0;
      if (gap > max_gap_px) continue;
      if (-gap > params.max_overlap * std::min(a.width(), b.width())) continue;
      edges.push_back({i, j});
    }
  }
  for (int i = 0; i < n; ++i) edges.push_back({i, kEndNode});
  ParseGraph g = make_graph(std::move(candidates), image_width, image_height, edges);
  g.max_gap_px = max_gap_px;
  return g;
}

void attach_features(ParseGraph& g, const CharNGramModel& lm, const FeatureOptions& options) {
  FeatureContext ctx;
  ctx.image_width = g.image_width;
  ctx.image_height = g.image_height;
  ctx.lm = &lm;
  ctx.use_ngrams = options.use_ngrams;
  std::vector<double> heights;
  for (const CandidateDetection& c : g.candidates) heights.push_back(c.height);
  std::sort(heights.begin(), heights.end());
  const std::size_t h = heights.size();
  ctx.median_height = h % 2 == 1 ? heights[h / 2] : 0.5 * (heights[h / 2 - 1] + heights[h / 2]);

  auto node = [&](int id) -> const CandidateDetection* {
    return id < 0 ? nullptr : &g.candidates[std::size_t(id)];
  };
  g.transition.assign(g.edges.size(), {});
  g.pairs.assign(g.edges.size(), {});
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const ParseEdge& pe = g.edges[e];
    g.transition[e] = transition_features(node(pe.from), node(pe.to), ctx);
    if (pe.from == kStartNode) continue;
    for (int prev : g.in[std::size_t(pe.from)]) {
      const int a = g.edges[std::size_t(prev)].from;
      g.pairs[e].push_back({prev, smoothness_features(node(a), g.candidates[std::size_t(pe.from)], node(pe.to), ctx)});
    }
  }
}

std::vector<int> path_edges(const ParseGraph& g, const std::vector<int>& nodes) {
  if (nodes.empty()) fail(ErrorKind::kConstraintViolation, "path has no candidates");
  std::vector<int> out;
  int prev = kStartNode;
  for (std::size_t i = 0; i <= nodes.size(); ++i) {
    const int next = i < nodes.size() ? nodes[i] : kEndNode;
    if (next != kEndNode && (next < 0 || next >= int(g.candidates.size()))) {
      fail(ErrorKind::kConstraintViolation, "path node out of range");
    }
    const int e = g.find_edge(prev, next);
    if (e < 0) fail(ErrorKind::kConstraintViolation, "path hop " + std::to_string(i) + " is not a graph edge");
    out.push_back(e);
    prev = next;
  }
  return out;
}

std::vector<int> activations(const ParseGraph& g, const ParsePath& path) {
  std::vector<int> z(g.edges.size(), 0);
  for (int e : path.edges) z[std::size_t(e)] += 1;
  return z;
}

bool satisfies_flow(const ParseGraph& g, const std::vector<int>& z) {
  if (z.size() != g.edges.size()) return false;
  for (int v : z) {
    if (v != 0 && v != 1) return false;
  }
  int from_start = 0;
  for (int e : g.start_edges) from_start += z[std::size_t(e)];
  if (from_start != 1) return false;
  for (std::size_t c = 0; c < g.candidates.size(); ++c) {
    int sin = 0, sout = 0;
    for (int e : g.in[c]) sin += z[std::size_t(e)];
    for (int e : g.out[c]) sout += z[std::size_t(e)];
    if (sin != sout || sin > 1) return false;
  }
  return true;
}

namespace {

void require_features(const ParseGraph& g) {
  if (!g.has_features()) fail(ErrorKind::kInvalidInput, "parse graph features are not attached");
}

const SmoothnessFeatureVector& pair_values(const ParseGraph& g, int prev, int next) {
  for (const PairFeatures& p : g.pairs[std::size_t(next)]) {
    if (p.previous == prev) return p.values;
  }
  fail(ErrorKind::kConstraintViolation, "edges are not consecutive");
}

template <std::size_t N>
double dot(const std::array<double, N>& w, const std::array<double, N>& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += w[i] * f[i];
  return s;
}

std::string path_text(const ParseGraph& g, const std::vector<int>& nodes) {
  std::string s;
  for (int v : nodes) s.push_back(g.candidates[std::size_t(v)].label);
  return s;
}

}  // namespace

ParseFeatureVector path_features(const ParseGraph& g, const std::vector<int>& nodes) {
  require_features(g);
  const std::vector<int> es = path_edges(g, nodes);
  ParseFeatureVector f{};
  for (std::size_t i = 0; i < es.size(); ++i) {
    const TransitionFeatureVector& t = g.transition[std::size_t(es[i])];
    for (int r = 0; r < kTransitionFeatures; ++r) f[std::size_t(r)] += t[std::size_t(r)];
    if (i > 0) {
      const SmoothnessFeatureVector& s = pair_values(g, es[i - 1], es[i]);
      for (int r = 0; r < kSmoothnessFeatures; ++r) f[std::size_t(kTransitionFeatures + r)] += s[std::size_t(r)];
    }
  }
  return f;
}

double score_path(const ParseGraph& g, const FeatureWeights& w, const std::vector<int>& nodes) {
  require_features(g);
  const std::vector<int> es = path_edges(g, nodes);
  double score = 0.0;
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (i > 0) score += dot(w.smoothness, pair_values(g, es[i - 1], es[i]));
    score += dot(w.transition, g.transition[std::size_t(es[i])]);
  }
  return score;
}

ParsePath make_path(const ParseGraph& g, const FeatureWeights& w, const std::vector<int>& nodes) {
  ParsePath p;
  p.nodes = nodes;
  p.edges = path_edges(g, nodes);
  p.score = score_path(g, w, nodes);
  p.text = path_text(g, nodes);
  return p;
}

namespace {

struct Entry {
  double score;
  int prev_edge;
  int prev_rank;
};

bool entry_before(const Entry& a, const Entry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.prev_edge != b.prev_edge) return a.prev_edge < b.prev_edge;
  return a.prev_rank < b.prev_rank;
}

void keep_best(std::vector<Entry>& list, int k) {
  if (int(list.size()) > k) {
    std::partial_sort(list.begin(), list.begin() + k, list.end(), entry_before);
    list.resize(std::size_t(k));
  } else {
    std::sort(list.begin(), list.end(), entry_before);
  }
}

std::vector<int> topological_candidates(const ParseGraph& g) {
  const int n = int(g.candidates.size());
  std::vector<int> indeg(std::size_t(n), 0);
  for (const ParseEdge& e : g.edges) {
    if (e.from != kStartNode && e.to != kEndNode) ++indeg[std::size_t(e.to)];
  }
  std::vector<int> ready, order;
  for (int i = n - 1; i >= 0; --i) {
    if (indeg[std::size_t(i)] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    std::vector<int> freed;
    for (int e : g.out[std::size_t(v)]) {
      const int t = g.edges[std::size_t(e)].to;
      if (t != kEndNode && --indeg[std::size_t(t)] == 0) freed.push_back(t);
    }
    std::sort(freed.rbegin(), freed.rend());
    ready.insert(ready.end(), freed.begin(), freed.end());
    std::sort(ready.rbegin(), ready.rend());
  }
  if (int(order.size()) != n) fail(ErrorKind::kInvalidInput, "parse graph has a cycle");
  return order;
}

}  // namespace

std::vector<ParsePath> infer_best(const ParseGraph& g, const FeatureWeights& w, int k,
                                  const std::vector<double>& edge_loss) {
  require_features(g);
  if (k < 1) fail(ErrorKind::kInvalidInput, "k must be at least 1");
  if (!edge_loss.empty() && edge_loss.size() != g.edges.size()) {
    fail(ErrorKind::kInvalidInput, "edge loss size does not match the graph");
  }
  const std::size_t m = g.edges.size();
  std::vector<double> unary(m);
  for (std::size_t e = 0; e < m; ++e) {
    unary[e] = dot(w.transition, g.transition[e]) + (edge_loss.empty() ? 0.0 : edge_loss[e]);
  }
  std::vector<std::vector<Entry>> best(m);
  auto relax = [&](int e) {
    std::vector<Entry> list;
    const ParseEdge& pe = g.edges[std::size_t(e)];
    if (pe.from == kStartNode) {
      list.push_back({unary[std::size_t(e)], -1, -1});
    } else {
      for (const PairFeatures& p : g.pairs[std::size_t(e)]) {
        const double s = dot(w.smoothness, p.values);
        const std::vector<Entry>& prev = best[std::size_t(p.previous)];
        for (std::size_t r = 0; r < prev.size(); ++r) {
          list.push_back({prev[r].score + s + unary[std::size_t(e)], p.previous, int(r)});
        }
      }
    }
    keep_best(list, k);
    best[std::size_t(e)] = std::move(list);
  };
  for (int e : g.start_edges) relax(e);
  for (int v : topological_candidates(g)) {
    for (int e : g.out[std::size_t(v)]) relax(e);
  }

  std::vector<Entry> finals;
  for (int e : g.end_edges) {
    for (std::size_t r = 0; r < best[std::size_t(e)].size(); ++r) {
      finals.push_back({best[std::size_t(e)][r].score, e, int(r)});
    }
  }
  keep_best(finals, k);

  std::vector<ParsePath> paths;
  for (const Entry& f : finals) {
    ParsePath p;
    p.score = f.score;
    int e = f.prev_edge, r = f.prev_rank;
    while (e >= 0) {
      p.edges.push_back(e);
      const Entry& en = best[std::size_t(e)][std::size_t(r)];
      e = en.prev_edge;
      r = en.prev_rank;
    }
    std::reverse(p.edges.begin(), p.edges.end());
    for (std::size_t i = 0; i + 1 < p.edges.size(); ++i) p.nodes.push_back(g.edges[std::size_t(p.edges[i])].to);
    p.text = path_text(g, p.nodes);
    paths.push_back(std::move(p));
  }
  return paths;
}

void write_parse_report(std::ostream& out, const ParseGraph& g, const FeatureWeights& w,
                        const std::vector<ParsePath>& paths) {
  out << "PARSE v1 candidates " << g.candidates.size() << " edges " << g.edges.size() << " paths " << paths.size()
      << '\n';
  for (std::size_t i = 0; i < paths.size(); ++i) {
    out << "path " << i << ' ' << (paths[i].text.empty() ? "-" : paths[i].text) << ' '
        << format_double(paths[i].score) << " nodes";
    for (int v : paths[i].nodes) out << ' ' << v;
    out << '\n';
  }
  if (paths.empty() || !g.has_features()) return;
  const ParsePath& best = paths.front();
  auto name = [&](int id) {
    return id == kStartNode ? std::string("*") : id == kEndNode ? std::string("#") : std::to_string(id);
  };
  for (std::size_t i = 0; i < best.edges.size(); ++i) {
    const int e = best.edges[i];
    const ParseEdge& pe = g.edges[std::size_t(e)];
    out << "edge " << name(pe.from) << ' ' << name(pe.to) << " potential "
        << format_double(dot(w.transition, g.transition[std::size_t(e)]));
    for (int r = 0; r < kTransitionFeatures; ++r) {
      out << ' ' << kTransitionNames[std::size_t(r)] << '=' << format_double(g.transition[std::size_t(e)][std::size_t(r)]);
    }
    out << '\n';
    if (i == 0) continue;
    const SmoothnessFeatureVector& s = pair_values(g, best.edges[i - 1], e);
    out << "pair " << name(g.edges[std::size_t(best.edges[i - 1])].from) << ' ' << name(pe.from) << ' ' << name(pe.to)
        << " potential " << format_double(dot(w.smoothness, s));
    for (int r = 0; r < kSmoothnessFeatures; ++r) {
      out << ' ' << kSmoothnessNames[std::size_t(r)] << '=' << format_double(s[std::size_t(r)]);
    }
    out << '\n';
  }
}

}  // namespace shapeocr
