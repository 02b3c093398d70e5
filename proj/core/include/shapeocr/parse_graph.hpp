#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "shapeocr/detector.hpp"
#include "shapeocr/lang_model.hpp"

namespace shapeocr {

inline constexpr int kTransitionFeatures = 12;
inline constexpr int kSmoothnessFeatures = 6;
inline constexpr int kParseFeatures = kTransitionFeatures + kSmoothnessFeatures;

using TransitionFeatureVector = std::array<double, kTransitionFeatures>;
using SmoothnessFeatureVector = std::array<double, kSmoothnessFeatures>;
using ParseFeatureVector = std::array<double, kParseFeatures>;

enum TransitionRow {
  kCharScore,
  kSizePrior,
  kBorderDistance,
  kHeightDiff,
  kYOffset,
  kColorDiff,
  kUnigram,
  kHeadUnigram,
  kTailUnigram,
  kBigram,
  kHeadBigram,
  kTailBigram,
};

enum SmoothnessRow {
  kTrigram,
  kHeadBigram3,
  kTailBigram3,
  kBottomAngle,
  kTopAngle,
  kSpacingEvenness,
};

extern const std::array<const char*, kTransitionFeatures> kTransitionNames;
extern const std::array<const char*, kSmoothnessFeatures> kSmoothnessNames;

// min(max(x, a), b)
double min_max(double x, double a, double b);

// Feature formulas, one per distinct table shape.
double probability_feature(double x);  // log(1 - min_max(x, 0, 0.99))
double size_prior_feature(double x);   // log(1 - min_max(x, 0, 4) / 5)
double border_feature(double x);       // log(min_max(x, 1, 20) / 20)
double ratio_feature(double x);        // log(min_max(x, 0.01, 1))
double color_feature(double x);        // log(min_max(x, 0.1, 10) / 10)
double angle_feature(double degrees);  // log(min_max(x, 0.01, 45) / 45)
double evenness_feature(double x);     // log(min_max(x, 0.01, 16) / 16)

struct FeatureContext {
  int image_width = 0;
  int image_height = 0;
  double median_height = 0.0;
  const CharNGramModel* lm = nullptr;  // required when use_ngrams
  bool use_ngrams = true;
};

// Null `left` stands for the start node, null `right` for the end node. Rows that do not
// apply to the edge type are 0.
TransitionFeatureVector transition_features(const CandidateDetection* left, const CandidateDetection* right,
                                            const FeatureContext& ctx);

// Null `a` is the start node, null `c` the end node. Triplets touching a pseudo-node keep
// only their head/tail n-gram row.
SmoothnessFeatureVector smoothness_features(const CandidateDetection* a, const CandidateDetection& b,
                                            const CandidateDetection* c, const FeatureContext& ctx);

// Degrees between the segments a->b and b->c; 0 for a straight line.
double turn_angle(PointF a, PointF b, PointF c);

struct FeatureWeights {
  std::array<double, kTransitionFeatures> transition{};
  std::array<double, kSmoothnessFeatures> smoothness{};

  ParseFeatureVector flat() const;
  static FeatureWeights from_flat(const ParseFeatureVector& v);
};

void write_weights(std::ostream& out, const FeatureWeights& w);
FeatureWeights read_weights(std::istream& in);
void write_weights(const std::filesystem::path& path, const FeatureWeights& w);
FeatureWeights read_weights(const std::filesystem::path& path);

inline constexpr int kStartNode = -1;
inline constexpr int kEndNode = -2;

struct ParseEdge {
  int from = kStartNode;  // candidate index or kStartNode
  int to = kEndNode;      // candidate index or kEndNode

  friend bool operator==(const ParseEdge&, const ParseEdge&) = default;
};

struct PairFeatures {
  int previous = -1;  // edge entering the shared candidate
  SmoothnessFeatureVector values{};
};

struct ParseGraph {
  std::vector<CandidateDetection> candidates;
  int image_width = 0;
  int image_height = 0;
  double max_gap_px = 0.0;
  std::vector<ParseEdge> edges;
  std::vector<std::vector<int>> in, out;  // edge indices per candidate
  std::vector<int> start_edges, end_edges;

  // Filled by attach_features; pairs[e] lists every edge that can precede e.
  std::vector<TransitionFeatureVector> transition;
  std::vector<std::vector<PairFeatures>> pairs;

  int find_edge(int from, int to) const;  // -1 when absent
  bool has_features() const { return transition.size() == edges.size() && pairs.size() == edges.size(); }
};

struct GraphParams {
  double max_gap = 2.0;       // multiples of the mean candidate height
  double max_overlap = 0.3;   // fraction of the narrower box two neighbours may share
};

// Edge c->d when d's center is strictly right of c's, the horizontal gap is at most
// max_gap and the boxes overlap by no more than max_overlap. Every candidate may start
// or end a word.
ParseGraph build_graph(std::vector<CandidateDetection> candidates, int image_width, int image_height,
                       const GraphParams& params = {});

// Wires edges and indices for a hand-made edge list (tests, tools).
ParseGraph make_graph(std::vector<CandidateDetection> candidates, int image_width, int image_height,
                      const std::vector<ParseEdge>& edges);

struct FeatureOptions {
  bool use_ngrams = true;
};

void attach_features(ParseGraph& graph, const CharNGramModel& lm, const FeatureOptions& options = {});

struct ParsePath {
  std::vector<int> nodes;  // candidate indices, left to right
  std::vector<int> edges;  // activated edges, * first and # last
  double score = 0.0;
  std::string text;
};

// Edge indices for a node sequence; throws kConstraintViolation when a hop is missing.
std::vector<int> path_edges(const ParseGraph& graph, const std::vector<int>& nodes);

// Binary activations satisfy flow consistency, one edge leaves * and values are 0/1.
bool satisfies_flow(const ParseGraph& graph, const std::vector<int>& activations);
std::vector<int> activations(const ParseGraph& graph, const ParsePath& path);

ParseFeatureVector path_features(const ParseGraph& graph, const std::vector<int>& nodes);
double score_path(const ParseGraph& graph, const FeatureWeights& weights, const std::vector<int>& nodes);
ParsePath make_path(const ParseGraph& graph, const FeatureWeights& weights, const std::vector<int>& nodes);

// Exact k-best under the second-order model; `edge_loss`, when non-empty, is added to each
// edge's transition potential. Empty when no start-to-end path exists.
std::vector<ParsePath> infer_best(const ParseGraph& graph, const FeatureWeights& weights, int k,
                                  const std::vector<double>& edge_loss = {});

// Plain-text report of the ranked paths and the per-edge feature values of the best one.
void write_parse_report(std::ostream& out, const ParseGraph& graph, const FeatureWeights& weights,
                        const std::vector<ParsePath>& paths);

}  // namespace shapeocr
