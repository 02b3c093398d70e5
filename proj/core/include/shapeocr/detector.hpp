#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shapeocr/edges.hpp"
#include "shapeocr/grid.hpp"
#include "shapeocr/image.hpp"
#include "shapeocr/mask.hpp"
#include "shapeocr/model_bank.hpp"
#include "shapeocr/shape_model.hpp"

namespace shapeocr {

struct DetectorParams {
  EdgeParams edges;
  int orientation_tolerance = 1;     // bins either side counted as a match
  double forward_min_score = 0.6;
  double theta_backtrace = 0.7;
  double nms_radius_fraction = 0.25;  // of the model's normalized height
  int anchors_per_model = 5;
  int root_slack = 2;
  int window_margin = 3;              // backtrace search around the tree solution
  int fallback_slack_cap = 12;
  int bp_iterations = 15;
  double bp_damping = 0.5;
  int exact_node_budget = 300;
  double min_height_ratio = 0.65;     // accepted size of a detection relative to its model
  double max_height_ratio = 1.5;
  std::vector<int> scales = {1, 2};
  double merge_iou = 0.5;
  double open_stroke_width = 4.0;     // mask width for open contours
  int threads = 0;                    // 0 = hardware concurrency
};

// Minimum spanning tree of the constraint graph, oriented away from the root.
struct SpanningTreeModel {
  int root = 0;
  std::vector<std::pair<int, int>> edges;  // (min, max) pool indices
  std::vector<int> parent;                 // -1 for the root
  std::vector<int> radius;                 // constraint radius to the parent
  std::vector<std::vector<int>> children;
  std::vector<int> order;                  // breadth-first from the root
};

SpanningTreeModel to_spanning_tree(const CharacterModel& model);

// Per-orientation unary evidence: 1 where an active edge lies within the bin tolerance.
class EvidenceMaps {
 public:
  EvidenceMaps() = default;
  EvidenceMaps(const OrientedEdgeMap& edges, int tolerance);

  int width() const { return width_; }
  int height() const { return height_; }
  Rect rect() const { return {0, 0, width_, height_}; }
  const Grid<std::int16_t>& map(int orientation) const { return maps_[std::size_t(orientation)]; }
  bool match(int orientation, Point p) const {
    return rect().contains(p) && maps_[std::size_t(orientation)].at(p) != 0;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Grid<std::int16_t>> maps_;
};

struct ActivationHeatmap {
  int width = 0;
  int height = 0;
  std::vector<float> score;  // row-major, in [0, 1]

  float at(int x, int y) const { return score[std::size_t(y) * width + x]; }
};

// Image-wide max-product pass over the spanning tree, leaves to root. Keeps the upward
// beliefs so a tree configuration can be read back for any root position.
class TreeForward {
 public:
  TreeForward(const CharacterModel& model, const SpanningTreeModel& tree, const EvidenceMaps& evidence);

  ActivationHeatmap heatmap() const;
  int root_count(Point root) const;  // matched pools of the best tree configuration, -1 if none
  // Best tree configuration with the root fixed; empty when infeasible.
  std::vector<Point> decode(Point root) const;

 private:
  const CharacterModel& model_;
  const SpanningTreeModel& tree_;
  Rect rect_;
  std::vector<Grid<std::int16_t>> belief_;
};

ActivationHeatmap forward_pass(const CharacterModel& model, const SpanningTreeModel& tree,
                               const OrientedEdgeMap& edges, int orientation_tolerance = 1);

// Greedy strongest-first selection with a suppression disk; ties broken row-major.
std::vector<Point> nonmax_suppress(const ActivationHeatmap& heatmap, int radius, double min_score,
                                   std::size_t max_count = SIZE_MAX);

// MAP configuration of the full constraint graph with every pool confined to a rectangle.
struct MapResult {
  bool feasible = false;
  std::vector<Point> positions;
  int matched = 0;
  bool converged = false;  // loopy BP reached a fixed point before the iteration cap
  bool exact = false;      // branch-and-bound proved optimality within its node budget
  bool pruned = false;     // upper bound fell below min_matched; positions are empty
  int iterations = 0;
};

struct MapOptions {
  int bp_iterations = 30;
  double bp_damping = 0.5;
  int exact_node_budget = 20000;
  int min_matched = 0;           // stop early when fewer pools can possibly match
  std::vector<Point> preferred;  // tie-break target per pool (optional)
};

MapResult map_in_domains(const CharacterModel& model, const EvidenceMaps& evidence,
                         const std::vector<Rect>& domains, const MapOptions& options);

// Anchor-relative windows: pool p may sit within `window` of anchor + (m_p - m_root).
std::vector<Rect> anchored_domains(const CharacterModel& model, int root, Point anchor, int window,
                                   const Rect& image);

// Exact best tree-relaxed matched count over anchored windows; -1 if infeasible.
int tree_score_in_domains(const CharacterModel& model, const SpanningTreeModel& tree,
                          const EvidenceMaps& evidence, const std::vector<Rect>& domains);

struct CandidateDetection {
  char label = '?';
  std::string font_id;
  int model_index = -1;
  double score = 0.0;
  PointF anchor;
  int scale = 1;
  std::vector<PointF> positions;
  std::vector<Polyline> segmentation;
  BoxF bbox;
  double height = 0.0;      // estimated em size in pixels
  double mean_color = 0.0;
  double stroke_width = 0.0;
  bool low_confidence = false;
  bool exact = false;
};

// Every position satisfies every lateral constraint of the model, in the model's scale.
bool satisfies_constraints(const CharacterModel& model, const std::vector<Point>& positions);

struct BacktraceResult {
  MapResult map;
  double score = 0.0;
  Point root;
};

// Clamped loopy MAP around an anchor. `forward` supplies the tree solution used to place
// the search windows; pass nullptr to search around the undeformed model. Anchors that
// provably cannot reach `min_score` are abandoned early with score 0.
BacktraceResult backtrace_raw(const CharacterModel& model, const SpanningTreeModel& tree,
                              const EvidenceMaps& evidence, const TreeForward* forward,
                              Point anchor, const DetectorParams& params, double min_score = 0.0);

std::optional<CandidateDetection> backtrace(const CharacterModel& model, const SpanningTreeModel& tree,
                                            const EvidenceMaps& evidence, const TreeForward* forward,
                                            Point anchor, const DetectorParams& params);

BinaryMask detection_mask(const CandidateDetection& det, int width, int height);

// All candidates of one model on one (already rescaled) image; coordinates in that image.
std::vector<CandidateDetection> detect_model(const CharacterModel& model, int model_index,
                                             const SpanningTreeModel& tree, const EvidenceMaps& evidence,
                                             const DetectorParams& params);

std::vector<CandidateDetection> detect_multiscale(const ModelBank& bank, const GrayImage& image,
                                                  const DetectorParams& params);

// Matched-landmark fraction of `model` on `glyph` at its best anchor.
double compatibility_score(const CharacterModel& model, const GrayImage& glyph,
                           const DetectorParams& params = {});

}  // namespace shapeocr
