#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapeocr/mask.hpp"
#include "shapeocr/parse_graph.hpp"

namespace shapeocr {

struct GoldMatch {
  bool ok = false;
  ParsePath path;            // valid when ok
  int failed_index = -1;     // ground-truth character that could not be matched or connected
  std::string reason;
};

// Each ground-truth character takes the same-label candidate with the highest mask IoU
// (ties to the lower index) provided IoU >= min_iou; the chain must be a graph path.
GoldMatch match_gold(const ParseGraph& graph, const std::vector<BinaryMask>& candidate_masks,
                     const std::vector<BinaryMask>& gt_masks, const std::string& labels, double min_iou = 0.8);

// Same, rasterizing candidate masks from their segmentations.
GoldMatch match_gold(const ParseGraph& graph, const std::vector<BinaryMask>& gt_masks, const std::string& labels,
                     double min_iou = 0.8);

struct TrainingSample {
  ParseGraph graph;  // features attached
  ParsePath gold;
  std::string source;
};

struct LearnerConfig {
  double c = 1.0;            // update step scale
  int max_epochs = 50;
  double tolerance = 1e-9;   // margin slack when counting violations
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct TrainingResult {
  FeatureWeights weights;                 // averaged
  std::vector<int> violations_per_epoch;  // evaluated with the averaged weights
  bool converged = false;
};

// Symmetric difference of the activated edge sets.
int hamming_loss(const ParsePath& a, const ParsePath& b);

// Per-edge loss turning the Hamming distance to `gold` into additive edge potentials
// (up to the constant |gold|): +1 off the gold path, -1 on it.
std::vector<double> hamming_edge_loss(const ParseGraph& graph, const ParsePath& gold);

// Best path under score + Hamming loss to gold.
ParsePath loss_augmented_best(const ParseGraph& graph, const FeatureWeights& weights, const ParsePath& gold,
                              double loss_weight = 1.0);

// Whether the loss-augmented argmax differs from gold by more than the tolerance.
bool margin_violated(const TrainingSample& sample, const FeatureWeights& weights, double tolerance);

TrainingResult train_maxmargin(const std::vector<TrainingSample>& samples, const LearnerConfig& config = {});

}  // namespace shapeocr
