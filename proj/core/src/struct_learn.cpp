#include "shapeocr/struct_learn.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "shapeocr/error.hpp"

namespace shapeocr {

GoldMatch match_gold(const ParseGraph& graph, const std::vector<BinaryMask>& candidate_masks,
                     const std::vector<BinaryMask>& gt_masks, const std::string& labels, double min_iou) {
  if (gt_masks.size() != labels.size()) fail(ErrorKind::kInvalidInput, "one ground-truth mask per label required");
  if (candidate_masks.size() != graph.candidates.size()) {
    fail(ErrorKind::kInvalidInput, "one mask per candidate required");
  }
  GoldMatch m;
  if (labels.empty()) {
    m.reason = "empty ground truth";
    return m;
  }
  std::vector<int> nodes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t c = 0; c < graph.candidates.size(); ++c) {
      if (graph.candidates[c].label != labels[i]) continue;
      const double iou = mask_iou(candidate_masks[c], gt_masks[i]);
      if (iou >= min_iou && iou > best_iou) {
        best_iou = iou;
        best = int(c);
      }
    }
    if (best < 0) {
      m.failed_index = int(i);
      m.reason = std::string("no candidate for '") + labels[i] + "' at IoU >= threshold";
      return m;
    }
    nodes.push_back(best);
  }
  int prev = kStartNode;
  for (std::size_t i = 0; i <= nodes.size(); ++i) {
    const int next = i < nodes.size() ? nodes[i] : kEndNode;
    if (graph.find_edge(prev, next) < 0) {
      m.failed_index = int(std::min(i, nodes.size() - 1));
      m.reason = "matched candidates are not connected in the parse graph";
      return m;
    }
    prev = next;
  }
  m.ok = true;
  m.path.nodes = nodes;
  m.path.edges = path_edges(graph, nodes);
  for (int v : nodes) m.path.text.push_back(graph.candidates[std::size_t(v)].label);
  return m;
}

GoldMatch match_gold(const ParseGraph& graph, const std::vector<BinaryMask>& gt_masks, const std::string& labels,
                     double min_iou) {
  std::vector<BinaryMask> masks;
  masks.reserve(graph.candidates.size());
  for (const CandidateDetection& c : graph.candidates) {
    masks.push_back(detection_mask(c, graph.image_width, graph.image_height));
  }
  return match_gold(graph, masks, gt_masks, labels, min_iou);
}

int hamming_loss(const ParsePath& a, const ParsePath& b) {
  const std::set<int> sa(a.edges.begin(), a.edges.end());
  const std::set<int> sb(b.edges.begin(), b.edges.end());
  int common = 0;
  for (int e : sa) common += int(sb.count(e));
  return int(sa.size() + sb.size()) - 2 * common;
}

std::vector<double> hamming_edge_loss(const ParseGraph& graph, const ParsePath& gold) {
  std::vector<double> loss(graph.edges.size(), 1.0);
  for (int e : gold.edges) loss[std::size_t(e)] = -1.0;
  return loss;
}

ParsePath loss_augmented_best(const ParseGraph& graph, const FeatureWeights& weights, const ParsePath& gold,
                              double loss_weight) {
  std::vector<double> loss = hamming_edge_loss(graph, gold);
  for (double& l : loss) l *= loss_weight;
  std::vector<ParsePath> best = infer_best(graph, weights, 1, loss);
  if (best.empty()) fail(ErrorKind::kEmptyGraph, "parse graph has no start-to-end path");
  ParsePath p = best.front();
  p.score = score_path(graph, weights, p.nodes);
  return p;
}

bool margin_violated(const TrainingSample& s, const FeatureWeights& w, double tolerance) {
  const ParsePath y = loss_augmented_best(s.graph, w, s.gold);
  if (y.edges == s.gold.edges) return false;
  const double gold = score_path(s.graph, w, s.gold.nodes);
  return y.score + hamming_loss(y, s.gold) > gold + tolerance;
}

TrainingResult train_maxmargin(const std::vector<TrainingSample>& samples, const LearnerConfig& cfg) {
  if (samples.empty()) fail(ErrorKind::kInvalidInput, "no valid training samples");
  if (!(cfg.c > 0.0)) fail(ErrorKind::kInvalidInput, "learner C must be > 0");
  if (cfg.max_epochs < 1) fail(ErrorKind::kInvalidInput, "learner needs at least one epoch");

  std::vector<ParseFeatureVector> gold_features;
  for (const TrainingSample& s : samples) {
    if (s.gold.edges != path_edges(s.graph, s.gold.nodes)) {
      fail(ErrorKind::kInvalidInput, "gold path of " + s.source + " is inconsistent with its graph");
    }
    gold_features.push_back(path_features(s.graph, s.gold.nodes));
  }

  ParseFeatureVector w{}, sum{};
  long long steps = 0;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  TrainingResult result;
  auto averaged = [&] {
    ParseFeatureVector a{};
    for (int i = 0; i < kParseFeatures; ++i) a[std::size_t(i)] = steps > 0 ? sum[std::size_t(i)] / double(steps) : 0.0;
    return FeatureWeights::from_flat(a);
  };

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const TrainingSample& s = samples[idx];
      const ParsePath y = loss_augmented_best(s.graph, FeatureWeights::from_flat(w), s.gold);
      if (y.edges != s.gold.edges) {
        const ParseFeatureVector fy = path_features(s.graph, y.nodes);
        for (int i = 0; i < kParseFeatures; ++i) {
          w[std::size_t(i)] += cfg.c * (gold_features[idx][std::size_t(i)] - fy[std::size_t(i)]);
        }
      }
      for (int i = 0; i < kParseFeatures; ++i) sum[std::size_t(i)] += w[std::size_t(i)];
      ++steps;
    }
    const FeatureWeights avg = averaged();
    int violations = 0;
    for (const TrainingSample& s : samples) violations += margin_violated(s, avg, cfg.tolerance) ? 1 : 0;
    result.violations_per_epoch.push_back(violations);
    if (violations == 0) {
      result.converged = true;
      break;
    }
  }
  result.weights = averaged();
  return result;
}

}  // namespace shapeocr
