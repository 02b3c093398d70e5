#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "shapeocr/error.hpp"
#include "shapeocr/struct_learn.hpp"

using namespace shapeocr;

namespace {

CandidateDetection box(char label, double x0, double x1) {
  CandidateDetection c;
  c.label = label;
  c.score = 0.9;
  c.bbox = {x0, 10, x1, 40};
  c.height = 30;
  return c;
}

BinaryMask rect_mask(int x0, int y0, int x1, int y1, int w = 120, int h = 50) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.set(x, y);
  }
  return m;
}

struct Word {
  ParseGraph graph;
  std::vector<BinaryMask> candidate_masks;
};

// "ab" with an extra 'a' lookalike under the first letter.
Word two_letters() {
  Word w;
  w.graph = build_graph({box('a', 10, 30), box('b', 34, 54), box('a', 11, 31)}, 120, 50);
  w.candidate_masks = {rect_mask(10, 10, 30, 40), rect_mask(34, 10, 54, 40), rect_mask(11, 10, 31, 40)};
  return w;
}

}  // namespace

TEST(GoldMatch, ExactMasksGiveTheFullPath) {
  const Word w = two_letters();
  const GoldMatch m = match_gold(w.graph, w.candidate_masks, {w.candidate_masks[0], w.candidate_masks[1]}, "ab");
  ASSERT_TRUE(m.ok) << m.reason;
  EXPECT_EQ(m.path.nodes, (std::vector<int>{0, 1}));
  EXPECT_EQ(m.path.edges, path_edges(w.graph, {0, 1}));
}

TEST(GoldMatch, LowOverlapIsRejected) {
  const Word w = two_letters();
  // IoU of a 20-wide box against one shifted by 5 is 15/25 = 0.6.
  const GoldMatch m = match_gold(w.graph, w.candidate_masks, {rect_mask(15, 10, 35, 40), w.candidate_masks[1]}, "ab");
  EXPECT_FALSE(m.ok);
  EXPECT_EQ(m.failed_index, 0);
  const GoldMatch wrong_label = match_gold(w.graph, w.candidate_masks, {w.candidate_masks[0], w.candidate_masks[1]}, "ax");
  EXPECT_FALSE(wrong_label.ok);
  EXPECT_EQ(wrong_label.failed_index, 1);
}

TEST(GoldMatch, PicksTheBestOverlappingSameLabelCandidate) {
  std::mt19937_64 rng(3);
  const Word w = two_letters();
  for (int trial = 0; trial < 30; ++trial) {
    const int shift = int(rng() % 3);
    const BinaryMask gt = rect_mask(10 + shift, 10, 30 + shift, 40);
    int want = -1;
    double best = 0.8 - 1e-12;
    for (int i : {0, 2}) {
      const double iou = mask_iou(w.candidate_masks[std::size_t(i)], gt);
      if (iou > best) {
        best = iou;
        want = i;
      }
    }
    const GoldMatch m = match_gold(w.graph, w.candidate_masks, {gt, w.candidate_masks[1]}, "ab");
    ASSERT_EQ(m.ok, want >= 0);
    if (m.ok) EXPECT_EQ(m.path.nodes.front(), want) << "shift " << shift;
  }
}

TEST(Learner, HammingLossAndEdgeLossAgree) {
  std::mt19937_64 rng(8);
  const CharNGramModel lm = oracle::small_lm();
  const auto samples = oracle::separable_samples(rng, 5, lm);
  for (const TrainingSample& s : samples) {
    const std::vector<double> loss = hamming_edge_loss(s.graph, s.gold);
    for (const auto& nodes : oracle::all_paths(s.graph)) {
      const ParsePath p = make_path(s.graph, FeatureWeights{}, nodes);
      double sum = double(s.gold.edges.size());
      for (int e : p.edges) sum += loss[std::size_t(e)];
      EXPECT_DOUBLE_EQ(sum, hamming_loss(p, s.gold));
    }
    EXPECT_EQ(hamming_loss(s.gold, s.gold), 0);
  }
}

TEST(Learner, SeparableSetConvergesWithMargin) {
  std::mt19937_64 rng(1);
  const CharNGramModel lm = oracle::small_lm();
  const auto samples = oracle::separable_samples(rng, 12, lm);
  LearnerConfig cfg;
  cfg.max_epochs = 10;
  const TrainingResult r = train_maxmargin(samples, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.violations_per_epoch.size(), 10u);
  EXPECT_EQ(r.violations_per_epoch.back(), 0);
  for (const TrainingSample& s : samples) {
    EXPECT_GE(oracle::enumerated_margin(s, r.weights), -1e-6);
    EXPECT_FALSE(margin_violated(s, r.weights, 1e-9));
  }
}

TEST(Learner, SinglePathSampleLeavesWeightsAtZero) {
  TrainingSample s;
  s.graph = build_graph({box('a', 10, 30)}, 120, 50);
  attach_features(s.graph, oracle::small_lm());
  s.gold = make_path(s.graph, FeatureWeights{}, {0});
  const TrainingResult r = train_maxmargin({s});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.weights.flat(), ParseFeatureVector{});
}

TEST(Learner, DeterministicForASeed) {
  std::mt19937_64 rng(5);
  const auto samples = oracle::separable_samples(rng, 8, oracle::small_lm());
  LearnerConfig cfg;
  cfg.seed = 9;
  EXPECT_EQ(train_maxmargin(samples, cfg).weights.flat(), train_maxmargin(samples, cfg).weights.flat());
}

TEST(Learner, RejectsBadInput) {
  EXPECT_THROW(train_maxmargin({}), Error);
  std::mt19937_64 rng(5);
  auto samples = oracle::separable_samples(rng, 1, oracle::small_lm());
  LearnerConfig cfg;
  cfg.c = 0.0;
  EXPECT_THROW(train_maxmargin(samples, cfg), Error);
  samples[0].gold.edges.pop_back();
  EXPECT_THROW(train_maxmargin(samples), Error);
}
