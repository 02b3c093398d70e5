#include <benchmark/benchmark.h>

#include <random>

#include "shapeocr/detector.hpp"
#include "shapeocr/parse_graph.hpp"
#include "shapeocr/pipeline.hpp"
#include "shapeocr/synth.hpp"

using namespace shapeocr;

namespace {

const CharacterModel& model_R() {
  static const CharacterModel m =
      build_model_from_glyph('R', "sans", render_glyph('R', builtin_font("sans")), BuildParams{});
  return m;
}

const GrayImage& word_image() {
  static const GrayImage img = render_word("Rover", builtin_font("sans")).image;
  return img;
}

void BM_EdgeDetection(benchmark::State& state) {
  const GrayImage& img = word_image();
  for (auto _ : state) benchmark::DoNotOptimize(detect_edges(img));
  state.SetLabel(std::to_string(img.width()) + "x" + std::to_string(img.height()));
}
BENCHMARK(BM_EdgeDetection)->Unit(benchmark::kMillisecond);

void BM_ForwardPass(benchmark::State& state) {
  const CharacterModel& m = model_R();
  const SpanningTreeModel tree = to_spanning_tree(m);
  const EvidenceMaps ev(detect_edges(word_image()), 1);
  for (auto _ : state) benchmark::DoNotOptimize(TreeForward(m, tree, ev).heatmap());
  state.SetLabel(std::to_string(m.pools.size()) + " pools");
}
BENCHMARK(BM_ForwardPass)->Unit(benchmark::kMillisecond);

void BM_Backtrace(benchmark::State& state) {
  const CharacterModel& m = model_R();
  const SpanningTreeModel tree = to_spanning_tree(m);
  const EvidenceMaps ev(detect_edges(word_image()), 1);
  const TreeForward fwd(m, tree, ev);
  const DetectorParams params;
  const int radius = int(params.nms_radius_fraction * m.normalized_height);
  const auto anchors = nonmax_suppress(fwd.heatmap(), radius, params.forward_min_score, 5);
  for (auto _ : state) {
    for (Point a : anchors) benchmark::DoNotOptimize(backtrace_raw(m, tree, ev, &fwd, a, params));
  }
  state.SetLabel(std::to_string(anchors.size()) + " anchors");
}
BENCHMARK(BM_Backtrace)->Unit(benchmark::kMillisecond);

void BM_ParseInference(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CandidateDetection> cs;
  const int n = int(state.range(0));
  for (int i = 0; i < n; ++i) {
    CandidateDetection c;
    c.label = kAlphabet[rng() % 52];
    c.score = u(rng);
    const double x = 400.0 * u(rng);
    c.bbox = {x, 10.0, x + 20.0 + 10.0 * u(rng), 45.0};
    c.height = 35.0;
    cs.push_back(c);
  }
  ParseGraph g = build_graph(cs, 460, 60);
  std::vector<std::string> corpus{"the", "and", "reading", "letters", "shape"};
  attach_features(g, train_char_ngrams(corpus, 0.01));
  FeatureWeights w;
  for (double& v : w.transition) v = u(rng);
  for (double& v : w.smoothness) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(infer_best(g, w, int(state.range(1))));
  state.SetLabel(std::to_string(g.edges.size()) + " edges");
}
BENCHMARK(BM_ParseInference)->Args({40, 1})->Args({40, 10})->Args({120, 10})->Unit(benchmark::kMillisecond);

void BM_ReadWord(benchmark::State& state) {
  const ModelBank bank = builtin_bank(BuildParams{}, {"sans"});
  PipelineConfig cfg;
  cfg.detect.threads = 1;
  const GrayImage img = render_word("ab", builtin_font("sans")).image;
  for (auto _ : state) benchmark::DoNotOptimize(detect(bank, img, cfg));
}
BENCHMARK(BM_ReadWord)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
