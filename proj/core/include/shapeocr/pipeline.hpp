#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shapeocr/config.hpp"
#include "shapeocr/detector.hpp"
#include "shapeocr/font_selection.hpp"
#include "shapeocr/formats.hpp"
#include "shapeocr/lang_model.hpp"
#include "shapeocr/model_bank.hpp"
#include "shapeocr/parse_graph.hpp"
#include "shapeocr/struct_learn.hpp"
#include "shapeocr/synth.hpp"

namespace shapeocr {

// Detector settings from the config with the bank's own edge parameters, so test images are
// filtered exactly like the training glyphs.
DetectorParams detector_params(const ModelBank& bank, const PipelineConfig& config);

std::vector<CandidateDetection> detect(const ModelBank& bank, const GrayImage& image, const PipelineConfig& config);

struct ParseOutcome {
  std::optional<ParseGraph> graph;  // absent without candidates
  std::vector<ParsePath> paths;     // k-best by parser score
  std::vector<RankedWord> ranked;   // after re-ranking
  std::string word;                 // empty when nothing parses
};

// Graph, features, k-best inference and re-ranking. A null lexicon skips re-ranking.
ParseOutcome parse_detections(const std::vector<CandidateDetection>& detections, int width, int height,
                              const FeatureWeights& weights, const CharNGramModel& lm,
                              const WordFrequencyTable* lexicon, const PipelineConfig& config);

struct ReadResult {
  std::vector<CandidateDetection> detections;
  ParseOutcome parse;
};

ReadResult read_word(const GrayImage& image, const ModelBank& bank, const FeatureWeights& weights,
                     const CharNGramModel& lm, const WordFrequencyTable* lexicon, const PipelineConfig& config);

// Graph plus matched gold path; nullopt (with the reason in `match`) when matching fails.
std::optional<TrainingSample> make_training_sample(const std::vector<CandidateDetection>& detections, int width,
                                                   int height, const GroundTruth& truth, const CharNGramModel& lm,
                                                   const PipelineConfig& config, GoldMatch* match = nullptr,
                                                   const std::string& source = {});

// Ground-truth characters with a same-label detection at mask IoU >= min_iou.
int count_recalled(const std::vector<CandidateDetection>& detections, const GroundTruth& truth, double min_iou);

struct EvalEntry {
  std::string id;
  std::string gold;
  std::string predicted;
  bool match = false;
  int chars = 0;        // ground-truth characters (0 when no ground truth)
  int chars_found = 0;  // of those, recalled by the detector
};

struct EvalReport {
  std::vector<EvalEntry> entries;
  int total = 0;
  int matches = 0;
  double accuracy = 0.0;
  int chars = 0;
  int chars_found = 0;
  double recall = 0.0;
};

EvalReport summarize(std::vector<EvalEntry> entries);
void write_eval_tsv(std::ostream& out, const EvalReport& report);
std::vector<EvalEntry> read_eval_tsv(std::istream& in);
void write_eval_summary(std::ostream& out, const EvalReport& report);

// Copy of the image with the chosen path's segmentation drawn in black and, next to it, a
// plain-text geometry file listing polylines and path edges.
GrayImage render_overlay(const GrayImage& image, const ParseOutcome& parse);
void write_overlay_geometry(std::ostream& out, const ParseOutcome& parse, const FeatureWeights& weights);

GroundTruth ground_truth_of(const RenderedWord& word);

// Glyph directory laid out as `<font>/<letter>.pgm`. Files that cannot be used are skipped
// with one warning each.
struct GlyphLoad {
  GlyphSet glyphs;
  std::vector<std::string> warnings;
};

GlyphLoad load_glyph_dir(const std::filesystem::path& dir);
void write_glyph_dir(const std::filesystem::path& dir, const std::vector<FontStyle>& fonts,
                     const std::string& letters = kAlphabet, const RenderOptions& options = {});

// One model per glyph in (label, font) order; glyphs that yield no valid model are reported in
// `warnings` and left out.
ModelBank train_bank(const GlyphSet& glyphs, const BuildParams& params, std::vector<std::string>* warnings = nullptr);

// Shape models for every letter of the given built-in fonts (all when empty).
ModelBank builtin_bank(const BuildParams& params, const std::vector<std::string>& fonts = {});

}  // namespace shapeocr
