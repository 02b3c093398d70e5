#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "shapeocr/detector.hpp"
#include "shapeocr/parse_graph.hpp"
#include "shapeocr/shape_model.hpp"
#include "shapeocr/struct_learn.hpp"

namespace shapeocr {

struct PipelineConfig {
  BuildParams build;
  DetectorParams detect;
  GraphParams graph;
  LearnerConfig learn;
  double lm_alpha = 0.01;
  bool use_ngrams = true;
  double rerank_lambda = 1.0;
  double frequency_floor = 1e-9;
  int k_best = 10;
  double match_iou = 0.8;
  double font_threshold = 0.8;
  double font_coverage = 0.9;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// Every recognised key with a one-line description, in file order.
const std::vector<ConfigKey>& config_keys();

// Sets one key from text; throws kConfig naming the key on unknown keys or bad values.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& config, const std::string& key);

// Range checks across all fields; throws kConfig.
void validate_config(const PipelineConfig& config);

// `key = value` lines, '#' comments; applied on top of `base`, then validated.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

// Applies `key=value` overrides, then validates.
void apply_overrides(PipelineConfig& config, const std::vector<std::string>& assignments);

void write_config(std::ostream& out, const PipelineConfig& config);

}  // namespace shapeocr
