#include "shapeocr/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <variant>

#include "shapeocr/error.hpp"
#include "shapeocr/text_io.hpp"

namespace shapeocr {

namespace {

using DoubleRef = std::function<double&(PipelineConfig&)>;
using IntRef = std::function<int&(PipelineConfig&)>;
using BoolRef = std::function<bool&(PipelineConfig&)>;
using ScalesRef = std::function<std::vector<int>&(PipelineConfig&)>;
using SeedRef = std::function<std::uint64_t&(PipelineConfig&)>;

struct Entry {
  ConfigKey key;
  std::variant<DoubleRef, IntRef, BoolRef, ScalesRef, SeedRef> ref;
};

#define SHAPEOCR_FIELD(type, expr) type([](PipelineConfig& c) -> decltype(auto) { return (expr); })

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"edges.sigma", "Gaussian sigma of the oriented edge filters"}, SHAPEOCR_FIELD(DoubleRef, c.build.edges.sigma)},
      {{"edges.kernel_radius", "filter half-size in pixels"}, SHAPEOCR_FIELD(IntRef, c.build.edges.kernel_radius)},
      {{"edges.threshold_fraction", "edge threshold as a fraction of the maximum filter response"},
       SHAPEOCR_FIELD(DoubleRef, c.build.edges.threshold_fraction)},
      {{"model.suppression_radius", "landmark suppression radius in pixels"},
       SHAPEOCR_FIELD(IntRef, c.build.suppression_radius)},
      {{"model.perturbation_radius", "constraint slack between touching landmarks"},
       SHAPEOCR_FIELD(IntRef, c.build.perturbation_radius)},
      {{"model.radius_per_pixel", "extra constraint slack per pixel of separation"},
       SHAPEOCR_FIELD(DoubleRef, c.build.radius_per_pixel)},
      {{"model.gamma", "distant-constraint rule factor"}, SHAPEOCR_FIELD(DoubleRef, c.build.gamma)},
      {{"model.window", "training pool half-width"}, SHAPEOCR_FIELD(IntRef, c.build.window)},
      {{"model.normalized_height", "glyph em size the models are built at"},
       SHAPEOCR_FIELD(DoubleRef, c.build.normalized_height)},
      {{"detect.orientation_tolerance", "orientation bins either side that still match"},
       SHAPEOCR_FIELD(IntRef, c.detect.orientation_tolerance)},
      {{"detect.forward_min_score", "minimum forward-pass score for an anchor"},
       SHAPEOCR_FIELD(DoubleRef, c.detect.forward_min_score)},
      {{"detect.theta", "minimum backtrace score of a detection"}, SHAPEOCR_FIELD(DoubleRef, c.detect.theta_backtrace)},
      {{"detect.nms_radius_fraction", "anchor suppression radius as a fraction of model height"},
       SHAPEOCR_FIELD(DoubleRef, c.detect.nms_radius_fraction)},
      {{"detect.anchors_per_model", "anchors backtraced per model and scale"},
       SHAPEOCR_FIELD(IntRef, c.detect.anchors_per_model)},
      {{"detect.root_slack", "root search half-width around an anchor"}, SHAPEOCR_FIELD(IntRef, c.detect.root_slack)},
      {{"detect.window_margin", "per-landmark backtrace window half-width"},
       SHAPEOCR_FIELD(IntRef, c.detect.window_margin)},
      {{"detect.fallback_slack_cap", "cap on the fallback search half-width"},
       SHAPEOCR_FIELD(IntRef, c.detect.fallback_slack_cap)},
      {{"detect.bp_iterations", "loopy belief propagation iteration cap"}, SHAPEOCR_FIELD(IntRef, c.detect.bp_iterations)},
      {{"detect.bp_damping", "message damping in [0, 1)"}, SHAPEOCR_FIELD(DoubleRef, c.detect.bp_damping)},
      {{"detect.exact_node_budget", "branch-and-bound node budget per backtrace"},
       SHAPEOCR_FIELD(IntRef, c.detect.exact_node_budget)},
      {{"detect.min_height_ratio", "smallest accepted detection size relative to its model"},
       SHAPEOCR_FIELD(DoubleRef, c.detect.min_height_ratio)},
      {{"detect.max_height_ratio", "largest accepted detection size relative to its model"},
       SHAPEOCR_FIELD(DoubleRef, c.detect.max_height_ratio)},
      {{"detect.scales", "comma-separated integer upsampling factors"}, SHAPEOCR_FIELD(ScalesRef, c.detect.scales)},
      {{"detect.merge_iou", "box IoU above which same-label detections merge"},
       SHAPEOCR_FIELD(DoubleRef, c.detect.merge_iou)},
      {{"detect.open_stroke_width", "mask width drawn along open contours"},
       SHAPEOCR_FIELD(DoubleRef, c.detect.open_stroke_width)},
      {{"threads", "worker threads, 0 = all cores"}, SHAPEOCR_FIELD(IntRef, c.detect.threads)},
      {{"graph.max_gap", "largest gap between neighbours, in mean candidate heights"},
       SHAPEOCR_FIELD(DoubleRef, c.graph.max_gap)},
      {{"graph.max_overlap", "largest overlap between neighbours, as a fraction of the narrower box"},
       SHAPEOCR_FIELD(DoubleRef, c.graph.max_overlap)},
      {{"lm.alpha", "additive smoothing of the character n-grams"}, SHAPEOCR_FIELD(DoubleRef, c.lm_alpha)},
      {{"lm.use_ngrams", "include the n-gram parsing features"}, SHAPEOCR_FIELD(BoolRef, c.use_ngrams)},
      {{"rerank.lambda", "weight of the log word frequency in re-ranking"}, SHAPEOCR_FIELD(DoubleRef, c.rerank_lambda)},
      {{"rerank.floor", "frequency assigned to unknown words"}, SHAPEOCR_FIELD(DoubleRef, c.frequency_floor)},
      {{"parse.k", "parses kept for re-ranking"}, SHAPEOCR_FIELD(IntRef, c.k_best)},
      {{"match.min_iou", "mask IoU for a detection to count as a character"}, SHAPEOCR_FIELD(DoubleRef, c.match_iou)},
      {{"learn.c", "perceptron step scale"}, SHAPEOCR_FIELD(DoubleRef, c.learn.c)},
      {{"learn.max_epochs", "training epochs cap"}, SHAPEOCR_FIELD(IntRef, c.learn.max_epochs)},
      {{"learn.tolerance", "margin slack when counting violations"}, SHAPEOCR_FIELD(DoubleRef, c.learn.tolerance)},
      {{"learn.seed", "sample shuffling seed"}, SHAPEOCR_FIELD(SeedRef, c.learn.seed)},
      {{"learn.shuffle", "shuffle samples every epoch"}, SHAPEOCR_FIELD(BoolRef, c.learn.shuffle)},
      {{"fonts.threshold", "compatibility above which one font represents another"},
       SHAPEOCR_FIELD(DoubleRef, c.font_threshold)},
      {{"fonts.coverage", "fraction of fonts that must be represented"}, SHAPEOCR_FIELD(DoubleRef, c.font_coverage)},
  };
  return table;
}

#undef SHAPEOCR_FIELD

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : entries()) {
    if (e.key.name == key) return e;
  }
  fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorKind::kConfig, "config key '" + key + "': cannot parse '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) fail(ErrorKind::kConfig, "config key '" + key + "' must be " + rule);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const Entry& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& c, const std::string& key, const std::string& raw) {
  const Entry& e = find_entry(key);
  const std::string value = trim(raw);
  if (auto* r = std::get_if<DoubleRef>(&e.ref)) {
    double v = 0.0;
    if (!parse_double(value, v) || !std::isfinite(v)) bad_value(key, value);
    (*r)(c) = v;
  } else if (auto* r = std::get_if<IntRef>(&e.ref)) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(value, &used);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
    if (used != value.size()) bad_value(key, value);
    (*r)(c) = v;
  } else if (auto* r = std::get_if<SeedRef>(&e.ref)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(value, &used);
    } catch (const std::exception&) {
      bad_value(key, value);
    }
    if (used != value.size() || value.front() == '-') bad_value(key, value);
    (*r)(c) = v;
  } else if (auto* r = std::get_if<BoolRef>(&e.ref)) {
    if (value == "true" || value == "1" || value == "yes") {
      (*r)(c) = true;
    } else if (value == "false" || value == "0" || value == "no") {
      (*r)(c) = false;
    } else {
      bad_value(key, value);
    }
  } else if (auto* r = std::get_if<ScalesRef>(&e.ref)) {
    std::vector<int> scales;
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(item, &used);
      } catch (const std::exception&) {
        bad_value(key, value);
      }
      if (used != item.size()) bad_value(key, value);
      scales.push_back(v);
    }
    (*r)(c) = scales;
  }
}

std::string get_config_value(const PipelineConfig& config, const std::string& key) {
  const Entry& e = find_entry(key);
  PipelineConfig& c = const_cast<PipelineConfig&>(config);
  if (auto* r = std::get_if<DoubleRef>(&e.ref)) return format_double((*r)(c));
  if (auto* r = std::get_if<IntRef>(&e.ref)) return std::to_string((*r)(c));
  if (auto* r = std::get_if<SeedRef>(&e.ref)) return std::to_string((*r)(c));
  if (auto* r = std::get_if<BoolRef>(&e.ref)) return (*r)(c) ? "true" : "false";
  const std::vector<int>& scales = std::get<ScalesRef>(e.ref)(c);
  std::string out;
  for (std::size_t i = 0; i < scales.size(); ++i) out += (i ? "," : "") + std::to_string(scales[i]);
  return out;
}

void validate_config(const PipelineConfig& c) {
  check(c.build.edges.sigma > 0.0, "edges.sigma", "> 0");
  check(c.build.edges.kernel_radius >= 1 && c.build.edges.kernel_radius <= 32, "edges.kernel_radius", "in [1, 32]");
  check(c.build.edges.threshold_fraction > 0.0 && c.build.edges.threshold_fraction < 1.0, "edges.threshold_fraction",
        "in (0, 1)");
  check(c.build.suppression_radius >= 1, "model.suppression_radius", ">= 1");
  check(c.build.perturbation_radius >= 0, "model.perturbation_radius", ">= 0");
  check(c.build.radius_per_pixel >= 0.0, "model.radius_per_pixel", ">= 0");
  check(c.build.gamma >= 1.0, "model.gamma", ">= 1");
  check(c.build.window >= 0, "model.window", ">= 0");
  check(c.build.normalized_height > 0.0, "model.normalized_height", "> 0");
  check(c.detect.orientation_tolerance >= 0 && c.detect.orientation_tolerance <= 8, "detect.orientation_tolerance",
        "in [0, 8]");
  check(c.detect.forward_min_score >= 0.0 && c.detect.forward_min_score <= 1.0, "detect.forward_min_score",
        "in [0, 1]");
  check(c.detect.theta_backtrace >= 0.0 && c.detect.theta_backtrace <= 1.0, "detect.theta", "in [0, 1]");
  check(c.detect.nms_radius_fraction > 0.0, "detect.nms_radius_fraction", "> 0");
  check(c.detect.anchors_per_model >= 1, "detect.anchors_per_model", ">= 1");
  check(c.detect.root_slack >= 0, "detect.root_slack", ">= 0");
  check(c.detect.window_margin >= 0, "detect.window_margin", ">= 0");
  check(c.detect.fallback_slack_cap >= 0, "detect.fallback_slack_cap", ">= 0");
  check(c.detect.bp_iterations >= 1, "detect.bp_iterations", ">= 1");
  check(c.detect.bp_damping >= 0.0 && c.detect.bp_damping < 1.0, "detect.bp_damping", "in [0, 1)");
  check(c.detect.exact_node_budget >= 0, "detect.exact_node_budget", ">= 0");
  check(c.detect.min_height_ratio > 0.0, "detect.min_height_ratio", "> 0");
  check(c.detect.max_height_ratio >= c.detect.min_height_ratio, "detect.max_height_ratio", ">= detect.min_height_ratio");
  check(!c.detect.scales.empty(), "detect.scales", "a non-empty list");
  for (int s : c.detect.scales) check(s >= 1 && s <= 8, "detect.scales", "a list of integers in [1, 8]");
  check(c.detect.merge_iou > 0.0 && c.detect.merge_iou <= 1.0, "detect.merge_iou", "in (0, 1]");
  check(c.detect.open_stroke_width > 0.0, "detect.open_stroke_width", "> 0");
  check(c.detect.threads >= 0, "threads", ">= 0");
  check(c.graph.max_gap >= 0.0, "graph.max_gap", ">= 0");
  check(c.graph.max_overlap >= 0.0 && c.graph.max_overlap <= 1.0, "graph.max_overlap", "in [0, 1]");
  check(c.lm_alpha > 0.0, "lm.alpha", "> 0");
  check(c.rerank_lambda >= 0.0, "rerank.lambda", ">= 0");
  check(c.frequency_floor > 0.0 && c.frequency_floor < 1.0, "rerank.floor", "in (0, 1)");
  check(c.k_best >= 1, "parse.k", ">= 1");
  check(c.match_iou > 0.0 && c.match_iou <= 1.0, "match.min_iou", "in (0, 1]");
  check(c.learn.c > 0.0, "learn.c", "> 0");
  check(c.learn.max_epochs >= 1, "learn.max_epochs", ">= 1");
  check(c.learn.tolerance >= 0.0, "learn.tolerance", ">= 0");
  check(c.font_threshold >= 0.0, "fonts.threshold", ">= 0");
  check(c.font_coverage > 0.0 && c.font_coverage <= 1.0, "fonts.coverage", "in (0, 1]");
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfig, "config line " + std::to_string(number) + ": expected `key = value`");
    }
    set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  validate_config(base);
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

void apply_overrides(PipelineConfig& config, const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kConfig, "override '" + a + "' is not key=value");
    set_config_value(config, trim(a.substr(0, eq)), a.substr(eq + 1));
  }
  validate_config(config);
}

void write_config(std::ostream& out, const PipelineConfig& config) {
  for (const ConfigKey& k : config_keys()) {
    out << "# " << k.help << '\n' << k.name << " = " << get_config_value(config, k.name) << '\n';
  }
}

}  // namespace shapeocr
