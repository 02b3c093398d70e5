#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shapeocr/error.hpp"
#include "shapeocr/parallel.hpp"
#include "shapeocr/pipeline.hpp"
#include "shapeocr/text_io.hpp"

namespace fs = std::filesystem;
using namespace shapeocr;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kDataError = 3,
  kEmptyResult = 4,
  kPartial = 5,
};

constexpr const char* kConfigEnv = "SHAPEOCR_CONFIG";

void warn(const std::string& msg) { std::cerr << "shapeocr: warning: " << msg << '\n'; }
void note(const std::string& msg) { std::cerr << "shapeocr: " << msg << '\n'; }

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;

  PipelineConfig load() const {
    PipelineConfig cfg;
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv(kConfigEnv); env != nullptr) path = env;
    }
    if (!path.empty()) {
      if (!fs::exists(path)) fail(ErrorKind::kConfig, "config file not found: " + path);
      cfg = load_config(path);
    }
    apply_overrides(cfg, overrides);
    return cfg;
  }
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, std::string("config file (default: $") + kConfigEnv + ")");
  cmd->add_option("--set", common.overrides, "override a config key, KEY=VALUE (repeatable)")
      ->allow_extra_args(false);
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  fn(out);
  if (!out) fail(ErrorKind::kIo, "error writing " + path.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string t; std::getline(in, t, ',');) {
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<FontStyle> pick_fonts(const std::string& list) {
  if (list.empty()) return builtin_fonts();
  std::vector<FontStyle> out;
  for (const std::string& name : split_list(list)) out.push_back(builtin_font(name));
  return out;
}

// ---- render ----------------------------------------------------------------------------

struct RenderArgs {
  std::string text;
  std::string font = "sans";
  std::string out;
  std::string truth;
  std::string glyph_dir;
  std::string fonts;
  std::string letters = kAlphabet;
  std::string words_file;
  std::string out_dir;
  double em_px = 48.0;
  double salt_pepper = 0.0;
  double gaussian = 0.0;
  std::uint64_t seed = 1;
};

GrayImage degrade(GrayImage image, const RenderArgs& a, std::uint64_t seed) {
  if (a.salt_pepper > 0.0) image = add_salt_pepper(image, a.salt_pepper, seed);
  if (a.gaussian > 0.0) image = add_gaussian_noise(image, a.gaussian, seed + 1);
  return image;
}

int cmd_render(const RenderArgs& a) {
  RenderOptions ro;
  ro.em_px = a.em_px;
  int modes = int(!a.text.empty()) + int(!a.glyph_dir.empty()) + int(!a.words_file.empty());
  if (modes != 1) fail(ErrorKind::kInvalidInput, "render needs exactly one of --text, --glyphs, --words");
  if (!a.glyph_dir.empty()) {
    write_glyph_dir(a.glyph_dir, pick_fonts(a.fonts), a.letters, ro);
    return kOk;
  }
  if (!a.text.empty()) {
    if (a.out.empty()) fail(ErrorKind::kInvalidInput, "--text needs --out");
    RenderedWord w = render_word(a.text, builtin_font(a.font), ro);
    write_pgm(a.out, degrade(w.image, a, a.seed));
    if (!a.truth.empty()) write_ground_truth(a.truth, ground_truth_of(w));
    return kOk;
  }
  if (a.out_dir.empty()) fail(ErrorKind::kInvalidInput, "--words needs --out-dir");
  std::ifstream in(a.words_file);
  if (!in) fail(ErrorKind::kIo, "cannot read " + a.words_file);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  std::vector<ManifestEntry> manifest;
  std::uint64_t index = 0;
  for (const FontStyle& f : pick_fonts(a.fonts)) {
    for (const std::string& w : words) {
      const std::string stem = f.name + "_" + w;
      RenderedWord r = render_word(w, f, ro);
      ManifestEntry e;
      e.image = dir / (stem + ".pgm");
      e.word = w;
      e.ground_truth = dir / (stem + ".gt");
      write_pgm(e.image, degrade(r.image, a, a.seed + 2 * index++));
      write_ground_truth(e.ground_truth, ground_truth_of(r));
      manifest.push_back(std::move(e));
    }
  }
  write_file(dir / "manifest.txt", [&](std::ostream& out) { write_manifest(out, manifest, dir); });
  return kOk;
}

// ---- train-shapes / select-fonts ---------------------------------------------------------

int report_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) warn(w);
  return warnings.empty() ? kOk : kPartial;
}

int cmd_train_shapes(const Common& common, const std::string& glyph_dir, const std::string& out) {
  const PipelineConfig cfg = common.load();
  GlyphLoad load = load_glyph_dir(glyph_dir);
  std::vector<std::string> warnings = load.warnings;
  ModelBank bank = train_bank(load.glyphs, cfg.build, &warnings);
  const int code = report_warnings(warnings);
  if (bank.models.empty()) fail(ErrorKind::kInvalidInput, "no usable glyphs in " + glyph_dir);
  write_bank(fs::path(out), bank);
  note("wrote " + std::to_string(bank.models.size()) + " models to " + out);
  return code;
}

int cmd_select_fonts(const Common& common, const std::string& glyph_dir, const std::string& bank_path,
                     const std::string& out, const std::string& restricted, std::optional<double> threshold,
                     std::optional<double> coverage) {
  PipelineConfig cfg = common.load();
  if (threshold) cfg.font_threshold = *threshold;
  if (coverage) cfg.font_coverage = *coverage;
  validate_config(cfg);
  const ModelBank bank = read_bank(fs::path(bank_path));
  GlyphLoad load = load_glyph_dir(glyph_dir);
  const int code = report_warnings(load.warnings);
  const FontSelection sel = select_fonts(bank, load.glyphs, cfg.font_threshold, cfg.font_coverage,
                                         detector_params(bank, cfg));
  write_selection(fs::path(out), sel);
  if (!restricted.empty()) write_bank(fs::path(restricted), restrict_bank(bank, sel));
  for (const LetterSelection& l : sel.letters) {
    std::string fonts;
    for (const std::string& f : l.fonts) fonts += ' ' + f;
    std::cout << l.label << ' ' << format_double(l.coverage) << fonts << '\n';
  }
  return code;
}

// ---- train-lm ----------------------------------------------------------------------------

int cmd_train_lm(const Common& common, const std::string& lexicon, const std::string& corpus,
                 const std::string& out) {
  const PipelineConfig cfg = common.load();
  if (lexicon.empty() == corpus.empty()) fail(ErrorKind::kInvalidInput, "train-lm needs one of --lexicon, --corpus");
  CharNGramModel lm;
  if (!lexicon.empty()) {
    lm = train_char_ngrams(read_word_counts(fs::path(lexicon)), cfg.lm_alpha);
  } else {
    std::ifstream in(corpus);
    if (!in) fail(ErrorKind::kIo, "cannot read " + corpus);
    lm = train_char_ngrams(tokenize_corpus(in), cfg.lm_alpha);
  }
  if (lm.words() == 0) fail(ErrorKind::kInvalidInput, "no words to train on");
  write_ngram_model(out, lm);
  return kOk;
}

// ---- detect ------------------------------------------------------------------------------

int cmd_detect(const Common& common, const std::string& image_path, const std::string& bank_path,
               const std::string& out) {
  const PipelineConfig cfg = common.load();
  const ModelBank bank = read_bank(fs::path(bank_path));
  const GrayImage image = read_pgm(fs::path(image_path));
  DetectionDump dump{image.width(), image.height(), detect(bank, image, cfg)};
  if (out.empty() || out == "-") {
    write_detections(std::cout, dump);
  } else {
    write_detections(fs::path(out), dump);
  }
  if (dump.detections.empty()) {
    note("no candidates found");
    return kEmptyResult;
  }
  return kOk;
}

// Detections from the manifest's cached file when present, otherwise from the detector.
std::vector<CandidateDetection> detections_for(const ManifestEntry& e, const GrayImage& image, const ModelBank& bank,
                                               const PipelineConfig& cfg) {
  if (!e.detections.empty() && fs::exists(e.detections)) {
    DetectionDump d = read_detections(e.detections);
    if (d.width != image.width() || d.height != image.height()) {
      fail(ErrorKind::kInvalidInput, e.detections.string() + ": size differs from the image");
    }
    return std::move(d.detections);
  }
  std::vector<CandidateDetection> dets = detect(bank, image, cfg);
  if (!e.detections.empty()) write_detections(e.detections, {image.width(), image.height(), dets});
  return dets;
}

std::string entry_id(const ManifestEntry& e) { return e.image.filename().string(); }

// ---- train-parser ------------------------------------------------------------------------

int cmd_train_parser(const Common& common, const std::string& manifest_path, const std::string& bank_path,
                     const std::string& lm_path, const std::string& out) {
  const PipelineConfig cfg = common.load();
  const ModelBank bank = read_bank(fs::path(bank_path));
  const CharNGramModel lm = read_ngram_model(lm_path);
  const std::vector<ManifestEntry> entries = read_manifest(fs::path(manifest_path));

  PipelineConfig inner = cfg;
  inner.detect.threads = 1;
  std::vector<std::optional<TrainingSample>> slots(entries.size());
  std::vector<std::string> problems(entries.size());
  parallel_for(entries.size(), cfg.detect.threads, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    try {
      if (e.ground_truth.empty()) fail(ErrorKind::kInvalidInput, "no ground truth");
      const GrayImage image = read_pgm(e.image);
      const GroundTruth truth = read_ground_truth(e.ground_truth);
      if (truth.labels != e.word) fail(ErrorKind::kInvalidInput, "ground truth spells '" + truth.labels + "'");
      GoldMatch m;
      slots[i] = make_training_sample(detections_for(e, image, bank, inner), image.width(), image.height(), truth,
                                      lm, cfg, &m, entry_id(e));
      if (!slots[i]) problems[i] = "gold path unavailable: " + m.reason;
    } catch (const Error& err) {
      problems[i] = err.what();
    }
  });

  std::vector<TrainingSample> samples;
  int rejected = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (slots[i]) {
      samples.push_back(std::move(*slots[i]));
    } else {
      ++rejected;
      warn("manifest line " + std::to_string(entries[i].line) + " (" + entry_id(entries[i]) + "): " + problems[i]);
    }
  }
  if (samples.empty()) fail(ErrorKind::kInvalidInput, "no usable training samples");
  const TrainingResult r = train_maxmargin(samples, cfg.learn);
  write_weights(fs::path(out), r.weights);
  std::ostringstream msg;
  msg << "trained on " << samples.size() << " samples, " << r.violations_per_epoch.size() << " epochs, "
      << (r.converged ? "converged" : "not converged") << ", final violations "
      << (r.violations_per_epoch.empty() ? 0 : r.violations_per_epoch.back());
  note(msg.str());
  return rejected > 0 ? kPartial : kOk;
}

// ---- read --------------------------------------------------------------------------------

struct Artifacts {
  FeatureWeights weights;
  CharNGramModel lm;
  std::optional<WordFrequencyTable> lexicon;
};

Artifacts load_artifacts(const std::string& weights, const std::string& lm, const std::string& lexicon,
                         const PipelineConfig& cfg) {
  Artifacts a;
  a.weights = read_weights(fs::path(weights));
  a.lm = read_ngram_model(lm);
  if (!lexicon.empty()) a.lexicon.emplace(read_word_counts(fs::path(lexicon)), cfg.frequency_floor);
  return a;
}

void write_read_report(std::ostream& out, const ParseOutcome& p, const FeatureWeights& weights) {
  out << "READ v1\n";
  out << "word " << (p.word.empty() ? "-" : p.word) << '\n';
  for (std::size_t i = 0; i < p.ranked.size(); ++i) {
    const RankedWord& r = p.ranked[i];
    out << "rank " << i << ' ' << r.text << ' ' << format_double(r.parser_score) << ' ' << format_double(r.final_score)
        << ' ' << r.source << '\n';
  }
  if (p.graph) write_parse_report(out, *p.graph, weights, p.paths);
}

struct ReadArgs {
  std::string image;
  std::string bank;
  std::string weights;
  std::string lm;
  std::string lexicon;
  std::string detections;
  std::string report;
  std::string overlay;
  std::optional<int> k;
};

int cmd_read(const Common& common, const ReadArgs& a) {
  PipelineConfig cfg = common.load();
  if (a.k) cfg.k_best = *a.k;
  validate_config(cfg);
  const Artifacts art = load_artifacts(a.weights, a.lm, a.lexicon, cfg);
  const GrayImage image = read_pgm(fs::path(a.image));
  std::vector<CandidateDetection> dets;
  if (!a.detections.empty()) {
    DetectionDump d = read_detections(fs::path(a.detections));
    if (d.width != image.width() || d.height != image.height()) {
      fail(ErrorKind::kInvalidInput, "detections were computed on a different image size");
    }
    dets = std::move(d.detections);
  } else {
    if (a.bank.empty()) fail(ErrorKind::kInvalidInput, "read needs --bank or --detections");
    dets = detect(read_bank(fs::path(a.bank)), image, cfg);
  }
  const ParseOutcome p = parse_detections(dets, image.width(), image.height(), art.weights, art.lm,
                                          art.lexicon ? &*art.lexicon : nullptr, cfg);
  if (a.report.empty() || a.report == "-") {
    write_read_report(std::cout, p, art.weights);
  } else {
    write_file(a.report, [&](std::ostream& out) { write_read_report(out, p, art.weights); });
    std::cout << (p.word.empty() ? "-" : p.word) << '\n';
  }
  if (!a.overlay.empty()) {
    const fs::path overlay = a.overlay;
    write_pgm(overlay, render_overlay(image, p));
    fs::path geometry = overlay;
    geometry.replace_extension(".geom.txt");
    write_file(geometry, [&](std::ostream& out) { write_overlay_geometry(out, p, art.weights); });
  }
  if (p.word.empty()) {
    note(dets.empty() ? "no candidates found" : "no complete parse");
    return kEmptyResult;
  }
  return kOk;
}

// ---- eval --------------------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string bank;
  std::string weights;
  std::string lm;
  std::string lexicon;
  std::string tsv;
  std::string from_tsv;
};

int cmd_eval(const Common& common, const EvalArgs& a) {
  if (!a.from_tsv.empty()) {
    std::ifstream in(a.from_tsv);
    if (!in) fail(ErrorKind::kIo, "cannot read " + a.from_tsv);
    write_eval_summary(std::cout, summarize(read_eval_tsv(in)));
    return kOk;
  }
  if (a.manifest.empty() || a.bank.empty() || a.weights.empty() || a.lm.empty()) {
    fail(ErrorKind::kInvalidInput, "eval needs a manifest, --bank, --weights and --lm (or --from-tsv)");
  }
  const PipelineConfig cfg = common.load();
  const ModelBank bank = read_bank(fs::path(a.bank));
  const Artifacts art = load_artifacts(a.weights, a.lm, a.lexicon, cfg);
  const std::vector<ManifestEntry> entries = read_manifest(fs::path(a.manifest));

  PipelineConfig inner = cfg;
  inner.detect.threads = 1;
  std::vector<std::optional<EvalEntry>> slots(entries.size());
  std::vector<std::string> problems(entries.size());
  parallel_for(entries.size(), cfg.detect.threads, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    try {
      for (const fs::path& p : {e.image, e.ground_truth}) {
        if (!p.empty() && !fs::exists(p)) fail(ErrorKind::kIo, "missing file " + p.string());
      }
      const GrayImage image = read_pgm(e.image);
      const std::vector<CandidateDetection> dets = detections_for(e, image, bank, inner);
      const ParseOutcome p = parse_detections(dets, image.width(), image.height(), art.weights, art.lm,
                                              art.lexicon ? &*art.lexicon : nullptr, cfg);
      EvalEntry r;
      r.id = entry_id(e);
      r.gold = e.word;
      r.predicted = p.word;
      r.match = p.word == e.word;
      if (!e.ground_truth.empty()) {
        const GroundTruth truth = read_ground_truth(e.ground_truth);
        r.chars = int(truth.labels.size());
        r.chars_found = count_recalled(dets, truth, cfg.match_iou);
      }
      slots[i] = std::move(r);
    } catch (const Error& err) {
      problems[i] = err.what();
    }
  });

  std::vector<EvalEntry> done;
  int skipped = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (slots[i]) {
      done.push_back(std::move(*slots[i]));
    } else {
      ++skipped;
      warn("manifest line " + std::to_string(entries[i].line) + " (" + entry_id(entries[i]) + "): " + problems[i]);
    }
  }
  const EvalReport report = summarize(std::move(done));
  if (!a.tsv.empty()) write_file(a.tsv, [&](std::ostream& out) { write_eval_tsv(out, report); });
  write_eval_summary(std::cout, report);
  if (report.total == 0) return kDataError;
  return skipped > 0 ? kPartial : kOk;
}

int exit_code_for(ErrorKind kind) { return kind == ErrorKind::kConfig ? kConfigError : kDataError; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-text word reader built on generative letter shape models"};
  app.require_subcommand(1);
  Common common;

  RenderArgs render;
  auto* c_render = app.add_subcommand("render", "render synthetic words or glyph directories");
  c_render->add_option("--text", render.text, "word to render");
  c_render->add_option("--font", render.font, "built-in font for --text");
  c_render->add_option("--out", render.out, "output image for --text");
  c_render->add_option("--truth", render.truth, "ground-truth masks for --text");
  c_render->add_option("--glyphs", render.glyph_dir, "write <font>/<letter>.pgm glyphs under this directory");
  c_render->add_option("--letters", render.letters, "letters for --glyphs");
  c_render->add_option("--words", render.words_file, "file of words to render as a labelled set");
  c_render->add_option("--out-dir", render.out_dir, "directory for --words output and manifest.txt");
  c_render->add_option("--fonts", render.fonts, "comma-separated built-in fonts (default: all)");
  c_render->add_option("--em-px", render.em_px, "em size in pixels")->check(CLI::PositiveNumber);
  c_render->add_option("--salt-pepper", render.salt_pepper, "fraction of pixels flipped")->check(CLI::Range(0.0, 1.0));
  c_render->add_option("--gaussian", render.gaussian, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  c_render->add_option("--seed", render.seed, "noise seed");

  std::string glyph_dir, out, bank_path, restricted;
  std::optional<double> threshold, coverage;
  auto* c_shapes = app.add_subcommand("train-shapes", "build a shape-model bank from a glyph directory");
  c_shapes->add_option("glyphs", glyph_dir, "directory laid out as <font>/<letter>.pgm")->required();
  c_shapes->add_option("-o,--out", out, "bank file")->required();
  add_common(c_shapes, common);

  auto* c_select = app.add_subcommand("select-fonts", "pick representative fonts per letter");
  c_select->add_option("glyphs", glyph_dir, "directory laid out as <font>/<letter>.pgm")->required();
  c_select->add_option("--bank", bank_path, "bank trained on the same glyphs")->required();
  c_select->add_option("-o,--out", out, "selection file")->required();
  c_select->add_option("--restricted-bank", restricted, "also write the bank reduced to the selection");
  c_select->add_option("--threshold", threshold, "compatibility threshold (overrides fonts.threshold)");
  c_select->add_option("--coverage", coverage, "required coverage (overrides fonts.coverage)");
  add_common(c_select, common);

  std::string lexicon, corpus;
  auto* c_lm = app.add_subcommand("train-lm", "train the character n-gram model");
  c_lm->add_option("--lexicon", lexicon, "word<TAB>count file");
  c_lm->add_option("--corpus", corpus, "plain-text corpus");
  c_lm->add_option("-o,--out", out, "n-gram model file")->required();
  add_common(c_lm, common);

  std::string image;
  auto* c_detect = app.add_subcommand("detect", "list candidate letters in an image");
  c_detect->add_option("image", image, "PGM image")->required();
  c_detect->add_option("--bank", bank_path, "shape-model bank")->required();
  c_detect->add_option("-o,--out", out, "detections file (default: stdout)");
  add_common(c_detect, common);

  std::string manifest, lm_path;
  auto* c_parser = app.add_subcommand("train-parser", "learn the word-parser weights");
  c_parser->add_option("manifest", manifest, "manifest with ground truth")->required();
  c_parser->add_option("--bank", bank_path, "shape-model bank")->required();
  c_parser->add_option("--lm", lm_path, "n-gram model")->required();
  c_parser->add_option("-o,--out", out, "weights file")->required();
  add_common(c_parser, common);

  ReadArgs read;
  auto* c_read = app.add_subcommand("read", "recognise the word in an image");
  c_read->add_option("image", read.image, "PGM image")->required();
  c_read->add_option("--bank", read.bank, "shape-model bank");
  c_read->add_option("--detections", read.detections, "precomputed detections instead of --bank");
  c_read->add_option("--weights", read.weights, "parser weights")->required();
  c_read->add_option("--lm", read.lm, "n-gram model")->required();
  c_read->add_option("--lexicon", read.lexicon, "word frequencies for re-ranking");
  c_read->add_option("-k", read.k, "parses kept for re-ranking (overrides parse.k)");
  c_read->add_option("--report", read.report, "report file (default: stdout)");
  c_read->add_option("--overlay", read.overlay, "annotated PGM; geometry goes next to it as .geom.txt");
  add_common(c_read, common);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "word accuracy and detection recall over a manifest");
  c_eval->add_option("manifest", eval.manifest, "manifest");
  c_eval->add_option("--bank", eval.bank, "shape-model bank");
  c_eval->add_option("--weights", eval.weights, "parser weights");
  c_eval->add_option("--lm", eval.lm, "n-gram model");
  c_eval->add_option("--lexicon", eval.lexicon, "word frequencies for re-ranking");
  c_eval->add_option("--tsv", eval.tsv, "per-image results");
  c_eval->add_option("--from-tsv", eval.from_tsv, "recompute the summary from an earlier --tsv file");
  add_common(c_eval, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (c_render->parsed()) return cmd_render(render);
    if (c_shapes->parsed()) return cmd_train_shapes(common, glyph_dir, out);
    if (c_select->parsed()) return cmd_select_fonts(common, glyph_dir, bank_path, out, restricted, threshold, coverage);
    if (c_lm->parsed()) return cmd_train_lm(common, lexicon, corpus, out);
    if (c_detect->parsed()) return cmd_detect(common, image, bank_path, out);
    if (c_parser->parsed()) return cmd_train_parser(common, manifest, bank_path, lm_path, out);
    if (c_read->parsed()) return cmd_read(common, read);
    if (c_eval->parsed()) return cmd_eval(common, eval);
  } catch (const Error& e) {
    std::cerr << "shapeocr: error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "shapeocr: error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
