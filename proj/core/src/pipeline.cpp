#include "shapeocr/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>

#include "shapeocr/error.hpp"
#include "shapeocr/text_io.hpp"

namespace shapeocr {

DetectorParams detector_params(const ModelBank& bank, const PipelineConfig& config) {
  DetectorParams p = config.detect;
  p.edges = bank.params.edges;
  return p;
}

std::vector<CandidateDetection> detect(const ModelBank& bank, const GrayImage& image, const PipelineConfig& config) {
  if (bank.models.empty()) fail(ErrorKind::kInvalidModel, "model bank is empty");
  return detect_multiscale(bank, image, detector_params(bank, config));
}

namespace {

ParseGraph make_parse_graph(const std::vector<CandidateDetection>& detections, int width, int height,
                            const CharNGramModel& lm, const PipelineConfig& config) {
  ParseGraph g = build_graph(detections, width, height, config.graph);
  FeatureOptions fo;
  fo.use_ngrams = config.use_ngrams;
  attach_features(g, lm, fo);
  return g;
}

}  // namespace

ParseOutcome parse_detections(const std::vector<CandidateDetection>& detections, int width, int height,
                              const FeatureWeights& weights, const CharNGramModel& lm,
                              const WordFrequencyTable* lexicon, const PipelineConfig& config) {
  ParseOutcome out;
  if (detections.empty()) return out;
  out.graph = make_parse_graph(detections, width, height, lm, config);
  out.paths = infer_best(*out.graph, weights, config.k_best);
  std::vector<RankedWord> words;
  for (std::size_t i = 0; i < out.paths.size(); ++i) {
    words.push_back({out.paths[i].text, out.paths[i].score, out.paths[i].score, i});
  }
  out.ranked = lexicon != nullptr ? rerank(words, *lexicon, config.rerank_lambda) : words;
  if (!out.ranked.empty()) out.word = out.ranked.front().text;
  return out;
}

ReadResult read_word(const GrayImage& image, const ModelBank& bank, const FeatureWeights& weights,
                     const CharNGramModel& lm, const WordFrequencyTable* lexicon, const PipelineConfig& config) {
  ReadResult r;
  r.detections = detect(bank, image, config);
  r.parse = parse_detections(r.detections, image.width(), image.height(), weights, lm, lexicon, config);
  return r;
}

std::optional<TrainingSample> make_training_sample(const std::vector<CandidateDetection>& detections, int width,
                                                   int height, const GroundTruth& truth, const CharNGramModel& lm,
                                                   const PipelineConfig& config, GoldMatch* match,
                                                   const std::string& source) {
  GoldMatch local;
  GoldMatch& m = match != nullptr ? *match : local;
  if (detections.empty()) {
    m = GoldMatch{};
    m.failed_index = 0;
    m.reason = "no candidates";
    return std::nullopt;
  }
  if (truth.width != width || truth.height != height) {
    fail(ErrorKind::kInvalidInput, "ground truth size differs from the image size");
  }
  ParseGraph g = make_parse_graph(detections, width, height, lm, config);
  m = match_gold(g, truth.masks, truth.labels, config.match_iou);
  if (!m.ok) return std::nullopt;
  TrainingSample s;
  s.graph = std::move(g);
  s.gold = m.path;
  s.source = source;
  return s;
}

int count_recalled(const std::vector<CandidateDetection>& detections, const GroundTruth& truth, double min_iou) {
  std::vector<BinaryMask> masks;
  masks.reserve(detections.size());
  for (const CandidateDetection& d : detections) masks.push_back(detection_mask(d, truth.width, truth.height));
  int found = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    for (std::size_t c = 0; c < detections.size(); ++c) {
      if (detections[c].label == truth.labels[i] && mask_iou(masks[c], truth.masks[i]) >= min_iou) {
        ++found;
        break;
      }
    }
  }
  return found;
}

EvalReport summarize(std::vector<EvalEntry> entries) {
  EvalReport r;
  r.entries = std::move(entries);
  for (const EvalEntry& e : r.entries) {
    ++r.total;
    r.matches += e.match ? 1 : 0;
    r.chars += e.chars;
    r.chars_found += e.chars_found;
  }
  r.accuracy = r.total ? double(r.matches) / r.total : 0.0;
  r.recall = r.chars ? double(r.chars_found) / r.chars : 0.0;
  return r;
}

void write_eval_tsv(std::ostream& out, const EvalReport& report) {
  out << "id\tgold\tpredicted\tmatch\tchars\tchars_found\n";
  for (const EvalEntry& e : report.entries) {
    out << e.id << '\t' << e.gold << '\t' << (e.predicted.empty() ? "-" : e.predicted) << '\t' << (e.match ? 1 : 0)
        << '\t' << e.chars << '\t' << e.chars_found << '\n';
  }
}

std::vector<EvalEntry> read_eval_tsv(std::istream& in) {
  std::vector<EvalEntry> out;
  std::string line;
  if (!std::getline(in, line) || line.rfind("id\t", 0) != 0) fail(ErrorKind::kFormat, "missing evaluation header");
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string t; std::getline(ls, t, '\t');) f.push_back(t);
    if (f.size() != 6) fail(ErrorKind::kFormat, "evaluation line " + std::to_string(number) + ": expected 6 fields");
    EvalEntry e;
    e.id = f[0];
    e.gold = f[1];
    e.predicted = f[2] == "-" ? "" : f[2];
    try {
      e.match = std::stoi(f[3]) != 0;
      e.chars = std::stoi(f[4]);
      e.chars_found = std::stoi(f[5]);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, "evaluation line " + std::to_string(number) + ": bad number");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_eval_summary(std::ostream& out, const EvalReport& r) {
  out << "words " << r.total << " correct " << r.matches << " accuracy " << format_double(r.accuracy) << '\n';
  out << "characters " << r.chars << " recalled " << r.chars_found << " recall " << format_double(r.recall) << '\n';
}

GrayImage render_overlay(const GrayImage& image, const ParseOutcome& parse) {
  GrayImage out = image;
  if (!parse.graph || parse.paths.empty()) return out;
  const ParsePath* chosen = &parse.paths.front();
  if (!parse.ranked.empty()) chosen = &parse.paths[parse.ranked.front().source];
  for (int v : chosen->nodes) {
    const CandidateDetection& d = parse.graph->candidates[std::size_t(v)];
    BinaryMask outline(image.width(), image.height());
    for (const Polyline& p : d.segmentation) {
      const std::size_t n = p.points.size();
      const std::size_t segments = n < 2 ? 0 : p.closed ? n : n - 1;
      for (std::size_t i = 0; i < segments; ++i) stroke_segment(outline, p.points[i], p.points[(i + 1) % n], 1.0);
    }
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (outline.get(x, y)) out.at(x, y) = image.at(x, y) < 128 ? 255 : 0;
      }
    }
  }
  return out;
}

void write_overlay_geometry(std::ostream& out, const ParseOutcome& parse, const FeatureWeights& weights) {
  out << "OVERLAY v1 word " << (parse.word.empty() ? "-" : parse.word) << '\n';
  if (!parse.graph) return;
  const ParseGraph& g = *parse.graph;
  for (std::size_t c = 0; c < g.candidates.size(); ++c) {
    const CandidateDetection& d = g.candidates[c];
    out << "candidate " << c << ' ' << d.label << ' ' << format_double(d.score) << ' ' << format_double(d.bbox.x0)
        << ' ' << format_double(d.bbox.y0) << ' ' << format_double(d.bbox.x1) << ' ' << format_double(d.bbox.y1)
        << '\n';
    for (const Polyline& p : d.segmentation) {
      out << "polyline " << c << ' ' << (p.closed ? "closed" : "open");
      for (const PointF& q : p.points) out << ' ' << format_double(q.x) << ' ' << format_double(q.y);
      out << '\n';
    }
  }
  write_parse_report(out, g, weights, parse.paths);
}

GroundTruth ground_truth_of(const RenderedWord& word) {
  GroundTruth gt;
  gt.width = word.image.width();
  gt.height = word.image.height();
  for (const CharTruth& c : word.chars) {
    gt.labels.push_back(c.label);
    gt.masks.push_back(c.mask);
  }
  return gt;
}

GlyphLoad load_glyph_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorKind::kIo, "not a directory: " + dir.string());
  GlyphLoad out;
  std::vector<fs::path> fonts;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) fonts.push_back(e.path());
  }
  std::sort(fonts.begin(), fonts.end());
  for (const fs::path& font : fonts) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(font)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    const std::string font_id = font.filename().string();
    for (const fs::path& f : files) {
      const std::string stem = f.stem().string();
      if (f.extension() != ".pgm" || stem.size() != 1 || !is_letter(stem[0])) {
        out.warnings.push_back(f.string() + ": not a <letter>.pgm file, skipped");
        continue;
      }
      try {
        GrayImage g = read_pgm(f);
        if (g.empty()) fail(ErrorKind::kFormat, "empty image");
        out.glyphs[{stem[0], font_id}] = std::move(g);
      } catch (const Error& e) {
        out.warnings.push_back(f.string() + ": " + e.what());
      }
    }
  }
  return out;
}

void write_glyph_dir(const std::filesystem::path& dir, const std::vector<FontStyle>& fonts, const std::string& letters,
                     const RenderOptions& options) {
  for (const FontStyle& f : fonts) {
    const std::filesystem::path sub = dir / f.name;
    std::filesystem::create_directories(sub);
    for (char c : letters) {
      if (!is_letter(c)) fail(ErrorKind::kInvalidInput, std::string("not a letter: '") + c + "'");
      write_pgm(sub / (std::string(1, c) + ".pgm"), render_glyph(c, f, options));
    }
  }
}

ModelBank train_bank(const GlyphSet& glyphs, const BuildParams& params, std::vector<std::string>* warnings) {
  ModelBank bank;
  bank.params = params;
  for (const auto& [key, glyph] : glyphs) {
    try {
      bank.models.push_back(build_model_from_glyph(key.first, key.second, glyph, params));
    } catch (const Error& e) {
      if (warnings != nullptr) warnings->push_back(key.second + "/" + key.first + ": " + e.what());
    }
  }
  return bank;
}

ModelBank builtin_bank(const BuildParams& params, const std::vector<std::string>& fonts) {
  ModelBank bank;
  bank.params = params;
  RenderOptions ro;
  ro.em_px = params.normalized_height;
  for (const FontStyle& f : builtin_fonts()) {
    if (!fonts.empty() && std::find(fonts.begin(), fonts.end(), f.name) == fonts.end()) continue;
    for (const char* c = kAlphabet; *c != '\0'; ++c) {
      bank.models.push_back(build_model_from_glyph(*c, f.name, render_glyph(*c, f, ro), params));
    }
  }
  return bank;
}

}  // namespace shapeocr
