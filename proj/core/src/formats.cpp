#include "shapeocr/formats.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "shapeocr/error.hpp"
#include "shapeocr/synth.hpp"
#include "shapeocr/text_io.hpp"

namespace shapeocr {

namespace {

class Lines {
 public:
  Lines(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  std::istringstream next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return std::istringstream(line);
    }
    error("unexpected end of file");
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::kFormat, what_ + " line " + std::to_string(number_) + ": " + msg);
  }

  double number(std::istream& ls) const {
    std::string t;
    double v = 0.0;
    if (!(ls >> t) || !parse_double(t, v)) error("expected a number");
    return v;
  }

  template <class T>
  T integer(std::istream& ls) const {
    T v{};
    if (!(ls >> v)) error("expected an integer");
    return v;
  }

  void expect(std::istream& ls, const std::string& word) const {
    std::string t;
    if (!(ls >> t) || t != word) error("expected '" + word + "'");
  }

  void end(std::istream& ls) const {
    std::string t;
    if (ls >> t) error("trailing text '" + t + "'");
  }

 private:
  std::istream& in_;
  std::string what_;
  int number_ = 0;
};

bool plain_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

}  // namespace

void write_detections(std::ostream& out, const DetectionDump& dump) {
  out << "DETECTIONS v1 " << dump.width << ' ' << dump.height << ' ' << dump.detections.size() << '\n';
  for (const CandidateDetection& d : dump.detections) {
    if (!plain_token(d.font_id)) fail(ErrorKind::kInvalidInput, "font id must be a single token");
    const int flags = (d.low_confidence ? 1 : 0) | (d.exact ? 2 : 0);
    out << "D " << d.label << ' ' << d.font_id << ' ' << d.model_index << ' ' << format_double(d.score) << ' '
        << d.scale << ' ' << format_double(d.anchor.x) << ' ' << format_double(d.anchor.y) << ' '
        << format_double(d.bbox.x0) << ' ' << format_double(d.bbox.y0) << ' ' << format_double(d.bbox.x1) << ' '
        << format_double(d.bbox.y1) << ' ' << format_double(d.height) << ' ' << format_double(d.mean_color) << ' '
        << format_double(d.stroke_width) << ' ' << flags << ' ' << d.segmentation.size() << '\n';
    for (const Polyline& p : d.segmentation) {
      out << "P " << (p.closed ? "closed" : "open") << ' ' << p.points.size();
      for (const PointF& q : p.points) out << ' ' << format_double(q.x) << ' ' << format_double(q.y);
      out << '\n';
    }
  }
}

DetectionDump read_detections(std::istream& in) {
  Lines lines(in, "detections");
  DetectionDump dump;
  auto head = lines.next();
  lines.expect(head, "DETECTIONS");
  lines.expect(head, "v1");
  dump.width = lines.integer<int>(head);
  dump.height = lines.integer<int>(head);
  const auto count = lines.integer<long long>(head);
  lines.end(head);
  if (dump.width <= 0 || dump.height <= 0 || count < 0) lines.error("bad header values");
  for (long long i = 0; i < count; ++i) {
    auto ls = lines.next();
    lines.expect(ls, "D");
    CandidateDetection d;
    std::string label;
    if (!(ls >> label) || label.size() != 1 || !is_letter(label[0])) lines.error("bad label");
    d.label = label[0];
    if (!(ls >> d.font_id)) lines.error("missing font id");
    d.model_index = lines.integer<int>(ls);
    d.score = lines.number(ls);
    d.scale = lines.integer<int>(ls);
    d.anchor.x = lines.number(ls);
    d.anchor.y = lines.number(ls);
    d.bbox.x0 = lines.number(ls);
    d.bbox.y0 = lines.number(ls);
    d.bbox.x1 = lines.number(ls);
    d.bbox.y1 = lines.number(ls);
    d.height = lines.number(ls);
    d.mean_color = lines.number(ls);
    d.stroke_width = lines.number(ls);
    const int flags = lines.integer<int>(ls);
    d.low_confidence = (flags & 1) != 0;
    d.exact = (flags & 2) != 0;
    const auto npoly = lines.integer<long long>(ls);
    lines.end(ls);
    if (npoly < 0) lines.error("negative polyline count");
    for (long long k = 0; k < npoly; ++k) {
      auto ps = lines.next();
      lines.expect(ps, "P");
      std::string kind;
      ps >> kind;
      if (kind != "closed" && kind != "open") lines.error("polyline must be closed or open");
      Polyline p;
      p.closed = kind == "closed";
      const auto n = lines.integer<long long>(ps);
      if (n < 0) lines.error("negative point count");
      for (long long j = 0; j < n; ++j) {
        PointF q;
        q.x = lines.number(ps);
        q.y = lines.number(ps);
        p.points.push_back(q);
      }
      lines.end(ps);
      d.segmentation.push_back(std::move(p));
    }
    dump.detections.push_back(std::move(d));
  }
  return dump;
}

void write_detections(const std::filesystem::path& path, const DetectionDump& dump) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_detections(out, dump);
}

DetectionDump read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  return read_detections(in);
}

void write_ground_truth(std::ostream& out, const GroundTruth& gt) {
  if (gt.labels.size() != gt.masks.size()) fail(ErrorKind::kInvalidInput, "one mask per ground-truth label");
  out << "GTSEG v1 " << gt.width << ' ' << gt.height << ' ' << gt.labels.size() << '\n';
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (gt.masks[i].width() != gt.width || gt.masks[i].height() != gt.height) {
      fail(ErrorKind::kInvalidInput, "ground-truth mask size differs from the image size");
    }
    const std::vector<Rect> runs = mask_to_runs(gt.masks[i]);
    out << "C " << gt.labels[i] << ' ' << runs.size() << '\n';
    for (const Rect& r : runs) out << r.x0 << ' ' << r.y0 << ' ' << r.width << ' ' << r.height << '\n';
  }
}

GroundTruth read_ground_truth(std::istream& in) {
  Lines lines(in, "ground truth");
  GroundTruth gt;
  auto head = lines.next();
  lines.expect(head, "GTSEG");
  lines.expect(head, "v1");
  gt.width = lines.integer<int>(head);
  gt.height = lines.integer<int>(head);
  const auto n = lines.integer<long long>(head);
  lines.end(head);
  if (gt.width <= 0 || gt.height <= 0 || n < 0) lines.error("bad header values");
  for (long long i = 0; i < n; ++i) {
    auto cs = lines.next();
    lines.expect(cs, "C");
    std::string label;
    if (!(cs >> label) || label.size() != 1 || !is_letter(label[0])) lines.error("bad label");
    const auto runs = lines.integer<long long>(cs);
    lines.end(cs);
    if (runs < 0) lines.error("negative run count");
    std::vector<Rect> rects;
    for (long long k = 0; k < runs; ++k) {
      auto rs = lines.next();
      Rect r;
      r.x0 = lines.integer<int>(rs);
      r.y0 = lines.integer<int>(rs);
      r.width = lines.integer<int>(rs);
      r.height = lines.integer<int>(rs);
      lines.end(rs);
      if (r.empty() || r.x0 < 0 || r.y0 < 0 || r.x1() > gt.width || r.y1() > gt.height) lines.error("run outside the image");
      rects.push_back(r);
    }
    gt.labels.push_back(label[0]);
    gt.masks.push_back(runs_to_mask(rects, gt.width, gt.height));
  }
  return gt;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_ground_truth(out, gt);
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  return read_ground_truth(in);
}

std::vector<ManifestEntry> read_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> out;
  std::string line;
  int number = 0;
  auto resolve = [&](const std::string& t) -> std::filesystem::path {
    if (t == "-") return {};
    const std::filesystem::path p(t);
    return p.is_absolute() ? p : base_dir / p;
  };
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string t; ls >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() < 2 || tokens.size() > 4) {
      fail(ErrorKind::kFormat, "manifest line " + std::to_string(number) + ": expected `image word [gt] [detections]`");
    }
    ManifestEntry e;
    e.line = number;
    e.image = resolve(tokens[0]);
    e.word = tokens[1];
    if (tokens.size() > 2) e.ground_truth = resolve(tokens[2]);
    if (tokens.size() > 3) e.detections = resolve(tokens[3]);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  return read_manifest(in, path.parent_path());
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& base_dir) {
  auto rel = [&](const std::filesystem::path& p) -> std::string {
    if (p.empty()) return "-";
    return p.lexically_relative(base_dir).generic_string();
  };
  for (const ManifestEntry& e : entries) {
    out << rel(e.image) << ' ' << e.word << ' ' << rel(e.ground_truth);
    if (!e.detections.empty()) out << ' ' << rel(e.detections);
    out << '\n';
  }
}

}  // namespace shapeocr
