#include "shapeocr/model_bank.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "shapeocr/error.hpp"
#include "shapeocr/synth.hpp"
#include "shapeocr/text_io.hpp"

namespace shapeocr {

int ModelBank::find(char label, const std::string& font_id) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].label == label && models[i].font_id == font_id) return int(i);
  }
  return -1;
}

void validate_bank(const ModelBank& bank) {
  std::set<std::pair<char, std::string>> seen;
  for (const CharacterModel& m : bank.models) {
    if (!is_letter(m.label)) fail(ErrorKind::kInvalidModel, std::string("model label '") + m.label + "' is not a letter");
    if (!seen.insert({m.label, m.font_id}).second) {
      fail(ErrorKind::kInvalidModel, std::string("duplicate model ") + m.label + "/" + m.font_id);
    }
    validate_model(m);
  }
}

void write_bank(std::ostream& out, const ModelBank& bank) {
  const BuildParams& p = bank.params;
  out << "GLYPHBANK v1\n";
  out << "params sigma " << format_double(p.edges.sigma) << " kernel_radius " << p.edges.kernel_radius
      << " threshold_fraction " << format_double(p.edges.threshold_fraction) << " suppression_radius "
      << p.suppression_radius << " perturbation_radius " << p.perturbation_radius
      << " radius_per_pixel " << format_double(p.radius_per_pixel) << " gamma " << format_double(p.gamma) << " window "
      << p.window << " normalized_height " << format_double(p.normalized_height) << '\n';
  out << "models " << bank.models.size() << '\n';
  for (const CharacterModel& m : bank.models) {
    out << "model " << m.label << ' ' << m.font_id << ' ' << format_double(m.normalized_height) << ' '
        << m.pools.size() << ' ' << m.constraints.size() << ' ' << m.contours.size() << '\n';
    for (const PoolVariable& pv : m.pools) {
      out << "pool " << pv.landmark.x << ' ' << pv.landmark.y << ' ' << pv.landmark.orientation
          << ' ' << pv.window << '\n';
    }
    for (const LateralConstraint& c : m.constraints) {
      out << "constraint " << c.a << ' ' << c.b << ' ' << c.radius << ' ' << to_string(c.kind) << '\n';
    }
    for (const Contour& c : m.contours) {
      out << "contour " << (c.closed ? "closed" : "open") << ' ' << c.pools.size();
      for (int i : c.pools) out << ' ' << i;
      out << '\n';
    }
    out << "end\n";
  }
}

void write_bank(const std::filesystem::path& path, const ModelBank& bank) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write bank " + path.string());
  write_bank(out, bank);
  if (!out) fail(ErrorKind::kIo, "failed writing bank " + path.string());
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const std::string& keyword) {
    std::string line;
    while (std::getline(in_, line)) {
      ++number_;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string word;
      ss >> word;
      if (word != keyword) error("expected '" + keyword + "', got '" + word + "'");
      return ss;
    }
    error("unexpected end of file, expected '" + keyword + "'");
  }

  template <class T>
  T get(std::istringstream& ss, const char* what) {
    T v{};
    if constexpr (std::is_same_v<T, double>) {
      std::string token;
      if (!(ss >> token) || !parse_double(token, v)) error(std::string("bad or missing ") + what);
    } else {
      if (!(ss >> v)) error(std::string("bad or missing ") + what);
    }
    return v;
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::kFormat, "bank line " + std::to_string(number_) + ": " + msg);
  }

 private:
  std::istream& in_;
  int number_ = 0;
};

}  // namespace

ModelBank read_bank(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("GLYPHBANK v1", 0) != 0) {
    fail(ErrorKind::kFormat, "missing 'GLYPHBANK v1' header");
  }
  LineReader r(in);
  ModelBank bank;
  {
    auto ss = r.next("params");
    std::string key;
    while (ss >> key) {
      BuildParams& p = bank.params;
      if (key == "sigma") p.edges.sigma = r.get<double>(ss, key.c_str());
      else if (key == "kernel_radius") p.edges.kernel_radius = r.get<int>(ss, key.c_str());
      else if (key == "threshold_fraction") p.edges.threshold_fraction = r.get<double>(ss, key.c_str());
      else if (key == "suppression_radius") p.suppression_radius = r.get<int>(ss, key.c_str());
      else if (key == "perturbation_radius") p.perturbation_radius = r.get<int>(ss, key.c_str());
      else if (key == "radius_per_pixel") p.radius_per_pixel = r.get<double>(ss, key.c_str());
      else if (key == "gamma") p.gamma = r.get<double>(ss, key.c_str());
      else if (key == "window") p.window = r.get<int>(ss, key.c_str());
      else if (key == "normalized_height") p.normalized_height = r.get<double>(ss, key.c_str());
      else r.error("unknown parameter '" + key + "'");
    }
  }
  auto counts = r.next("models");
  const auto n_models = r.get<std::size_t>(counts, "model count");
  for (std::size_t k = 0; k < n_models; ++k) {
    auto ss = r.next("model");
    CharacterModel m;
    m.label = r.get<char>(ss, "label");
    m.font_id = r.get<std::string>(ss, "font id");
    m.normalized_height = r.get<double>(ss, "normalized height");
    const auto n_pools = r.get<std::size_t>(ss, "pool count");
    const auto n_constraints = r.get<std::size_t>(ss, "constraint count");
    const auto n_contours = r.get<std::size_t>(ss, "contour count");
    for (std::size_t i = 0; i < n_pools; ++i) {
      auto ps = r.next("pool");
      PoolVariable pv;
      pv.landmark.x = r.get<int>(ps, "x");
      pv.landmark.y = r.get<int>(ps, "y");
      pv.landmark.orientation = r.get<int>(ps, "orientation");
      pv.window = r.get<int>(ps, "window");
      if (pv.landmark.orientation < 0 || pv.landmark.orientation >= kOrientations) r.error("orientation out of range");
      m.pools.push_back(pv);
    }
    for (std::size_t i = 0; i < n_constraints; ++i) {
      auto cs = r.next("constraint");
      LateralConstraint c;
      c.a = r.get<int>(cs, "a");
      c.b = r.get<int>(cs, "b");
      c.radius = r.get<int>(cs, "radius");
      c.kind = constraint_kind_from_string(r.get<std::string>(cs, "kind"));
      m.constraints.push_back(c);
    }
    for (std::size_t i = 0; i < n_contours; ++i) {
      auto cs = r.next("contour");
      Contour c;
      const auto kind = r.get<std::string>(cs, "closed flag");
      if (kind != "closed" && kind != "open") r.error("contour must be 'closed' or 'open'");
      c.closed = kind == "closed";
      const auto len = r.get<std::size_t>(cs, "contour length");
      for (std::size_t j = 0; j < len; ++j) c.pools.push_back(r.get<int>(cs, "contour pool"));
      m.contours.push_back(std::move(c));
    }
    r.next("end");
    bank.models.push_back(std::move(m));
  }
  validate_bank(bank);
  return bank;
}

ModelBank read_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open bank " + path.string());
  return read_bank(in);
}

}  // namespace shapeocr
