#include "shapeocr/font_selection.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "shapeocr/error.hpp"
#include "shapeocr/parallel.hpp"
#include "shapeocr/text_io.hpp"

namespace shapeocr {

Representability representability(const std::vector<std::vector<double>>& scores, double threshold) {
  const std::size_t n = scores.size();
  Representability r(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i].size() != n) fail(ErrorKind::kInvalidInput, "score matrix must be square");
    for (std::size_t j = 0; j < n; ++j) r[i][j] = i == j || scores[i][j] > threshold;
  }
  return r;
}

std::vector<int> greedy_cover(const Representability& represents, double coverage) {
  if (!(coverage >= 0.0 && coverage <= 1.0)) fail(ErrorKind::kInvalidInput, "coverage must lie in [0, 1]");
  const int n = int(represents.size());
  std::vector<bool> covered(std::size_t(n), false);
  std::vector<bool> used(std::size_t(n), false);
  std::vector<int> chosen;
  int count = 0;
  while (n > 0 && double(count) / n < coverage) {
    int best = -1, best_gain = -1;
    for (int i = 0; i < n; ++i) {
      if (used[std::size_t(i)]) continue;
      int gain = 0;
      for (int j = 0; j < n; ++j) gain += (represents[std::size_t(i)][std::size_t(j)] && !covered[std::size_t(j)]) ? 1 : 0;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best < 0 || best_gain == 0) break;
    used[std::size_t(best)] = true;
    chosen.push_back(best);
    for (int j = 0; j < n; ++j) {
      if (represents[std::size_t(best)][std::size_t(j)] && !covered[std::size_t(j)]) {
        covered[std::size_t(j)] = true;
        ++count;
      }
    }
  }
  return chosen;
}

double covered_fraction(const Representability& represents, const std::vector<int>& chosen) {
  const std::size_t n = represents.size();
  if (n == 0) return 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    bool any = false;
    for (int i : chosen) any = any || represents[std::size_t(i)][j];
    count += any ? 1 : 0;
  }
  return double(count) / double(n);
}

std::vector<std::vector<double>> compatibility_matrix(const std::vector<const CharacterModel*>& models,
                                                      const std::vector<const GrayImage*>& glyphs,
                                                      const DetectorParams& params) {
  const std::size_t n = models.size(), m = glyphs.size();
  std::vector<std::vector<double>> s(n, std::vector<double>(m, 0.0));
  DetectorParams inner = params;
  inner.threads = 1;
  parallel_for(n * m, params.threads, [&](std::size_t k) {
    const std::size_t i = k / m, j = k % m;
    s[i][j] = compatibility_score(*models[i], *glyphs[j], inner);
  });
  return s;
}

FontSelection select_fonts(const ModelBank& bank, const GlyphSet& glyphs, double threshold, double coverage,
                           const DetectorParams& params) {
  FontSelection out;
  std::set<char> labels;
  for (const CharacterModel& m : bank.models) labels.insert(m.label);
  for (char label : labels) {
    std::vector<const CharacterModel*> models;
    std::vector<const GrayImage*> images;
    for (const CharacterModel& m : bank.models) {
      if (m.label != label) continue;
      auto it = glyphs.find({label, m.font_id});
      if (it == glyphs.end()) {
        fail(ErrorKind::kInvalidInput, std::string("no glyph for '") + label + "' in font " + m.font_id);
      }
      models.push_back(&m);
      images.push_back(&it->second);
    }
    const Representability rep = representability(compatibility_matrix(models, images, params), threshold);
    const std::vector<int> chosen = greedy_cover(rep, coverage);
    LetterSelection ls;
    ls.label = label;
    ls.candidates = models.size();
    ls.coverage = covered_fraction(rep, chosen);
    for (int i : chosen) ls.fonts.push_back(models[std::size_t(i)]->font_id);
    out.letters.push_back(std::move(ls));
  }
  return out;
}

ModelBank restrict_bank(const ModelBank& bank, const FontSelection& selection) {
  std::set<std::pair<char, std::string>> keep;
  for (const LetterSelection& l : selection.letters) {
    for (const std::string& f : l.fonts) keep.insert({l.label, f});
  }
  ModelBank out;
  out.params = bank.params;
  for (const CharacterModel& m : bank.models) {
    if (keep.count({m.label, m.font_id})) out.models.push_back(m);
  }
  return out;
}

void write_selection(std::ostream& out, const FontSelection& selection) {
  out << "FONTSELECT v1\n";
  for (const LetterSelection& l : selection.letters) {
    out << l.label << ' ' << format_double(l.coverage) << ' ' << l.candidates;
    for (const std::string& f : l.fonts) out << ' ' << f;
    out << '\n';
  }
}

FontSelection read_selection(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "FONTSELECT v1") fail(ErrorKind::kFormat, "missing FONTSELECT v1 header");
  FontSelection sel;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string label, cov;
    LetterSelection l;
    if (!(ls >> label >> cov >> l.candidates) || label.size() != 1 || !parse_double(cov, l.coverage)) {
      fail(ErrorKind::kFormat, "selection line " + std::to_string(lineno) + ": expected `label coverage count fonts...`");
    }
    l.label = label[0];
    for (std::string f; ls >> f;) l.fonts.push_back(f);
    sel.letters.push_back(std::move(l));
  }
  return sel;
}

void write_selection(const std::filesystem::path& path, const FontSelection& selection) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_selection(out, selection);
}

FontSelection read_selection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  return read_selection(in);
}

}  // namespace shapeocr
