#include "shapeocr/lang_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "shapeocr/error.hpp"
#include "shapeocr/synth.hpp"
#include "shapeocr/text_io.hpp"

namespace shapeocr {

CharNGramModel::CharNGramModel(double alpha)
    : alpha_(alpha),
      uni_(kLetters, 0.0),
      bi_(kLetters * kLetters, 0.0),
      tri_(kLetters * kLetters * kLetters, 0.0),
      bi_ctx_(kLetters, 0.0),
      tri_ctx_(kLetters * kLetters, 0.0),
      head_uni_(kLetters, 0.0),
      head_bi_(kLetters * kLetters, 0.0),
      head_ctx_(kLetters, 0.0),
      tail_uni_(kLetters, 0.0),
      tail_bi_(kLetters * kLetters, 0.0),
      tail_ctx_(kLetters, 0.0) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(ErrorKind::kInvalidInput, "n-gram smoothing alpha must be > 0");
}

int CharNGramModel::idx(char c) {
  const int i = letter_index(c);
  if (i < 0) fail(ErrorKind::kInvalidInput, std::string("'") + c + "' is not in the letter alphabet");
  return i;
}

void CharNGramModel::add_word(const std::string& word, double weight) {
  if (word.empty()) return;
  std::vector<int> w;
  for (char c : word) w.push_back(idx(c));
  const std::size_t n = w.size();
  ++words_;
  word_mass_ += weight;
  for (std::size_t i = 0; i < n; ++i) {
    uni_[w[i]] += weight;
    uni_total_ += weight;
    if (i + 1 < n) {
      bi_[w[i] * kLetters + w[i + 1]] += weight;
      bi_ctx_[w[i]] += weight;
    }
    if (i + 2 < n) {
      tri_[(w[i] * kLetters + w[i + 1]) * kLetters + w[i + 2]] += weight;
      tri_ctx_[w[i] * kLetters + w[i + 1]] += weight;
    }
  }
  head_uni_[w[0]] += weight;
  tail_uni_[w[n - 1]] += weight;
  if (n >= 2) {
    head_bi_[w[0] * kLetters + w[1]] += weight;
    head_ctx_[w[0]] += weight;
    tail_bi_[w[n - 2] * kLetters + w[n - 1]] += weight;
    tail_ctx_[w[n - 2]] += weight;
  }
}

double CharNGramModel::unigram(char c) const { return smooth(uni_[idx(c)], uni_total_, alpha_); }

double CharNGramModel::bigram(char a, char b) const {
  return smooth(bi_[idx(a) * kLetters + idx(b)], bi_ctx_[idx(a)], alpha_);
}

double CharNGramModel::trigram(char a, char b, char c) const {
  const int ctx = idx(a) * kLetters + idx(b);
  return smooth(tri_[ctx * kLetters + idx(c)], tri_ctx_[ctx], alpha_);
}

double CharNGramModel::head_unigram(char c) const { return smooth(head_uni_[idx(c)], word_mass_, alpha_); }

double CharNGramModel::head_bigram(char a, char b) const {
  return smooth(head_bi_[idx(a) * kLetters + idx(b)], head_ctx_[idx(a)], alpha_);
}

double CharNGramModel::tail_unigram(char c) const { return smooth(tail_uni_[idx(c)], word_mass_, alpha_); }

double CharNGramModel::tail_bigram(char a, char b) const {
  return smooth(tail_bi_[idx(a) * kLetters + idx(b)], tail_ctx_[idx(a)], alpha_);
}

double CharNGramModel::prob(const std::string& context, char next) const {
  switch (context.size()) {
    case 0: return unigram(next);
    case 1: return bigram(context[0], next);
    case 2: return trigram(context[0], context[1], next);
    default: break;
  }
  fail(ErrorKind::kInvalidInput, "n-gram context must have 0-2 letters");
}

void CharNGramModel::write(std::ostream& out) const {
  out << "CHARNGRAM v1\talpha\t" << format_double(alpha_) << '\n';
  out << "kind\tngram\tcount\n";
  out << "words\t-\t" << words_ << '\n';
  out << "word_mass\t-\t" << format_double(word_mass_) << '\n';
  auto letter = [](int i) { return kAlphabet[i]; };
  auto emit1 = [&](const char* kind, const std::vector<double>& v) {
    for (int i = 0; i < kLetters; ++i) {
      if (v[i] != 0.0) out << kind << '\t' << letter(i) << '\t' << format_double(v[i]) << '\n';
    }
  };
  auto emit2 = [&](const char* kind, const std::vector<double>& v) {
    for (int i = 0; i < kLetters * kLetters; ++i) {
      if (v[i] != 0.0) out << kind << '\t' << letter(i / kLetters) << letter(i % kLetters) << '\t' << format_double(v[i]) << '\n';
    }
  };
  emit1("uni", uni_);
  emit2("bi", bi_);
  for (int i = 0; i < kLetters * kLetters * kLetters; ++i) {
    if (tri_[i] != 0.0) {
      out << "tri\t" << letter(i / (kLetters * kLetters)) << letter(i / kLetters % kLetters)
          << letter(i % kLetters) << '\t' << format_double(tri_[i]) << '\n';
    }
  }
  emit1("head_uni", head_uni_);
  emit2("head_bi", head_bi_);
  emit1("tail_uni", tail_uni_);
  emit2("tail_bi", tail_bi_);
}

CharNGramModel CharNGramModel::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, "empty n-gram model");
  std::istringstream hs(line);
  std::string magic, version, key, alpha_text;
  std::getline(hs, magic, ' ');
  std::getline(hs, version, '\t');
  std::getline(hs, key, '\t');
  std::getline(hs, alpha_text);
  double alpha = 0.0;
  if (magic != "CHARNGRAM" || version != "v1" || key != "alpha" || !parse_double(alpha_text, alpha)) {
    fail(ErrorKind::kFormat, "missing 'CHARNGRAM v1<TAB>alpha<TAB>value' header");
  }
  CharNGramModel m(alpha);
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#' || line.rfind("kind\t", 0) == 0) continue;
    std::istringstream ss(line);
    std::string kind, gram, count_text;
    std::getline(ss, kind, '\t');
    std::getline(ss, gram, '\t');
    std::getline(ss, count_text);
    double count = 0.0;
    if (!parse_double(count_text, count) || count < 0.0) {
      fail(ErrorKind::kFormat, "n-gram line " + std::to_string(number) + ": bad count");
    }
    auto need = [&](std::size_t len) {
      if (gram.size() != len) fail(ErrorKind::kFormat, "n-gram line " + std::to_string(number) + ": bad n-gram '" + gram + "'");
      for (char c : gram) {
        if (letter_index(c) < 0) fail(ErrorKind::kFormat, "n-gram line " + std::to_string(number) + ": bad letter");
      }
    };
    if (kind == "words") {
      m.words_ = (long long)count;
    } else if (kind == "word_mass") {
      m.word_mass_ = count;
    } else if (kind == "uni") {
      need(1);
      m.uni_[idx(gram[0])] = count;
      m.uni_total_ += count;
    } else if (kind == "bi") {
      need(2);
      m.bi_[idx(gram[0]) * kLetters + idx(gram[1])] = count;
      m.bi_ctx_[idx(gram[0])] += count;
    } else if (kind == "tri") {
      need(3);
      const int ctx = idx(gram[0]) * kLetters + idx(gram[1]);
      m.tri_[ctx * kLetters + idx(gram[2])] = count;
      m.tri_ctx_[ctx] += count;
    } else if (kind == "head_uni") {
      need(1);
      m.head_uni_[idx(gram[0])] = count;
    } else if (kind == "head_bi") {
      need(2);
      m.head_bi_[idx(gram[0]) * kLetters + idx(gram[1])] = count;
      m.head_ctx_[idx(gram[0])] += count;
    } else if (kind == "tail_uni") {
      need(1);
      m.tail_uni_[idx(gram[0])] = count;
    } else if (kind == "tail_bi") {
      need(2);
      m.tail_bi_[idx(gram[0]) * kLetters + idx(gram[1])] = count;
      m.tail_ctx_[idx(gram[0])] += count;
    } else {
      fail(ErrorKind::kFormat, "n-gram line " + std::to_string(number) + ": unknown kind '" + kind + "'");
    }
  }
  return m;
}

std::vector<std::string> tokenize_corpus(std::istream& in) {
  std::vector<std::string> out;
  std::string token;
  while (in >> token) {
    std::string clean;
    for (char c : token) {
      if (is_letter(c)) clean.push_back(c);
    }
    if (!clean.empty()) out.push_back(std::move(clean));
  }
  return out;
}

CharNGramModel train_char_ngrams(const std::vector<std::string>& tokens, double alpha) {
  CharNGramModel m(alpha);
  for (const std::string& t : tokens) {
    std::string clean;
    for (char c : t) {
      if (is_letter(c)) clean.push_back(c);
    }
    m.add_word(clean);
  }
  if (m.words() == 0) fail(ErrorKind::kInvalidInput, "corpus contains no alphabetic token");
  return m;
}

CharNGramModel train_char_ngrams(const std::map<std::string, double>& counts, double alpha) {
  CharNGramModel m(alpha);
  for (const auto& [word, count] : counts) {
    std::string clean;
    for (char c : word) {
      if (is_letter(c)) clean.push_back(c);
    }
    if (count > 0.0) m.add_word(clean, count);
  }
  if (m.words() == 0) fail(ErrorKind::kInvalidInput, "word list contains no alphabetic entry");
  return m;
}

double ngram_prob(const CharNGramModel& model, const std::string& context, char next) {
  return model.prob(context, next);
}

void write_ngram_model(const std::filesystem::path& path, const CharNGramModel& model) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  model.write(out);
}

CharNGramModel read_ngram_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return CharNGramModel::read(in);
}

WordFrequencyTable::WordFrequencyTable(const std::map<std::string, double>& counts, double floor)
    : floor_(floor) {
  if (!(floor > 0.0)) fail(ErrorKind::kInvalidInput, "frequency floor must be > 0");
  double total = 0.0;
  for (const auto& [w, c] : counts) {
    if (c < 0.0 || !std::isfinite(c)) fail(ErrorKind::kInvalidInput, "word counts must be finite and >= 0");
    total += c;
  }
  for (const auto& [w, c] : counts) {
    if (c > 0.0) freq_[w] = c / total;
  }
}

double WordFrequencyTable::frequency(const std::string& word) const {
  const auto it = freq_.find(word);
  return it == freq_.end() ? floor_ : std::max(it->second, floor_);
}

std::map<std::string, double> read_word_counts(std::istream& in) {
  std::map<std::string, double> counts;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    double count = 0.0;
    if (tab == std::string::npos || tab == 0 || !parse_double(line.substr(tab + 1), count) || count < 0.0) {
      fail(ErrorKind::kFormat, "lexicon line " + std::to_string(number) + ": expected word<TAB>count");
    }
    counts[line.substr(0, tab)] += count;
  }
  return counts;
}

std::map<std::string, double> read_word_counts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return read_word_counts(in);
}

WordFrequencyTable read_lexicon(std::istream& in, double floor) {
  return WordFrequencyTable(read_word_counts(in), floor);
}

WordFrequencyTable read_lexicon(const std::filesystem::path& path, double floor) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return read_lexicon(in, floor);
}

std::vector<RankedWord> rerank(const std::vector<RankedWord>& words, const WordFrequencyTable& table,
                               double lambda) {
  std::vector<RankedWord> out = words;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].source = i;
    out[i].final_score = out[i].parser_score + lambda * std::log(std::max(table.frequency(out[i].text), table.floor()));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedWord& a, const RankedWord& b) { return a.final_score > b.final_score; });
  return out;
}

}  // namespace shapeocr
