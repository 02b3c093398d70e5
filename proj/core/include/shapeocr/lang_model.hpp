#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace shapeocr {

inline constexpr int kLetters = 52;

// Additive-smoothed character n-grams (orders 1-3) over the 52 case-sensitive letters, plus
// word-initial and word-final unigram/bigram statistics.
class CharNGramModel {
 public:
  CharNGramModel() : CharNGramModel(0.01) {}
  explicit CharNGramModel(double alpha);

  double alpha() const { return alpha_; }
  long long words() const { return words_; }

  // Order chosen by context length (0, 1 or 2 letters).
  double prob(const std::string& context, char next) const;
  double unigram(char c) const;
  double bigram(char a, char b) const;           // P(b | a)
  double trigram(char a, char b, char c) const;  // P(c | a b)
  double head_unigram(char c) const;             // P(word starts with c)
  double head_bigram(char a, char b) const;      // P(second letter b | first letter a)
  double tail_unigram(char c) const;             // P(word ends with c)
  double tail_bigram(char a, char b) const;      // P(last letter b | second-to-last a)

  void add_word(const std::string& word, double weight = 1.0);

  void write(std::ostream& out) const;
  static CharNGramModel read(std::istream& in);

 private:
  static int idx(char c);
  static double smooth(double count, double total, double alpha) { return (count + alpha) / (total + kLetters * alpha); }

  double alpha_;
  long long words_ = 0;
  double word_mass_ = 0.0;
  std::vector<double> uni_, bi_, tri_;
  std::vector<double> bi_ctx_, tri_ctx_;  // context totals
  std::vector<double> head_uni_, head_bi_, head_ctx_;
  std::vector<double> tail_uni_, tail_bi_, tail_ctx_;
  double uni_total_ = 0.0;
};

// Whitespace tokens with non-letters removed; empty results are dropped.
std::vector<std::string> tokenize_corpus(std::istream& in);

CharNGramModel train_char_ngrams(const std::vector<std::string>& tokens, double alpha);
// Each word contributes with its count as weight.
CharNGramModel train_char_ngrams(const std::map<std::string, double>& counts, double alpha);
double ngram_prob(const CharNGramModel& model, const std::string& context, char next);

void write_ngram_model(const std::filesystem::path& path, const CharNGramModel& model);
CharNGramModel read_ngram_model(const std::filesystem::path& path);

class WordFrequencyTable {
 public:
  static constexpr double kDefaultFloor = 1e-9;

  WordFrequencyTable() = default;
  // Counts are normalized by their sum.
  explicit WordFrequencyTable(const std::map<std::string, double>& counts, double floor = kDefaultFloor);

  double frequency(const std::string& word) const;  // floor for unknown words
  double floor() const { return floor_; }
  bool contains(const std::string& word) const { return freq_.count(word) != 0; }
  std::size_t size() const { return freq_.size(); }

 private:
  std::map<std::string, double> freq_;
  double floor_ = kDefaultFloor;
};

// Lexicon TSV: `word<TAB>count` per line, '#' comments allowed. Repeated words accumulate.
std::map<std::string, double> read_word_counts(std::istream& in);
std::map<std::string, double> read_word_counts(const std::filesystem::path& path);
WordFrequencyTable read_lexicon(std::istream& in, double floor = WordFrequencyTable::kDefaultFloor);
WordFrequencyTable read_lexicon(const std::filesystem::path& path,
                                double floor = WordFrequencyTable::kDefaultFloor);

struct RankedWord {
  std::string text;
  double parser_score = 0.0;
  double final_score = 0.0;
  std::size_t source = 0;  // position in the input list
};

// final = parser + lambda * log(max(frequency, floor)); stable, descending.
std::vector<RankedWord> rerank(const std::vector<RankedWord>& words, const WordFrequencyTable& table,
                               double lambda);

}  // namespace shapeocr
