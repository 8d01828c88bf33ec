#pragma once

// Output style analyses (n-gram profiles, frequent-sentence rates, trigram LM
// perplexity) and the LexRank extractive baseline.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "factsum/factext.hpp"

namespace factsum {

struct NgramEntry {
  Tokens gram;
  std::size_t count = 0;      // occurrences over all summaries
  double share = 0.0;         // count / total grams of this order
  double output_ratio = 0.0;  // fraction of summaries containing the gram
};

struct NgramProfile {
  std::size_t n = 0;
  std::size_t total = 0;          // total grams counted
  std::vector<NgramEntry> top;    // by count desc, ties lexicographic
};

// Throws std::invalid_argument when n or k is 0.
NgramProfile ngram_profile(const std::vector<Tokens>& summaries, std::size_t n, std::size_t k);

// Sentences are maximal runs of tokens between "." tokens.
std::vector<Tokens> split_sentences(const Tokens& summary);
Tokens join_sentences(const std::vector<Tokens>& sentences);

// Fraction of summaries having `sentence` as one of their sentences.
double sentence_rate(const std::vector<Tokens>& summaries, const Tokens& sentence);

struct SentenceCount {
  Tokens sentence;
  double rate = 0.0;
};
// Sentence contained in the most summaries (ties lexicographic).
SentenceCount most_frequent_sentence(const std::vector<Tokens>& summaries);

class TrigramLM {
 public:
  static constexpr const char* kEos = "</s>";
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kUnk = "<unk>";

  // Outcomes are the training tokens plus <unk> and </s>; `extra_vocabulary`
  // adds outcome types that have no counts.
  explicit TrigramLM(double k = 0.1);
  void train(const std::vector<Tokens>& summaries,
             const std::vector<std::string>& extra_vocabulary = {});

  // Add-k smoothing backing off to the lower order:
  //   P3(w|u,v) = (c(u,v,w) + k * P2(w|v)) / (c(u,v) + k)
  //   P2(w|v)   = (c(v,w)   + k * P1(w))   / (c(v) + k)
  //   P1(w)     = (c(w) + k) / (N + k * |outcomes|)
  // An unseen context (zero denominator) falls through to the lower order.
  double prob(const std::string& u, const std::string& v, const std::string& w) const;
  // exp(mean negative log-likelihood per token, EOS counted).
  double perplexity(const std::vector<Tokens>& summaries) const;

  double k() const { return k_; }
  std::size_t num_outcomes() const { return outcomes_.size(); }
  const std::vector<std::string>& outcomes() const { return outcomes_; }

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static TrigramLM load(std::istream& in);
  static TrigramLM load(const std::string& path);

 private:
  std::string map(const std::string& w) const;
  void add_outcome(const std::string& w);

  double k_;
  std::vector<std::string> outcomes_;
  std::map<std::string, std::size_t> outcome_index_;
  std::map<std::string, std::size_t> uni_;
  std::map<std::pair<std::string, std::string>, std::size_t> bi_;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> tri_;
  std::map<std::pair<std::string, std::string>, std::size_t> tri_ctx_;
  std::map<std::string, std::size_t> uni_ctx_;
  std::size_t total_ = 0;
};

struct LexRankOptions {
  std::size_t top_n = 3;
  double threshold = 0.1;
  double damping = 0.85;
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
};

struct LexRankResult {
  std::vector<Tokens> sentences;
  std::vector<double> centrality;
  std::vector<std::size_t> selected;  // document order
  Tokens summary;                     // selected sentences joined by "."
  std::size_t iterations = 0;
  bool converged = false;
};

// Row-stochastic transition matrix of the thresholded TF-IDF cosine graph
// (self-loops included). Exposed for oracle tests.
std::vector<std::vector<double>> lexrank_transition(const std::vector<Tokens>& sentences,
                                                    double threshold);

// Throws std::invalid_argument on input without sentences.
LexRankResult lexrank(const Tokens& document, const LexRankOptions& options = {});

}  // namespace factsum
