#pragma once

// Scoring: ROUGE-1/2/L, factual accuracy, macro factual F1 and a paired
// bootstrap test.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "factsum/factext.hpp"

namespace factsum {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// f1 = 2pr / (p + r), 0 when p + r == 0.
PRF make_prf(double precision, double recall);

struct RougeScores {
  PRF r1, r2, rl;
};

// Clipped n-gram overlap. n must be 1 or 2.
PRF rouge_n(std::span<const std::string> hyp, std::span<const std::string> ref, int n);
// Whole-sequence LCS; sentence markers are ordinary tokens.
PRF rouge_l(std::span<const std::string> hyp, std::span<const std::string> ref);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
RougeScores rouge(std::span<const std::string> hyp, std::span<const std::string> ref);

// Corpus ROUGE: unweighted mean of per-example scores.
RougeScores corpus_rouge(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

// Fraction of variables with equal status.
double factual_accuracy(const FactVector& predicted, const FactVector& reference);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct FactualReport {
  std::array<double, kNumVariables> per_variable_f1{};
  std::array<Confusion, kNumVariables> confusion{};
  double macro_f1 = 0.0;
};

// Presence (status == positive) F1 per variable, macro-averaged. Undefined
// (0/0) F1 counts as 0. Throws std::invalid_argument on empty or unequal input.
FactualReport macro_factual_f1(const std::vector<FactVector>& predictions,
                               const std::vector<FactVector>& references);

// Same computation over a subset of example indices (bootstrap support).
FactualReport macro_factual_f1(const std::vector<FactVector>& predictions,
                               const std::vector<FactVector>& references,
                               std::span<const std::size_t> indices);

// One-sided paired bootstrap: the fraction of resamples in which
// mean(b) >= mean(a). n_resamples must be >= 1000.
double bootstrap_compare(std::span<const double> metric_a, std::span<const double> metric_b,
                         std::size_t n_resamples, std::uint64_t seed);

// Same test for macro factual F1, which is not a per-example mean: each
// resample recomputes the corpus statistic for both systems.
double bootstrap_compare_factual_f1(const std::vector<FactVector>& system_a,
                                    const std::vector<FactVector>& system_b,
                                    const std::vector<FactVector>& references,
                                    std::size_t n_resamples, std::uint64_t seed);

}  // namespace factsum
