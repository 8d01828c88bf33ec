#include "factsum/metrics.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>

namespace factsum {

PRF make_prf(double precision, double recall) {
  PRF s{precision, recall, 0.0};
  if (precision + recall > 0.0) s.f1 = 2.0 * precision * recall / (precision + recall);
  return s;
}

PRF rouge_n(std::span<const std::string> hyp, std::span<const std::string> ref, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n supports n = 1 or 2");
  const auto count = [n](std::span<const std::string> seq) {
    std::map<std::vector<std::string>, std::size_t> grams;
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= seq.size(); ++i)
      ++grams[std::vector<std::string>(seq.begin() + i, seq.begin() + i + un)];
    return grams;
  };
  const auto h = count(hyp);
  const auto r = count(ref);
  std::size_t h_total = 0, r_total = 0, overlap = 0;
  for (const auto& [g, c] : h) h_total += c;
  for (const auto& [g, c] : r) {
    r_total += c;
    auto it = h.find(g);
    if (it != h.end()) overlap += std::min(c, it->second);
  }
  if (h_total == 0 || r_total == 0) return {};
  return make_prf(static_cast<double>(overlap) / h_total, static_cast<double>(overlap) / r_total);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PRF rouge_l(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (hyp.empty() || ref.empty()) return {};
  const double l = static_cast<double>(lcs_length(hyp, ref));
  return make_prf(l / hyp.size(), l / ref.size());
}

RougeScores rouge(std::span<const std::string> hyp, std::span<const std::string> ref) {
  return RougeScores{rouge_n(hyp, ref, 1), rouge_n(hyp, ref, 2), rouge_l(hyp, ref)};
}

RougeScores corpus_rouge(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("corpus_rouge: " + std::to_string(hyps.size()) +
                                " hypotheses vs " + std::to_string(refs.size()) + " references");
  RougeScores mean;
  if (hyps.empty()) return mean;
  auto acc = [](PRF& into, const PRF& s) {
    into.precision += s.precision;
    into.recall += s.recall;
    into.f1 += s.f1;
  };
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto s = rouge(hyps[i], refs[i]);
    acc(mean.r1, s.r1);
    acc(mean.r2, s.r2);
    acc(mean.rl, s.rl);
  }
  const double n = static_cast<double>(hyps.size());
  for (PRF* p : {&mean.r1, &mean.r2, &mean.rl}) {
    p->precision /= n;
    p->recall /= n;
    p->f1 /= n;
  }
  return mean;
}

double factual_accuracy(const FactVector& predicted, const FactVector& reference) {
  std::size_t equal = 0;
  for (std::size_t v = 0; v < kNumVariables; ++v) equal += predicted[v] == reference[v];
  return static_cast<double>(equal) / kNumVariables;
}

FactualReport macro_factual_f1(const std::vector<FactVector>& predictions,
                               const std::vector<FactVector>& references,
                               std::span<const std::size_t> indices) {
  if (predictions.size() != references.size())
    throw std::invalid_argument("macro_factual_f1: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(references.size()) +
                                " references");
  if (indices.empty()) throw std::invalid_argument("macro_factual_f1: no examples");
  FactualReport rep;
  for (std::size_t i : indices) {
    for (std::size_t v = 0; v < kNumVariables; ++v) {
      const bool p = predictions.at(i).present(v);
      const bool r = references.at(i).present(v);
      auto& c = rep.confusion[v];
      if (p && r) ++c.tp;
      else if (p) ++c.fp;
      else if (r) ++c.fn;
      else ++c.tn;
    }
  }
  double sum = 0.0;
  for (std::size_t v = 0; v < kNumVariables; ++v) {
    const auto& c = rep.confusion[v];
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    rep.per_variable_f1[v] = denom == 0 ? 0.0 : 2.0 * c.tp / denom;
    sum += rep.per_variable_f1[v];
  }
  rep.macro_f1 = sum / kNumVariables;
  return rep;
}

FactualReport macro_factual_f1(const std::vector<FactVector>& predictions,
                               const std::vector<FactVector>& references) {
  std::vector<std::size_t> all(predictions.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return macro_factual_f1(predictions, references, all);
}

namespace {

void check_bootstrap_args(std::size_t a, std::size_t b, std::size_t n_resamples) {
  if (a != b)
    throw std::invalid_argument("bootstrap_compare: length mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  if (a == 0) throw std::invalid_argument("bootstrap_compare: empty inputs");
  if (n_resamples < 1000) throw std::invalid_argument("bootstrap_compare: n_resamples < 1000");
}

}  // namespace

double bootstrap_compare(std::span<const double> metric_a, std::span<const double> metric_b,
                         std::size_t n_resamples, std::uint64_t seed) {
  check_bootstrap_args(metric_a.size(), metric_b.size(), n_resamples);
  const std::size_t n = metric_a.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t not_better = 0;
  for (std::size_t r = 0; r < n_resamples; ++r) {
    double diff = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = pick(rng);
      diff += metric_a[i] - metric_b[i];
    }
    if (diff <= 0.0) ++not_better;
  }
  return static_cast<double>(not_better) / n_resamples;
}

double bootstrap_compare_factual_f1(const std::vector<FactVector>& system_a,
                                    const std::vector<FactVector>& system_b,
                                    const std::vector<FactVector>& references,
                                    std::size_t n_resamples, std::uint64_t seed) {
  check_bootstrap_args(system_a.size(), system_b.size(), n_resamples);
  check_bootstrap_args(system_a.size(), references.size(), n_resamples);
  const std::size_t n = system_a.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  std::size_t not_better = 0;
  for (std::size_t r = 0; r < n_resamples; ++r) {
    for (auto& i : idx) i = pick(rng);
    const double fa = macro_factual_f1(system_a, references, idx).macro_f1;
    const double fb = macro_factual_f1(system_b, references, idx).macro_f1;
    if (fb >= fa) ++not_better;
  }
  return static_cast<double>(not_better) / n_resamples;
}

}  // namespace factsum
