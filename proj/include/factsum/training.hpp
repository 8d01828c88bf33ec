#pragma once

// Teacher-forcing pretraining, self-critical policy-gradient fine-tuning and
// decoding (greedy, sampling, beam search).

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "factsum/factext.hpp"
#include "factsum/metrics.hpp"
#include "factsum/model.hpp"

namespace factsum {

// Each weight lies in [0,1] and at least one is nonzero.
struct RewardWeights {
  double lambda1 = 0.97;  // ROUGE-L reward
  double lambda2 = 0.97;  // factual accuracy reward
  double lambda3 = 0.03;  // NLL term

  void validate() const;  // throws ConfigError
};

enum class TrainMode { kNll, kRlR, kRlC, kRlRC };
std::string_view to_string(TrainMode m);
std::optional<TrainMode> parse_train_mode(std::string_view s);

// rl_r zeroes lambda2, rl_c zeroes lambda1; nll uses the NLL term only.
RewardWeights effective_weights(const RewardWeights& w, TrainMode mode);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  double grad_clip_norm = 5.0;
  std::size_t eval_every_steps = 500;
  double lr_decay = 0.5;
  std::size_t patience_steps = 2500;
  std::size_t max_decays = 3;
  std::size_t max_steps = 2000;
  // Dev examples used by the stopping metric (0 = all).
  std::size_t dev_eval_limit = 0;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::kNll;
  std::size_t threads = 1;

  void validate() const;  // throws ConfigError
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodeOutput {
  std::vector<int> tokens;  // extended ids; ends with kEos when emitted
  std::vector<double> step_logprobs;
  double total_logprob = 0.0;
};

DecodeOutput greedy_decode(const Summarizer& model, const EncodedExample& ex,
                           std::size_t max_len);
DecodeOutput beam_search(const Summarizer& model, const EncodedExample& ex,
                         std::size_t beam_size, std::size_t max_len);
// Per-step log-probabilities of a given token sequence under the model.
DecodeOutput forced_decode(const Summarizer& model, const EncodedExample& ex,
                           const std::vector<int>& tokens);

// Multinomial sample (temperature 1) recorded on `tape`; log_prob is the
// differentiable sum of the per-step log-probabilities.
struct SampledSequence {
  DecodeOutput output;
  ad::Var log_prob;
};
SampledSequence sample_decode(ad::Tape& tape, const Summarizer& model, const EncodedExample& ex,
                              const EncoderOutput& enc, std::mt19937_64& rng,
                              std::size_t max_len);

struct RewardResult {
  double total = 0.0;
  double rouge = 0.0;    // r_R
  double factual = 0.0;  // r_C
};

// r = lambda1 * ROUGE-L F1 + lambda2 * factual accuracy. An empty hypothesis
// scores 0.
RewardResult reward(std::span<const std::string> hyp, std::span<const std::string> ref,
                    const RewardWeights& weights, const RuleSet& rules);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ad::ParameterSet& params);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<ad::Tensor> m_, v_;
};

// A training example: the encoded report plus what rewards need.
struct Example {
  EncodedExample encoded;
  Tokens reference;
};
std::vector<Example> make_examples(const DatasetSplit& split, const Vocabulary& vocab);

struct StepStats {
  double loss = 0.0;
  double loss_rouge = 0.0;    // L_R, batch mean
  double loss_factual = 0.0;  // L_C, batch mean
  double loss_nll = 0.0;      // L_NLL, batch mean
  double reward_sample = 0.0;
  double reward_greedy = 0.0;
  std::size_t zero_advantage = 0;
  double grad_norm = 0.0;  // before clipping
};

// One teacher-forcing update on loss scale * mean NLL. dropout == nullptr
// disables dropout.
StepStats nll_step(Summarizer& model, Adam& opt, std::span<const Example* const> batch,
                   const TrainConfig& config, std::mt19937_64* dropout, double scale = 1.0);

struct ScstOptions {
  // Replace the sampled sequence by the greedy one (zero advantage).
  bool force_sample_greedy = false;
  // Skip the optimizer update (gradients are left in the parameter set).
  bool skip_update = false;
  // When set, receives the sampled sequence of every example.
  std::vector<std::vector<int>>* sampled_tokens = nullptr;
};

// One self-critical update:
//   loss = lambda1 * (-A_R log P(y_s)) + lambda2 * (-A_C log P(y_s)) + lambda3 * NLL(ref)
// with A_k = r_k(y_s) - r_k(y_g). Dropout is off in fine-tuning.
StepStats scst_step(Summarizer& model, const Vocabulary& vocab, Adam& opt,
                    std::span<const Example* const> batch, const RewardWeights& weights, const TrainConfig& config,
                    const RuleSet& rules, std::mt19937_64& rng, const ScstOptions& options = {});

struct EvalResult {
  RougeScores rouge;
  FactualReport factual;
  double stopping_metric = 0.0;  // (ROUGE-L F1 + macro factual F1) / 2
  std::vector<Tokens> predictions;
};

// Greedy (beam_size <= 1) or beam decoding of every example, then scoring.
// Per-example work is split over `threads` workers; results keep input order.
EvalResult evaluate(const Summarizer& model, const Vocabulary& vocab,
                    const std::vector<Report>& reports, const RuleSet& rules,
                    std::size_t beam_size = 1, std::size_t threads = 1);

// Scores given predictions against the reports' summaries.
EvalResult score_predictions(std::vector<Tokens> predictions, const std::vector<Report>& reports,
                             const RuleSet& rules);

double stopping_metric(const Summarizer& model, const Vocabulary& vocab, const DatasetSplit& dev,
                       const RuleSet& rules, std::size_t threads = 1);

struct TrainLogRecord {
  std::size_t step = 0;
  double learning_rate = 0.0;
  StepStats stats;
  std::optional<EvalResult> dev;  // present on evaluation steps (no predictions)
  std::string event;              // "", "decay", "best", "stop", "warning: ..."
};

struct TrainResult {
  double best_metric = -1.0;
  std::size_t best_step = 0;
  std::size_t steps = 0;
  std::size_t decays = 0;
};

using TrainLogger = std::function<void(const TrainLogRecord&)>;

// Runs config.mode (nll or an RL mode) from the model's current parameters,
// evaluating on dev every eval_every_steps and keeping the best parameters
// by the stopping metric; the model holds them on return.
TrainResult train(Summarizer& model, const Vocabulary& vocab, const DatasetSplit& train_split,
                  const DatasetSplit& dev_split, const TrainConfig& config,
                  const RewardWeights& weights, const RuleSet& rules,
                  const TrainLogger& log = {});

}  // namespace factsum
