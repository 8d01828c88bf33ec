#include "factsum/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace factsum {

void RewardWeights::validate() const {
  for (double l : {lambda1, lambda2, lambda3})
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("reward weights must lie in [0,1]");
  if (lambda1 == 0.0 && lambda2 == 0.0 && lambda3 == 0.0)
    throw ConfigError("at least one reward weight must be nonzero");
}

std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kNll: return "nll";
    case TrainMode::kRlR: return "rl_r";
    case TrainMode::kRlC: return "rl_c";
    case TrainMode::kRlRC: return "rl_rc";
  }
  return "nll";
}

std::optional<TrainMode> parse_train_mode(std::string_view s) {
  for (TrainMode m : {TrainMode::kNll, TrainMode::kRlR, TrainMode::kRlC, TrainMode::kRlRC})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

RewardWeights effective_weights(const RewardWeights& w, TrainMode mode) {
  RewardWeights e = w;
  switch (mode) {
    case TrainMode::kNll: e.lambda1 = 0.0; e.lambda2 = 0.0; e.lambda3 = 1.0; break;
    case TrainMode::kRlR: e.lambda2 = 0.0; break;
    case TrainMode::kRlC: e.lambda1 = 0.0; break;
    case TrainMode::kRlRC: break;
  }
  return e;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0 && std::isfinite(learning_rate)))
    throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be positive");
  if (eval_every_steps == 0) throw ConfigError("eval_every_steps must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0,1]");
  if (patience_steps == 0) throw ConfigError("patience_steps must be positive");
  if (max_steps == 0) throw ConfigError("max_steps must be positive");
  if (threads == 0) throw ConfigError("threads must be positive");
}

namespace {

ad::ParameterSet& mutable_params(const Summarizer& model) {
  // Inference tapes only read parameter values.
  return const_cast<Summarizer&>(model).params();
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double safe_log(double p) { return std::log(std::max(p, ad::kLogFloor)); }

DecodeOutput greedy_on_tape(ad::Tape& tape, const Summarizer& model, const EncodedExample& ex,
                            const EncoderOutput& enc, std::size_t max_len,
                            std::vector<ad::Var>* logprob_vars = nullptr) {
  DecoderState st = model.initial_state(enc);
  DecodeOutput out;
  int prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    StepOutput step = model.decode_step(tape, ex, enc, st, prev);
    const auto dist = step.dist.value().values();
    const int tok = static_cast<int>(argmax(dist));
    if (logprob_vars)
      logprob_vars->push_back(ad::log(ad::pick(step.dist, static_cast<std::size_t>(tok))));
    const double lp = safe_log(dist[static_cast<std::size_t>(tok)]);
    out.tokens.push_back(tok);
    out.step_logprobs.push_back(lp);
    out.total_logprob += lp;
    if (tok == Vocabulary::kEos) break;
    st = step.next;
    prev = tok;
  }
  return out;
}

}  // namespace

DecodeOutput greedy_decode(const Summarizer& model, const EncodedExample& ex, std::size_t max_len) {
  ad::Tape tape(&mutable_params(model), false);
  return greedy_on_tape(tape, model, ex, model.encode(tape, ex), max_len);
}

DecodeOutput forced_decode(const Summarizer& model, const EncodedExample& ex,
                           const std::vector<int>& tokens) {
  ad::Tape tape(&mutable_params(model), false);
  const EncoderOutput enc = model.encode(tape, ex);
  DecoderState st = model.initial_state(enc);
  DecodeOutput out;
  int prev = Vocabulary::kBos;
  for (int tok : tokens) {
    StepOutput step = model.decode_step(tape, ex, enc, st, prev);
    const double lp = safe_log(step.dist.value()[static_cast<std::size_t>(tok)]);
    out.tokens.push_back(tok);
    out.step_logprobs.push_back(lp);
    out.total_logprob += lp;
    st = step.next;
    prev = tok;
  }
  return out;
}

DecodeOutput beam_search(const Summarizer& model, const EncodedExample& ex, std::size_t beam_size,
                         std::size_t max_len) {
  if (beam_size == 0) throw ConfigError("beam_size must be positive");
  ad::Tape tape(&mutable_params(model), false);
  const EncoderOutput enc = model.encode(tape, ex);

  struct Hyp {
    DecodeOutput out;
    DecoderState state;
  };
  struct Candidate {
    std::size_t parent;
    int token;
    double logprob;
    double score;
  };
  std::vector<Hyp> live{Hyp{{}, model.initial_state(enc)}};
  std::vector<DecodeOutput> done;

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Candidate> cands;
    std::vector<DecoderState> next_states;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const int prev = live[h].out.tokens.empty() ? Vocabulary::kBos : live[h].out.tokens.back();
      StepOutput step = model.decode_step(tape, ex, enc, live[h].state, prev);
      next_states.push_back(step.next);
      const auto dist = step.dist.value().values();
      std::vector<std::size_t> order(dist.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::size_t k = std::min(beam_size, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
                        });
      for (std::size_t j = 0; j < k; ++j) {
        const double lp = safe_log(dist[order[j]]);
        cands.push_back({h, static_cast<int>(order[j]), lp, live[h].out.total_logprob + lp});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.score > b.score;
    });
    std::vector<Hyp> next;
    for (const auto& c : cands) {
      if (next.size() + done.size() >= beam_size) break;
      Hyp h{live[c.parent].out, next_states[c.parent]};
      h.out.tokens.push_back(c.token);
      h.out.step_logprobs.push_back(c.logprob);
      h.out.total_logprob = c.score;
      if (c.token == Vocabulary::kEos) done.push_back(std::move(h.out));
      else next.push_back(std::move(h));
    }
    live = std::move(next);
    if (done.size() >= beam_size) break;
    // Scores only decrease, so a finished hypothesis beating every live one is final.
    if (!done.empty()) {
      double best_done = -INFINITY, best_live = -INFINITY;
      for (const auto& d : done) best_done = std::max(best_done, d.total_logprob);
      for (const auto& h : live) best_live = std::max(best_live, h.out.total_logprob);
      if (best_done >= best_live) break;
    }
  }
  const auto better = [](const DecodeOutput& a, const DecodeOutput& b) {
    return a.total_logprob < b.total_logprob;
  };
  if (!done.empty()) return *std::max_element(done.begin(), done.end(), better);
  DecodeOutput best;
  best.total_logprob = -INFINITY;
  for (const auto& h : live)
    if (h.out.total_logprob > best.total_logprob) best = h.out;
  return best;
}

SampledSequence sample_decode(ad::Tape& tape, const Summarizer& model, const EncodedExample& ex,
                              const EncoderOutput& enc, std::mt19937_64& rng,
                              std::size_t max_len) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DecoderState st = model.initial_state(enc);
  SampledSequence s;
  std::vector<ad::Var> terms;
  int prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    StepOutput step = model.decode_step(tape, ex, enc, st, prev);
    const auto dist = step.dist.value().values();
    const double u = unif(rng);
    double cum = 0.0;
    std::size_t tok = dist.size() - 1;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      cum += dist[i];
      if (u < cum) {
        tok = i;
        break;
      }
    }
    // Guard against rounding landing on a zero-probability tail entry.
    while (tok > 0 && dist[tok] <= 0.0) --tok;
    ad::Var lp = ad::log(ad::pick(step.dist, tok));
    terms.push_back(lp);
    s.output.tokens.push_back(static_cast<int>(tok));
    s.output.step_logprobs.push_back(lp.value().item());
    s.output.total_logprob += lp.value().item();
    if (static_cast<int>(tok) == Vocabulary::kEos) break;
    st = step.next;
    prev = static_cast<int>(tok);
  }
  s.log_prob = ad::sum(terms);
  return s;
}

RewardResult reward(std::span<const std::string> hyp, std::span<const std::string> ref,
                    const RewardWeights& weights, const RuleSet& rules) {
  RewardResult r;
  if (hyp.empty()) return r;
  r.rouge = rouge_l(hyp, ref).f1;
  r.factual = factual_accuracy(extract_facts(hyp, rules), extract_facts(ref, rules));
  r.total = weights.lambda1 * r.rouge + weights.lambda2 * r.factual;
  return r;
}

void Adam::step(ad::ParameterSet& params) {
  if (m_.empty()) {
    for (ad::ParamId p = 0; p < params.size(); ++p) {
      m_.emplace_back(params.value(p).shape());
      v_.emplace_back(params.value(p).shape());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (ad::ParamId p = 0; p < params.size(); ++p) {
    auto w = params.value(p).values();
    const auto g = params.grad(p).values();
    auto m = m_[p].values();
    auto v = v_[p].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::vector<Example> make_examples(const DatasetSplit& split, const Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(split.reports.size());
  for (const auto& r : split.reports) out.push_back({encode_example(r, vocab), r.summary});
  return out;
}

namespace {

void finish_update(Summarizer& model, Adam& opt, const TrainConfig& config, StepStats& stats,
                   bool update) {
  stats.grad_norm = model.params().clip_grad_norm(config.grad_clip_norm);
  if (!std::isfinite(stats.loss) || !std::isfinite(stats.grad_norm))
    throw TrainingError("non-finite loss or gradient");
  if (update) opt.step(model.params());
}

}  // namespace

StepStats nll_step(Summarizer& model, Adam& opt, std::span<const Example* const> batch,
                   const TrainConfig& config, std::mt19937_64* dropout, double scale) {
  if (batch.empty()) throw ConfigError("empty batch");
  model.params().zero_grad();
  StepStats stats;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const Example* ex : batch) {
    ad::Tape tape(&model.params());
    ad::Var nll = model.sequence_nll(tape, ex->encoded, dropout);
    ad::Var loss = ad::scale(nll, scale);
    tape.backward(loss, inv);
    stats.loss_nll += nll.value().item() * inv;
    stats.loss += loss.value().item() * inv;
  }
  finish_update(model, opt, config, stats, true);
  return stats;
}

StepStats scst_step(Summarizer& model, const Vocabulary& vocab, Adam& opt,
                    std::span<const Example* const> batch, const RewardWeights& weights,
                    const TrainConfig& config,
                    const RuleSet& rules, std::mt19937_64& rng, const ScstOptions& options) {
  if (batch.empty()) throw ConfigError("empty batch");
  model.params().zero_grad();
  StepStats stats;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const std::size_t max_len = model.config().max_decode_len;
  // Per-component rewards; the combined weights are applied to the advantages.
  const RewardWeights unit{1.0, 1.0, 0.0};
  for (const Example* ex : batch) {
    ad::Tape tape(&model.params());
    const EncoderOutput enc = model.encode(tape, ex->encoded);

    SampledSequence sample;
    std::vector<ad::Var> greedy_terms;
    const DecodeOutput greedy =
        greedy_on_tape(tape, model, ex->encoded, enc, max_len,
                       options.force_sample_greedy ? &greedy_terms : nullptr);
    if (options.force_sample_greedy) {
      sample.output = greedy;
      sample.log_prob = ad::sum(greedy_terms);
    } else {
      sample = sample_decode(tape, model, ex->encoded, enc, rng, max_len);
    }

    if (options.sampled_tokens) options.sampled_tokens->push_back(sample.output.tokens);
    const Tokens hyp_s = decode_tokens(ex->encoded, vocab, sample.output.tokens);
    const Tokens hyp_g = decode_tokens(ex->encoded, vocab, greedy.tokens);
    const RewardResult rs = reward(hyp_s, ex->reference, unit, rules);
    const RewardResult rg = reward(hyp_g, ex->reference, unit, rules);
    const double adv_r = rs.rouge - rg.rouge;
    const double adv_c = rs.factual - rg.factual;
    const double coeff = weights.lambda1 * adv_r + weights.lambda2 * adv_c;
    const double logp = sample.log_prob.value().item();

    ad::Var nll = model.sequence_nll(tape, ex->encoded, enc);
    ad::Var loss = ad::scale(nll, weights.lambda3);
    if (coeff != 0.0) loss = ad::add(loss, ad::scale(sample.log_prob, -coeff));
    else ++stats.zero_advantage;
    tape.backward(loss, inv);

    stats.loss_rouge += -adv_r * logp * inv;
    stats.loss_factual += -adv_c * logp * inv;
    stats.loss_nll += nll.value().item() * inv;
    stats.loss += loss.value().item() * inv;
    stats.reward_sample += (weights.lambda1 * rs.rouge + weights.lambda2 * rs.factual) * inv;
    stats.reward_greedy += (weights.lambda1 * rg.rouge + weights.lambda2 * rg.factual) * inv;
  }
  finish_update(model, opt, config, stats, !options.skip_update);
  return stats;
}

EvalResult evaluate(const Summarizer& model, const Vocabulary& vocab,
                    const std::vector<Report>& reports, const RuleSet& rules,
                    std::size_t beam_size, std::size_t threads) {
  EvalResult res;
  if (reports.empty()) throw ConfigError("evaluate: no reports");
  const std::size_t n = reports.size();
  const std::size_t max_len = model.config().max_decode_len;
  res.predictions.assign(n, {});
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      const EncodedExample ex = encode_example(reports[i], vocab);
      const DecodeOutput out =
          beam_size <= 1 ? greedy_decode(model, ex, max_len) : beam_search(model, ex, beam_size, max_len);
      res.predictions[i] = decode_tokens(ex, vocab, out.tokens);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  return score_predictions(std::move(res.predictions), reports, rules);
}

EvalResult score_predictions(std::vector<Tokens> predictions, const std::vector<Report>& reports,
                             const RuleSet& rules) {
  if (predictions.size() != reports.size())
    throw ConfigError("score_predictions: " + std::to_string(predictions.size()) +
                      " predictions for " + std::to_string(reports.size()) + " reports");
  if (reports.empty()) throw ConfigError("score_predictions: no reports");
  EvalResult res;
  res.predictions = std::move(predictions);
  std::vector<Tokens> refs;
  std::vector<FactVector> pred_facts, ref_facts;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    refs.push_back(reports[i].summary);
    pred_facts.push_back(extract_facts(res.predictions[i], rules));
    ref_facts.push_back(extract_facts(reports[i].summary, rules));
  }
  res.rouge = corpus_rouge(res.predictions, refs);
  res.factual = macro_factual_f1(pred_facts, ref_facts);
  res.stopping_metric = 0.5 * (res.rouge.rl.f1 + res.factual.macro_f1);
  return res;
}

double stopping_metric(const Summarizer& model, const Vocabulary& vocab, const DatasetSplit& dev,
                       const RuleSet& rules, std::size_t threads) {
  return evaluate(model, vocab, dev.reports, rules, 1, threads).stopping_metric;
}

TrainResult train(Summarizer& model, const Vocabulary& vocab, const DatasetSplit& train_split,
                  const DatasetSplit& dev_split, const TrainConfig& config,
                  const RewardWeights& weights, const RuleSet& rules, const TrainLogger& log) {
  config.validate();
  weights.validate();
  if (train_split.reports.empty()) throw ConfigError("empty training split");
  if (dev_split.reports.empty()) throw ConfigError("empty dev split");
  if (model.config().vocab_size != vocab.size())
    throw ConfigError("model vocabulary size does not match the vocabulary");

  const RewardWeights w = effective_weights(weights, config.mode);
  const bool rl = config.mode != TrainMode::kNll;
  const std::vector<Example> examples = make_examples(train_split, vocab);
  std::vector<Report> dev(dev_split.reports.begin(),
                          dev_split.reports.begin() +
                              static_cast<std::ptrdiff_t>(config.dev_eval_limit == 0
                                  ? dev_split.reports.size()
                                  : std::min(config.dev_eval_limit, dev_split.reports.size())));

  std::mt19937_64 order_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x5bd1e995ULL);
  std::mt19937_64 sample_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam opt(config.learning_rate);

  TrainResult result;
  std::vector<ad::Tensor> best_params;
  auto snapshot = [&] {
    best_params.clear();
    for (ad::ParamId p = 0; p < model.params().size(); ++p)
      best_params.push_back(model.params().value(p));
  };
  auto emit = [&](TrainLogRecord rec) {
    if (log) log(rec);
  };


  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), order_rng);
  std::size_t cursor = 0;
  std::size_t epoch_batches = 0, epoch_all_zero = 0;

  auto evaluate_now = [&](std::size_t step, const StepStats& stats, std::size_t& since) {
    EvalResult ev = evaluate(model, vocab, dev, rules, 1, config.threads);
    ev.predictions.clear();
    TrainLogRecord rec{step, opt.learning_rate(), stats, ev, ""};
    bool stop = false;
    if (ev.stopping_metric > result.best_metric) {
      result.best_metric = ev.stopping_metric;
      result.best_step = step;
      snapshot();
      since = step;
      rec.event = "best";
    } else if (step - since >= config.patience_steps) {
      if (result.decays >= config.max_decays) {
        rec.event = "stop";
        stop = true;
      } else {
        opt.set_learning_rate(opt.learning_rate() * config.lr_decay);
        ++result.decays;
        since = step;
        rec.event = "decay";
      }
    }
    emit(rec);
    return stop;
  };

  std::size_t since = 0;
  evaluate_now(0, StepStats{}, since);
  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    std::vector<const Example*> batch;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        if (rl && epoch_batches > 0 && epoch_all_zero == epoch_batches)
          emit({step, opt.learning_rate(), {}, std::nullopt,
                "warning: every advantage in the last epoch was zero"});
        epoch_batches = epoch_all_zero = 0;
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      batch.push_back(&examples[order[cursor++]]);
    }
    StepStats stats;
    try {
      stats = rl ? scst_step(model, vocab, opt, batch, w, config, rules, sample_rng)
                 : nll_step(model, opt, batch, config, &dropout_rng);
    } catch (const TrainingError& e) {
      throw TrainingError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    result.steps = step;
    if (rl) {
      ++epoch_batches;
      if (stats.zero_advantage == batch.size()) ++epoch_all_zero;
    }
    emit({step, opt.learning_rate(), stats, std::nullopt, ""});
    if (step % config.eval_every_steps == 0 || step == config.max_steps)
      if (evaluate_now(step, stats, since)) break;
  }
  if (!best_params.empty())
    for (ad::ParamId p = 0; p < model.params().size(); ++p) model.params().value(p) = best_params[p];
  return result;
}

}  // namespace factsum
