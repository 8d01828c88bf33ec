#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "factsum/corpus.hpp"
#include "factsum/training.hpp"

using namespace factsum;
namespace ad = factsum::ad;

namespace {

struct Fixture {
  Corpus corpus;
  Vocabulary vocab;
  ModelConfig config;

  explicit Fixture(std::size_t n_reports = 140) {
    CorpusConfig cc;
    cc.n_reports = n_reports;
    cc.seed = 11;
    corpus = generate_corpus(cc);
    vocab = Vocabulary::build(corpus.train);
    config.vocab_size = vocab.size();
    config.embedding_dim = 8;
    config.encoder_hidden = 12;
    config.decoder_hidden = 16;
    config.background_hidden = 6;
    config.max_decode_len = 20;
    config.dropout_rate = 0.0;
  }

  Summarizer model(std::uint64_t seed, double scale = 0.1) const {
    Summarizer m(config);
    m.initialize(seed, scale);
    return m;
  }
};

std::vector<ad::Tensor> grads_of(const Summarizer& m) {
  std::vector<ad::Tensor> g;
  for (ad::ParamId p = 0; p < m.params().size(); ++p) g.push_back(m.params().grad(p));
  return g;
}

double max_abs_diff(const std::vector<ad::Tensor>& a, const std::vector<ad::Tensor>& b) {
  double d = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p)
    for (std::size_t i = 0; i < a[p].size(); ++i) d = std::max(d, std::abs(a[p][i] - b[p][i]));
  return d;
}

std::vector<const Example*> pointers(const std::vector<Example>& ex, std::size_t n) {
  std::vector<const Example*> out;
  for (std::size_t i = 0; i < n && i < ex.size(); ++i) out.push_back(&ex[i]);
  return out;
}

std::string checkpoint_bytes(const Summarizer& m) {
  std::ostringstream os;
  m.params().save(os);
  return os.str();
}

}  // namespace

TEST_CASE("reward combines ROUGE-L and factual accuracy") {
  const RuleSet& rules = default_rules();
  const Tokens ref = {"small", "pleural", "effusion", ".", "no", "pneumothorax"};
  const Tokens hyp = {"small", "pleural", "effusion"};
  const RewardResult r = reward(hyp, ref, RewardWeights{}, rules);
  CHECK(r.rouge == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.factual == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(r.total == doctest::Approx(0.97 * 2.0 / 3.0 + 0.97 * 8.0 / 9.0).epsilon(1e-12));

  const RewardResult same = reward(ref, ref, RewardWeights{}, rules);
  CHECK(same.total == doctest::Approx(1.94));
  const RewardResult empty = reward(Tokens{}, ref, RewardWeights{}, rules);
  CHECK(empty.total == 0.0);
  CHECK(empty.rouge == 0.0);
  CHECK(empty.factual == 0.0);
  const RewardResult rouge_only = reward(hyp, ref, RewardWeights{1.0, 0.0, 0.0}, rules);
  CHECK(rouge_only.total == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("reward weights and modes") {
  RewardWeights w;
  CHECK_NOTHROW(w.validate());
  CHECK_THROWS_AS((RewardWeights{0, 0, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((RewardWeights{1.5, 0, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((RewardWeights{-0.1, 1, 0}.validate()), ConfigError);
  const RewardWeights r = effective_weights(w, TrainMode::kRlR);
  CHECK(r.lambda1 == 0.97);
  CHECK(r.lambda2 == 0.0);
  const RewardWeights c = effective_weights(w, TrainMode::kRlC);
  CHECK(c.lambda1 == 0.0);
  CHECK(c.lambda2 == 0.97);
  const RewardWeights n = effective_weights(w, TrainMode::kNll);
  CHECK(n.lambda1 == 0.0);
  CHECK(n.lambda2 == 0.0);
  CHECK(n.lambda3 == 1.0);
  for (TrainMode m : {TrainMode::kNll, TrainMode::kRlR, TrainMode::kRlC, TrainMode::kRlRC})
    CHECK(parse_train_mode(to_string(m)) == m);
  CHECK_FALSE(parse_train_mode("rl").has_value());
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_decay = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.eval_every_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("decoding consistency") {
  const Fixture f;
  const Summarizer m = f.model(3, 0.3);
  const std::vector<Example> ex = make_examples(f.corpus.dev, f.vocab);
  for (std::size_t i = 0; i < 10; ++i) {
    const DecodeOutput g = greedy_decode(m, ex[i].encoded, 20);
    const DecodeOutput b1 = beam_search(m, ex[i].encoded, 1, 20);
    CHECK(b1.tokens == g.tokens);
    CHECK(b1.total_logprob == doctest::Approx(g.total_logprob).epsilon(1e-12));
    double s = 0.0;
    for (double lp : g.step_logprobs) s += lp;
    CHECK(s == doctest::Approx(g.total_logprob).epsilon(1e-12));
    const DecodeOutput forced = forced_decode(m, ex[i].encoded, g.tokens);
    CHECK(forced.total_logprob == doctest::Approx(g.total_logprob).epsilon(1e-10));
    CHECK(g.tokens.size() <= 20);
  }
}

TEST_CASE("wider beams find sequences at least as likely") {
  const Fixture f(1400);
  Summarizer m = f.model(4);
  const std::vector<Example> train = make_examples(f.corpus.train, f.vocab);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  Adam opt(cfg.learning_rate);
  for (std::size_t s = 0; s < 60; ++s) {
    std::vector<const Example*> batch;
    for (std::size_t b = 0; b < 16; ++b) batch.push_back(&train[(s * 16 + b) % train.size()]);
    nll_step(m, opt, batch, cfg, nullptr);
  }
  const std::vector<Example> dev = make_examples(f.corpus.dev, f.vocab);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const double g = beam_search(m, dev[i].encoded, 1, 20).total_logprob;
    const double b = beam_search(m, dev[i].encoded, 5, 20).total_logprob;
    ok += b >= g - 1e-12;
  }
  CHECK(ok >= 190);
}

TEST_CASE("gradient clipping bounds the applied norm") {
  const Fixture f;
  Summarizer m = f.model(5, 2.0);
  const std::vector<Example> ex = make_examples(f.corpus.train, f.vocab);
  const auto batch = pointers(ex, 4);
  TrainConfig cfg;
  cfg.grad_clip_norm = 1.0;
  Adam opt(1e-3);
  const StepStats s = nll_step(m, opt, batch, cfg, nullptr);
  CHECK(s.grad_norm > 1.0);
  CHECK(m.params().grad_norm() <= 1.0 + 1e-9);
}

TEST_CASE("self-critical step reduces to teacher forcing without reward terms") {
  const Fixture f;
  const std::vector<Example> ex = make_examples(f.corpus.train, f.vocab);
  const auto batch = pointers(ex, 6);
  TrainConfig cfg;
  Summarizer a = f.model(6, 0.3), b = f.model(6, 0.3);
  Adam oa(1e-3), ob(1e-3);
  std::mt19937_64 rng(1);
  ScstOptions skip;
  skip.skip_update = true;
  const StepStats sa = scst_step(a, f.vocab, oa, batch, RewardWeights{0, 0, 1}, cfg,
                                 default_rules(), rng, skip);
  const auto ga = grads_of(a);
  b.params().zero_grad();
  for (const Example* e : batch) {
    ad::Tape t(&b.params());
    t.backward(b.sequence_nll(t, e->encoded), 1.0 / static_cast<double>(batch.size()));
  }
  b.params().clip_grad_norm(cfg.grad_clip_norm);
  CHECK(max_abs_diff(ga, grads_of(b)) < 1e-12);
  CHECK(sa.loss == doctest::Approx(sa.loss_nll));
}

TEST_CASE("self-critical gradient matches finite differences at a frozen advantage") {
  const Fixture f;
  const std::vector<Example> ex = make_examples(f.corpus.train, f.vocab);
  Summarizer m = f.model(7, 0.3);
  TrainConfig cfg;
  cfg.grad_clip_norm = 1e9;
  Adam opt(1e-3);
  bool tested = false;
  for (std::size_t i = 0; i < ex.size() && !tested; ++i) {
    const Example* batch[] = {&ex[i]};
    std::vector<std::vector<int>> sampled;
    ScstOptions o;
    o.skip_update = true;
    o.sampled_tokens = &sampled;
    std::mt19937_64 rng(100 + i);
    scst_step(m, f.vocab, opt, batch, RewardWeights{1, 0, 0}, cfg, default_rules(), rng, o);
    const Tokens hyp = decode_tokens(ex[i].encoded, f.vocab, sampled[0]);
    const Tokens greedy =
        decode_tokens(ex[i].encoded, f.vocab, greedy_decode(m, ex[i].encoded, 20).tokens);
    const double adv = reward(hyp, ex[i].reference, RewardWeights{1, 0, 0}, default_rules()).total -
                       reward(greedy, ex[i].reference, RewardWeights{1, 0, 0}, default_rules()).total;
    if (std::abs(adv) < 1e-3) continue;
    tested = true;
    const auto logp = [&] { return forced_decode(m, ex[i].encoded, sampled[0]).total_logprob; };
    std::mt19937_64 pick(9);
    for (int k = 0; k < 30; ++k) {
      const ad::ParamId p = pick() % m.params().size();
      const std::size_t j = pick() % m.params().value(p).size();
      double& x = m.params().value(p)[j];
      const double saved = x, eps = 1e-5;
      x = saved + eps;
      const double up = logp();
      x = saved - eps;
      const double down = logp();
      x = saved;
      const double numeric = -adv * (up - down) / (2 * eps);
      const double analytic = m.params().grad(p)[j];
      CHECK(std::abs(numeric - analytic) <= 1e-4 * std::max({1e-2, std::abs(numeric), std::abs(analytic)}));
    }
  }
  CHECK(tested);
}

TEST_CASE("policy gradient moves sample likelihood with the advantage sign") {
  const Fixture f;
  const std::vector<Example> ex = make_examples(f.corpus.train, f.vocab);
  std::size_t positive = 0, negative = 0;
  for (std::size_t i = 0; i < ex.size() && (positive < 3 || negative < 3); ++i) {
    Summarizer m = f.model(8, 0.3);
    const Example* batch[] = {&ex[i]};
    std::vector<std::vector<int>> sampled;
    ScstOptions o;
    o.sampled_tokens = &sampled;
    const Tokens greedy =
        decode_tokens(ex[i].encoded, f.vocab, greedy_decode(m, ex[i].encoded, 20).tokens);
    std::mt19937_64 rng(200 + i);
    TrainConfig cfg;
    Adam opt(1e-4);
    const RewardWeights w{1, 1, 0};
    std::mt19937_64 probe = rng;
    std::vector<std::vector<int>> peek;
    ScstOptions dry;
    dry.skip_update = true;
    dry.sampled_tokens = &peek;
    Adam unused(1e-4);
    scst_step(m, f.vocab, unused, batch, w, cfg, default_rules(), probe, dry);
    const double before = forced_decode(m, ex[i].encoded, peek[0]).total_logprob;
    scst_step(m, f.vocab, opt, batch, w, cfg, default_rules(), rng, o);
    REQUIRE(sampled[0] == peek[0]);
    const Tokens hyp = decode_tokens(ex[i].encoded, f.vocab, sampled[0]);
    const double adv = reward(hyp, ex[i].reference, w, default_rules()).total -
                       reward(greedy, ex[i].reference, w, default_rules()).total;
    if (std::abs(adv) < 1e-3) continue;
    const double after = forced_decode(m, ex[i].encoded, sampled[0]).total_logprob;
    if (adv > 0) {
      ++positive;
      CHECK(after > before);
    } else {
      ++negative;
      CHECK(after < before);
    }
  }
  CHECK(positive + negative >= 3);
}

TEST_CASE("self-critical loss is linear in the reward weights") {
  const Fixture f;
  const std::vector<Example> ex = make_examples(f.corpus.train, f.vocab);
  const auto batch = pointers(ex, 8);
  TrainConfig cfg;
  cfg.grad_clip_norm = 1e9;
  const auto grads = [&](RewardWeights w) {
    Summarizer m = f.model(9, 0.3);
    Adam opt(1e-3);
    std::mt19937_64 rng(5);
    ScstOptions o;
    o.skip_update = true;
    scst_step(m, f.vocab, opt, batch, w, cfg, default_rules(), rng, o);
    return grads_of(m);
  };
  const auto gr = grads({1, 0, 0}), gc = grads({0, 1, 0}), gn = grads({0, 0, 1});
  const auto all = grads({0.6, 0.3, 0.1});
  std::vector<ad::Tensor> mix = gr;
  for (std::size_t p = 0; p < mix.size(); ++p)
    for (std::size_t i = 0; i < mix[p].size(); ++i)
      mix[p][i] = 0.6 * gr[p][i] + 0.3 * gc[p][i] + 0.1 * gn[p][i];
  CHECK(max_abs_diff(all, mix) < 1e-10);
}

TEST_CASE("score_predictions") {
  const Fixture f;
  const auto& reports = f.corpus.dev.reports;
  std::vector<Tokens> perfect;
  for (const auto& r : reports) perfect.push_back(r.summary);
  const EvalResult p = score_predictions(perfect, reports, default_rules());
  CHECK(p.rouge.rl.f1 == doctest::Approx(1.0));
  for (std::size_t v = 0; v < kNumVariables; ++v)
    if (p.factual.confusion[v].tp + p.factual.confusion[v].fn > 0)
      CHECK(p.factual.per_variable_f1[v] == 1.0);
  CHECK(p.stopping_metric == doctest::Approx((1.0 + p.factual.macro_f1) / 2.0));

  const EvalResult e = score_predictions(std::vector<Tokens>(reports.size()), reports, default_rules());
  CHECK(e.rouge.rl.f1 == 0.0);

  std::vector<Tokens> rotated = perfect;
  std::vector<Report> rotated_reports = reports;
  std::rotate(rotated.begin(), rotated.begin() + 3, rotated.end());
  std::rotate(rotated_reports.begin(), rotated_reports.begin() + 3, rotated_reports.end());
  const EvalResult q = score_predictions(rotated, rotated_reports, default_rules());
  CHECK(q.rouge.rl.f1 == doctest::Approx(p.rouge.rl.f1).epsilon(1e-12));
  CHECK(q.factual.macro_f1 == doctest::Approx(p.factual.macro_f1).epsilon(1e-12));
  CHECK_THROWS(score_predictions(std::vector<Tokens>(2), reports, default_rules()));
}

TEST_CASE("short training learns and is deterministic") {
  const Fixture f(140);
  DatasetSplit subset = f.corpus.train;
  subset.reports.resize(50);
  TrainConfig cfg;
  cfg.max_steps = 200;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.01;
  cfg.eval_every_steps = 100;
  cfg.seed = 3;
  const RewardWeights w = effective_weights(RewardWeights{}, TrainMode::kNll);
  const auto run = [&](std::vector<TrainLogRecord>& log) {
    Summarizer m = f.model(1);
    train(m, f.vocab, subset, f.corpus.dev, cfg, w, default_rules(),
          [&](const TrainLogRecord& r) { log.push_back(r); });
    return m;
  };
  std::vector<TrainLogRecord> log_a, log_b;
  const Summarizer a = run(log_a);
  const Summarizer b = run(log_b);
  CHECK(checkpoint_bytes(a) == checkpoint_bytes(b));
  CHECK(log_a.size() == log_b.size());
  REQUIRE(log_a.front().dev.has_value());
  CHECK(log_a.front().step == 0);
  const EvalResult dev = evaluate(a, f.vocab, f.corpus.dev.reports, default_rules());
  INFO("dev ROUGE-L ", dev.rouge.rl.f1);
  CHECK(dev.rouge.rl.f1 > 0.3);
}

TEST_CASE("divergence raises a training error") {
  const Fixture f;
  Summarizer m = f.model(2);
  for (std::size_t i = 0; i < m.params().value(0).size(); ++i)
    m.params().value(0)[i] = std::nan("");
  TrainConfig cfg;
  cfg.max_steps = 3;
  cfg.dev_eval_limit = 2;
  try {
    train(m, f.vocab, f.corpus.train, f.corpus.dev, cfg,
          effective_weights(RewardWeights{}, TrainMode::kNll), default_rules());
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("a policy without exploration triggers the zero-advantage warning") {
  const Fixture f;
  Summarizer m(f.config);
  m.zero_parameters();
  m.params().value(m.params().id("out.b"))[Vocabulary::kEos] = 1000.0;
  m.params().value(m.params().id("gen.b"))[0] = 1000.0;
  DatasetSplit subset = f.corpus.train;
  subset.reports.resize(4);
  TrainConfig cfg;
  cfg.mode = TrainMode::kRlR;
  cfg.batch_size = 2;
  cfg.max_steps = 5;
  cfg.dev_eval_limit = 2;
  cfg.learning_rate = 1e-6;
  std::vector<std::string> events;
  train(m, f.vocab, subset, f.corpus.dev, cfg, effective_weights(RewardWeights{}, cfg.mode),
        default_rules(), [&](const TrainLogRecord& r) {
          if (!r.event.empty()) events.push_back(r.event);
        });
  CHECK(std::any_of(events.begin(), events.end(),
                    [](const std::string& e) { return e.rfind("warning:", 0) == 0; }));
}
