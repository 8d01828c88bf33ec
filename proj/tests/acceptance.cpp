// Acceptance suite: one PASS/FAIL line per criterion with pinned tolerances.
//
//   acceptance                   all criteria
//   acceptance --criteria 1,2,3  a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "factsum/analysis.hpp"
#include "factsum/autodiff.hpp"
#include "factsum/corpus.hpp"
#include "factsum/factext.hpp"
#include "factsum/metrics.hpp"
#include "factsum/model.hpp"
#include "factsum/training.hpp"
#include "json.hpp"
#include "support/oracles.hpp"

using namespace factsum;

namespace {

// ---- pinned settings -------------------------------------------------------------

constexpr double kGradTolerance = 1e-4;
constexpr double kGradAbsFloor = 1e-6;
constexpr int kGradSeeds = 20;
constexpr std::size_t kExtractorSamples = 10000;
constexpr double kFindingsAccuracyFloor = 0.95;
constexpr double kUpdateTolerance = 1e-10;

// Benchmark: 2000/400/400 reports, seeds 1..3.
constexpr std::size_t kReports = 2800;
constexpr std::size_t kNllSteps = 1000;
constexpr std::size_t kRlSteps = 800;
constexpr double kNllLearningRate = 1e-3;
constexpr double kRlLearningRate = 3e-4;
constexpr std::size_t kBatch = 16;
constexpr std::size_t kEvalEvery = 100;
constexpr double kFactualGain = 0.05;
constexpr double kFactualMaxDrop = 0.01;
constexpr double kRougeGain = 0.01;
constexpr std::size_t kBootstrapResamples = 5000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << x;
  return os.str();
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- 1: metric oracles ---------------------------------------------------------------

Outcome criterion_metrics() {
  const auto t0 = Clock::now();
  const auto seqs = oracle::all_sequences(8);
  const std::vector<std::string> alphabet = {"x", "y", "z"};
  std::vector<Tokens> tok(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (int s : seqs[i]) tok[i].push_back(alphabet[static_cast<std::size_t>(s)]);

  // Subsequence membership table for every sequence, by brute-force enumeration.
  const std::size_t n = seqs.size();
  const std::size_t words = (n + 63) / 64;
  std::vector<std::uint64_t> member(n * words, 0);
  std::vector<std::vector<std::size_t>> subs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& s : oracle::subsequences(seqs[i])) {
      const std::size_t k = oracle::sequence_index(s);
      member[i * words + k / 64] |= std::uint64_t{1} << (k % 64);
      subs[i].push_back(k);
    }
    std::sort(subs[i].begin(), subs[i].end(), std::greater<>());  // longest first
  }

  // LCS is invariant under renaming the alphabet in both sequences, so the
  // first argument ranges over sequences whose symbols first appear in order
  // x, y, z; the second ranges over all sequences.
  auto canonical = [](const std::vector<int>& s) {
    int next = 0;
    for (int x : s) {
      if (x > next) return false;
      if (x == next) ++next;
    }
    return true;
  };
  std::size_t pairs = 0, mismatches = 0;
  for (std::size_t a = 0; a < n; ++a) {
    if (!canonical(seqs[a])) continue;
    for (std::size_t b = 0; b < n; ++b) {
      std::size_t lcs = 0;
      for (std::size_t k : subs[a])
        if (member[b * words + k / 64] >> (k % 64) & 1) {
          lcs = seqs[k].size();
          break;
        }
      const PRF got = rouge_l(tok[a], tok[b]);
      const double la = static_cast<double>(seqs[a].size()), lb = static_cast<double>(seqs[b].size());
      const double want = lcs == 0 ? 0.0 : 2.0 * lcs / (la + lb);
      if (lcs_length(tok[a], tok[b]) != lcs || std::abs(got.f1 - want) > 1e-12) ++mismatches;
      ++pairs;
    }
  }

  // Hand-computed fixtures.
  std::vector<std::string> failed;
  auto near = [](double a, double b) { return std::abs(a - b) < 1e-12; };
  {
    const PRF r = rouge_n(tokenize("a b b"), tokenize("b b b"), 1);
    if (!near(r.precision, 2.0 / 3) || !near(r.recall, 2.0 / 3) || !near(r.f1, 2.0 / 3))
      failed.push_back("rouge1");
  }
  {
    const PRF r = rouge_l(tokenize("pneumonia is not seen"), tokenize("pneumonia is seen"));
    if (!near(r.precision, 0.75) || !near(r.recall, 1.0) || !near(r.f1, 6.0 / 7)) failed.push_back("rougeL");
  }
  if (!near(rouge_l(tokenize("d c b a"), tokenize("a b c d")).f1, 0.25)) failed.push_back("reversed");
  {
    FactVector a, b;
    b[3] = FactStatus::kPositive;
    if (!near(factual_accuracy(a, b), 8.0 / 9)) failed.push_back("accuracy 8/9");
    FactVector c, d;
    for (std::size_t v = 0; v < kNumVariables; ++v) {
      c[v] = FactStatus::kPositive;
      d[v] = FactStatus::kNegative;
    }
    if (!near(factual_accuracy(c, d), 0.0)) failed.push_back("accuracy 0");
  }
  {
    // Variable 1: tp=1 fp=1 fn=0; variable 2: tp=1 fp=0 fn=2 over 4 examples.
    const auto P = FactStatus::kPositive, N = FactStatus::kNegative;
    std::vector<FactVector> pred(4), ref(4);
    const FactStatus p1[] = {P, P, N, N}, r1[] = {P, N, N, N};
    const FactStatus p2[] = {P, N, N, N}, r2[] = {P, P, P, N};
    for (int i = 0; i < 4; ++i) {
      pred[i][1] = p1[i];
      ref[i][1] = r1[i];
      pred[i][2] = p2[i];
      ref[i][2] = r2[i];
    }
    const auto rep = macro_factual_f1(pred, ref);
    const double two_var = (rep.per_variable_f1[1] + rep.per_variable_f1[2]) / 2;
    if (!near(rep.per_variable_f1[1], 2.0 / 3) || !near(rep.per_variable_f1[2], 0.5) ||
        !near(two_var, 7.0 / 12) || !near(rep.macro_f1, (2.0 / 3 + 0.5) / kNumVariables))
      failed.push_back("macro 7/12");
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && failed.empty() && secs < 60.0;
  o.detail = std::to_string(pairs) + " LCS pairs (lengths <= 8, 3 symbols) with " +
             std::to_string(mismatches) + " mismatches; fixtures " +
             (failed.empty() ? std::string("all match") : "failed: " + failed.front()) + "; " +
             fmt(secs, 1) + "s (limit 60s)";
  return o;
}

// ---- 2: gradient integrity -------------------------------------------------------------

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t failures = 0, checks = 0;
  ad::GradCheckOptions opt;
  opt.tolerance = kGradTolerance;
  opt.abs_floor = kGradAbsFloor;
  for (int seed = 1; seed <= kGradSeeds; ++seed) {
    opt.seed = static_cast<std::uint64_t>(seed);
    for (const auto& c : oracle::op_cases()) {
      ad::ParameterSet ps = oracle::op_case_params(c, static_cast<std::uint64_t>(seed));
      const auto r = ad::grad_check([&](ad::Tape& t) { return oracle::project(t, c.body(t)); }, ps, opt);
      ++checks;
      failures += !r.passed;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_name = c.name;
      }
    }
    // Full summarizer NLL on a two-report micro-batch at tiny dims.
    CorpusConfig cc;
    cc.n_reports = 40;
    cc.seed = static_cast<std::uint64_t>(seed);
    const Corpus corpus = generate_corpus(cc);
    const Vocabulary vocab = Vocabulary::build(corpus.train, 30);
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.embedding_dim = 4;
    mc.encoder_hidden = mc.decoder_hidden = mc.background_hidden = 6;
    mc.dropout_rate = 0.0;
    Summarizer model(mc);
    model.initialize(static_cast<std::uint64_t>(seed), 0.5);
    const EncodedExample e1 = encode_example(corpus.train.reports[0], vocab);
    const EncodedExample e2 = encode_example(corpus.train.reports[1], vocab);
    const auto r = ad::grad_check(
        [&](ad::Tape& t) { return ad::add(model.sequence_nll(t, e1), model.sequence_nll(t, e2)); },
        model.params(), opt);
    ++checks;
    failures += !r.passed;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = "summarizer_nll";
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures == 0 && secs < 300.0;
  o.detail = std::to_string(checks) + " checks (" + std::to_string(oracle::op_cases().size()) +
             " ops + summarizer NLL, " + std::to_string(kGradSeeds) + " seeds), " +
             std::to_string(failures) + " failures; worst rel err " + fmt(worst * 1e6, 3) +
             "e-6 (" + worst_name + ") vs tol 1e-4; " + fmt(secs, 1) + "s (limit 300s)";
  return o;
}

// ---- 3: extractor fidelity -------------------------------------------------------------

Outcome criterion_extractor() {
  const auto t0 = Clock::now();
  const RuleSet& rules = default_rules();
  CorpusConfig cc;
  std::size_t exact = 0;
  std::array<std::size_t, kNumVariables> correct{};
  for (std::size_t i = 0; i < kExtractorSamples; ++i) {
    const Report r = generate_report(cc, 1000003ULL * (i + 1), "x" + std::to_string(i));
    exact += extract_facts(r.summary, rules) == r.facts;
    const FactVector f = extract_facts(r.findings, rules);
    for (std::size_t v = 1; v < kNumVariables; ++v) correct[v] += f.present(v) == r.facts.present(v);
  }
  double min_acc = 2.0;
  std::string min_var;
  for (std::size_t v = 1; v < kNumVariables; ++v) {
    const double acc = static_cast<double>(correct[v]) / kExtractorSamples;
    if (acc < min_acc) {  // first variable wins ties
      min_acc = acc;
      min_var = std::string(kVariableNames[v]);
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = exact == kExtractorSamples && min_acc >= kFindingsAccuracyFloor && secs < 120.0;
  o.detail = "summaries exact " + std::to_string(exact) + "/" + std::to_string(kExtractorSamples) +
             "; findings min per-variable accuracy " + fmt(min_acc) + " (" + min_var +
             ") vs floor 0.95; " + fmt(secs, 1) + "s (limit 120s)";
  return o;
}

// ---- 7: self-critical contract ---------------------------------------------------------

Outcome criterion_self_critical() {
  CorpusConfig cc;
  cc.n_reports = 70;
  const Corpus corpus = generate_corpus(cc);
  const Vocabulary vocab = Vocabulary::build(corpus.train);
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.embedding_dim = 8;
  mc.encoder_hidden = mc.decoder_hidden = mc.background_hidden = 12;
  mc.max_decode_len = 20;
  Summarizer a(mc), b(mc);
  a.initialize(7);
  b.initialize(7);
  const auto examples = make_examples(corpus.train, vocab);
  std::vector<const Example*> batch;
  for (std::size_t i = 0; i < 8; ++i) batch.push_back(&examples[i]);

  TrainConfig tc;
  const RewardWeights w;  // 0.97 / 0.97 / 0.03
  Adam opt_a(tc.learning_rate), opt_b(tc.learning_rate);
  std::mt19937_64 rng(1);
  ScstOptions so;
  so.force_sample_greedy = true;
  const StepStats sa = scst_step(a, vocab, opt_a, batch, w, tc, default_rules(), rng, so);
  nll_step(b, opt_b, batch, tc, nullptr, w.lambda3);

  double max_diff = 0.0, max_update = 0.0;
  Summarizer init(mc);
  init.initialize(7);
  for (ad::ParamId p = 0; p < a.params().size(); ++p) {
    const auto va = a.params().value(p).values();
    const auto vb = b.params().value(p).values();
    const auto v0 = init.params().value(p).values();
    for (std::size_t i = 0; i < va.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(va[i] - vb[i]));
      max_update = std::max(max_update, std::abs(va[i] - v0[i]));
    }
  }
  Outcome o;
  o.pass = max_diff <= kUpdateTolerance && sa.zero_advantage == batch.size() && max_update > 0.0;
  o.detail = "max |update difference| " + fmt(max_diff * 1e12, 3) + "e-12 vs tol 1e-10; " +
             std::to_string(sa.zero_advantage) + "/" + std::to_string(batch.size()) +
             " zero advantages; max update " + fmt(max_update, 6);
  return o;
}

// ---- 4, 5, 6, 8, 9: synthetic benchmark --------------------------------------------------

struct SystemResult {
  double rouge_l = 0.0;
  double factual_f1 = 0.0;
  std::vector<Tokens> predictions;
  std::vector<FactVector> facts;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::map<std::string, SystemResult> systems;  // nll, rl_r, rl_c, rl_rc
  std::vector<Tokens> references;
  std::vector<FactVector> reference_facts;
  double lm_ppl_references = 0.0;
  double lm_ppl_lexrank = 0.0;
  double seconds = 0.0;
};

SystemResult score(const Summarizer& model, const Vocabulary& vocab, const DatasetSplit& test,
                   const RuleSet& rules) {
  EvalResult ev = evaluate(model, vocab, test.reports, rules);
  SystemResult s;
  s.rouge_l = ev.rouge.rl.f1;
  s.factual_f1 = ev.factual.macro_f1;
  s.predictions = std::move(ev.predictions);
  for (const auto& p : s.predictions) s.facts.push_back(extract_facts(p, rules));
  return s;
}

SeedResult run_seed(std::uint64_t seed, bool verbose) {
  const auto t0 = Clock::now();
  const RuleSet& rules = default_rules();
  CorpusConfig cc;
  cc.n_reports = kReports;
  cc.seed = seed;
  const Corpus corpus = generate_corpus(cc);
  const Vocabulary vocab = Vocabulary::build(corpus.train);

  ModelConfig mc;
  mc.vocab_size = vocab.size();
  Summarizer base(mc);
  base.initialize(seed);

  TrainConfig tc;
  tc.batch_size = kBatch;
  tc.eval_every_steps = kEvalEvery;
  tc.seed = seed;
  tc.mode = TrainMode::kNll;
  tc.learning_rate = kNllLearningRate;
  tc.max_steps = kNllSteps;
  auto progress = [&](const char* what) {
    return [=, &t0](const TrainLogRecord& r) {
      if (verbose && r.dev)
        std::fprintf(stderr, "  seed %llu %s step %zu dev R-L %.4f F1 %.4f %s (%.0fs)\n",
                     static_cast<unsigned long long>(seed), what, r.step, r.dev->rouge.rl.f1,
                     r.dev->factual.macro_f1, r.event.c_str(), seconds_since(t0));
    };
  };
  train(base, vocab, corpus.train, corpus.dev, tc, RewardWeights{}, rules, progress("nll"));

  SeedResult res;
  res.seed = seed;
  res.systems["nll"] = score(base, vocab, corpus.test, rules);
  for (const auto& r : corpus.test.reports) {
    res.references.push_back(r.summary);
    res.reference_facts.push_back(extract_facts(r.summary, rules));
  }
  for (TrainMode mode : {TrainMode::kRlRC, TrainMode::kRlR, TrainMode::kRlC}) {
    Summarizer m = base;
    TrainConfig rc = tc;
    rc.mode = mode;
    rc.learning_rate = kRlLearningRate;
    rc.max_steps = kRlSteps;
    const std::string name(to_string(mode));
    train(m, vocab, corpus.train, corpus.dev, rc, RewardWeights{}, rules, progress(name.c_str()));
    res.systems[name] = score(m, vocab, corpus.test, rules);
  }

  TrigramLM lm(0.1);
  std::vector<Tokens> train_refs;
  for (const auto& r : corpus.train.reports) train_refs.push_back(r.summary);
  lm.train(train_refs);
  std::vector<Tokens> extractive;
  for (const auto& r : corpus.test.reports) extractive.push_back(lexrank(r.findings).summary);
  res.lm_ppl_references = lm.perplexity(res.references);
  res.lm_ppl_lexrank = lm.perplexity(extractive);
  res.seconds = seconds_since(t0);
  return res;
}

std::string seed_table(const std::vector<SeedResult>& runs) {
  std::ostringstream os;
  for (const auto& r : runs) {
    os << "\n    seed " << r.seed << ":";
    for (const char* sys : {"nll", "rl_r", "rl_c", "rl_rc"}) {
      const auto& s = r.systems.at(sys);
      os << " " << sys << " R-L " << fmt(s.rouge_l) << " F1 " << fmt(s.factual_f1) << ";";
    }
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factsum acceptance suite"};
  std::vector<int> criteria;
  std::string report_path;
  bool verbose = false;
  app.add_option("--criteria", criteria, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--report", report_path, "write benchmark numbers as JSON");
  app.add_flag("--verbose", verbose, "print training progress");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto want = [&](int c) { return std::find(criteria.begin(), criteria.end(), c) != criteria.end(); };

  bool all_pass = true;
  auto print = [&](int id, const char* title, const Outcome& o) {
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " [" << title
              << "] " << o.detail << std::endl;
    all_pass = all_pass && o.pass;
  };

  if (want(1)) print(1, "metric oracles", criterion_metrics());
  if (want(2)) print(2, "gradient integrity", criterion_gradients());
  if (want(3)) print(3, "extractor fidelity", criterion_extractor());
  if (want(7)) print(7, "self-critical contract", criterion_self_critical());

  if (want(4) || want(5) || want(6) || want(8) || want(9)) {
    const auto t0 = Clock::now();
    std::vector<SeedResult> runs;
    for (std::uint64_t seed : {1, 2, 3}) runs.push_back(run_seed(seed, verbose));
    const double secs = seconds_since(t0);
    const std::string table = seed_table(runs);

    if (want(4)) {
      int gains = 0;
      bool degraded = false;
      std::string deltas;
      for (const auto& r : runs) {
        const double d = r.systems.at("rl_rc").factual_f1 - r.systems.at("nll").factual_f1;
        gains += d >= kFactualGain;
        degraded = degraded || d < -kFactualMaxDrop;
        deltas += (deltas.empty() ? "" : ", ") + fmt(100 * d, 2);
      }
      Outcome o;
      o.pass = gains >= 2 && !degraded && secs < 45 * 60;
      o.detail = "rl_rc - nll test factual F1 (points): " + deltas + "; " + std::to_string(gains) +
                 "/3 seeds >= +5, none below -1 required; benchmark " + fmt(secs / 60, 1) +
                 " min (limit 45)" + table;
      print(4, "RL improves factual F1", o);
    }
    if (want(5)) {
      int gains = 0;
      std::string deltas;
      for (const auto& r : runs) {
        const double d = r.systems.at("rl_r").rouge_l - r.systems.at("nll").rouge_l;
        gains += d >= kRougeGain;
        deltas += (deltas.empty() ? "" : ", ") + fmt(100 * d, 2);
      }
      Outcome o;
      o.pass = gains >= 2;
      o.detail = "rl_r - nll test ROUGE-L (points): " + deltas + "; " + std::to_string(gains) +
                 "/3 seeds >= +1 (2 required)";
      print(5, "ROUGE reward improves ROUGE", o);
    }
    if (want(6)) {
      int f1_order = 0, rouge_order = 0;
      for (const auto& r : runs) {
        f1_order += r.systems.at("rl_c").factual_f1 >= r.systems.at("rl_r").factual_f1;
        rouge_order += r.systems.at("rl_r").rouge_l >= r.systems.at("rl_c").rouge_l;
      }
      Outcome o;
      o.pass = f1_order >= 2 && rouge_order >= 2;
      o.detail = "rl_c >= rl_r on factual F1 in " + std::to_string(f1_order) +
                 "/3 seeds; rl_r >= rl_c on ROUGE-L in " + std::to_string(rouge_order) +
                 "/3 seeds (2 each required)";
      print(6, "ablation ordering", o);
    }
    if (want(8)) {
      int sentence_ok = 0, ppl_ok = 0;
      std::string rows;
      for (const auto& r : runs) {
        const auto top = most_frequent_sentence(r.systems.at("nll").predictions);
        const double b = top.rate;
        const double rl = sentence_rate(r.systems.at("rl_rc").predictions, top.sentence);
        const double ref = sentence_rate(r.references, top.sentence);
        sentence_ok += b > rl && b > ref;
        ppl_ok += r.lm_ppl_lexrank > r.lm_ppl_references;
        rows += "\n    seed " + std::to_string(r.seed) + ": \"" + join(top.sentence) + "\" nll " +
                fmt(b, 3) + " rl_rc " + fmt(rl, 3) + " refs " + fmt(ref, 3) +
                "; perplexity lexrank " + fmt(r.lm_ppl_lexrank, 2) + " refs " +
                fmt(r.lm_ppl_references, 2);
      }
      Outcome o;
      o.pass = sentence_ok >= 2 && ppl_ok >= 2;
      o.detail = "baseline most-frequent sentence rate strictly highest in " +
                 std::to_string(sentence_ok) + "/3 seeds; lexrank perplexity above references in " +
                 std::to_string(ppl_ok) + "/3 seeds (2 each required)" + rows;
      print(8, "style analysis direction", o);
    }
    if (want(9)) {
      bool ok = true;
      std::string rows;
      for (const auto& r : runs) {
        const auto& base = r.systems.at("nll");
        const auto& rl = r.systems.at("rl_rc");
        const double gain = rl.factual_f1 - base.factual_f1;
        const double p_same = bootstrap_compare_factual_f1(base.facts, base.facts, r.reference_facts,
                                                           kBootstrapResamples, r.seed);
        std::vector<double> per(base.predictions.size());
        for (std::size_t i = 0; i < per.size(); ++i)
          per[i] = rouge_l(base.predictions[i], r.references[i]).f1;
        const double p_same_rouge = bootstrap_compare(per, per, kBootstrapResamples, r.seed);
        ok = ok && p_same > 0.1 && p_same_rouge > 0.1;
        rows += "\n    seed " + std::to_string(r.seed) + ": identical p " + fmt(p_same, 3) +
                " (F1), " + fmt(p_same_rouge, 3) + " (R-L)";
        if (gain > kFactualGain) {
          const double p = bootstrap_compare_factual_f1(rl.facts, base.facts, r.reference_facts,
                                                        kBootstrapResamples, r.seed);
          ok = ok && p < 0.01;
          rows += "; gain " + fmt(100 * gain, 2) + " points p " + fmt(p, 4);
        } else {
          rows += "; gain " + fmt(100 * gain, 2) + " points (not above 5, not tested)";
        }
      }
      Outcome o;
      o.pass = ok;
      o.detail = "p < 0.01 for gains above 5 points and p > 0.1 for identical inputs, " +
                 std::to_string(kBootstrapResamples) + " resamples" + rows;
      print(9, "significance tooling", o);
    }

    if (!report_path.empty()) {
      nlohmann::ordered_json j;
      j["benchmark_seconds"] = secs;
      for (const auto& r : runs) {
        nlohmann::ordered_json s;
        for (const auto& [name, sys] : r.systems)
          s[name] = {{"rouge_l", sys.rouge_l}, {"factual_f1", sys.factual_f1}};
        s["perplexity_references"] = r.lm_ppl_references;
        s["perplexity_lexrank"] = r.lm_ppl_lexrank;
        s["seconds"] = r.seconds;
        j["seeds"][std::to_string(r.seed)] = s;
      }
      std::ofstream(report_path) << j.dump(2) << '\n';
    }
  }
  return all_pass ? 0 : 1;
}
