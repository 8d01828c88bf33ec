// factsum: corpus generation, training, fine-tuning, decoding, fact
// extraction, evaluation and output analysis from one executable.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "factsum/analysis.hpp"
#include "factsum/corpus.hpp"
#include "factsum/factext.hpp"
#include "factsum/metrics.hpp"
#include "factsum/model.hpp"
#include "factsum/run_config.hpp"
#include "factsum/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace factsum;

namespace {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out;
  std::size_t threads = 0;
};

struct Invocation {
  std::string command;
  std::vector<std::string> argv;
  fs::path run_dir;
  RunConfig config;
  json manifest;
};

std::uint64_t fnv1a(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

fs::path resolve_run_dir(const std::string& command, const std::string& out) {
  if (!out.empty()) return out;
  const char* env = std::getenv("FACTSUM_RUN_ROOT");
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  for (int i = 1;; ++i) {
    std::ostringstream name;
    name << command << '-' << std::setw(3) << std::setfill('0') << i;
    if (!fs::exists(root / name.str())) return root / name.str();
  }
}

void record_input(Invocation& inv, const std::string& role, const fs::path& path) {
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file())
        record_input(inv, role + "/" + entry.path().filename().string(), entry.path());
    return;
  }
  inv.manifest["inputs"].push_back({{"role", role},
                                    {"path", fs::absolute(path).lexically_normal().string()},
                                    {"bytes", fs::file_size(path)},
                                    {"fnv1a", hex(fnv1a(path))}});
}

void record_output(Invocation& inv, const fs::path& path) {
  inv.manifest["outputs"].push_back(fs::relative(path, inv.run_dir).generic_string());
}

Invocation begin(const std::string& command, const Common& common, int argc, char** argv) {
  Invocation inv;
  inv.command = command;
  inv.argv.assign(argv, argv + argc);
  if (!common.config_file.empty()) inv.config.merge_file(common.config_file);
  for (const auto& o : common.overrides) inv.config.set(std::string_view(o));
  if (common.threads > 0) inv.config.set("train.threads", std::to_string(common.threads));
  inv.config.validate();
  inv.run_dir = resolve_run_dir(command, common.out);
  fs::create_directories(inv.run_dir);
  write_text(inv.run_dir / "config.resolved", inv.config.format());
  inv.manifest = {{"tool", "factsum"},
                  {"subcommand", command},
                  {"argv", inv.argv},
                  {"config", "config.resolved"},
                  {"inputs", json::array()},
                  {"outputs", json::array({"config.resolved"})}};
  if (!common.config_file.empty()) record_input(inv, "config", common.config_file);
  return inv;
}

void finish(Invocation& inv) {
  inv.manifest["outputs"].push_back("manifest.json");
  write_text(inv.run_dir / "manifest.json", inv.manifest.dump(2) + "\n");
  std::cerr << "run directory: " << inv.run_dir.string() << "\n";
}

DatasetSplit read_dataset(const fs::path& path, SplitName name = SplitName::kTrain) {
  if (!fs::exists(path)) throw ValidationError("no such dataset file: " + path.string());
  return load_dataset(path.string(), name);
}

bool is_dataset_file(const fs::path& path) { return path.extension() == ".jsonl"; }

std::vector<Tokens> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read predictions file " + path.string());
  std::vector<Tokens> out;
  std::string line;
  while (std::getline(in, line)) {
    Tokens t;
    std::istringstream ss(line);
    for (std::string w; ss >> w;) t.push_back(w);
    out.push_back(std::move(t));
  }
  return out;
}

void write_predictions(const fs::path& path, const std::vector<Tokens>& predictions) {
  std::string text;
  for (const auto& p : predictions) text += join(p) + "\n";
  write_text(path, text);
}

std::vector<Tokens> read_summaries(const fs::path& path) {
  if (!is_dataset_file(path)) return read_predictions(path);
  std::vector<Tokens> out;
  for (const auto& r : read_dataset(path).reports) out.push_back(r.summary);
  return out;
}

fs::path checkpoint_dir(const fs::path& dir) {
  if (fs::exists(dir / "model.cfg")) return dir;
  if (fs::exists(dir / "model" / "model.cfg")) return dir / "model";
  throw ValidationError("no model checkpoint in " + dir.string());
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

json eval_json(const EvalResult& e) {
  json j = {{"rouge_1", e.rouge.r1.f1},
            {"rouge_2", e.rouge.r2.f1},
            {"rouge_l", e.rouge.rl.f1},
            {"macro_f1", e.factual.macro_f1},
            {"stopping_metric", e.stopping_metric}};
  return j;
}

// ---- gen-corpus -------------------------------------------------------------

int cmd_gen_corpus(Invocation& inv) {
  const Corpus corpus = generate_corpus(inv.config.corpus());
  for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test}) {
    const fs::path p = inv.run_dir / (std::string(to_string(split->name)) + ".jsonl");
    save_dataset(*split, p.string());
    record_output(inv, p);
  }
  const fs::path vocab = inv.run_dir / "vocab.tsv";
  save_vocabulary(count_vocabulary({&corpus.train, &corpus.dev, &corpus.test}), vocab.string());
  record_output(inv, vocab);
  std::cout << "train=" << corpus.train.size() << " dev=" << corpus.dev.size()
            << " test=" << corpus.test.size() << "\n";
  return 0;
}

// ---- train / finetune -------------------------------------------------------

int run_training(Invocation& inv, const fs::path& data, TrainMode mode, const fs::path& init) {
  const DatasetSplit train_split = read_dataset(data / "train.jsonl", SplitName::kTrain);
  const DatasetSplit dev_split = read_dataset(data / "dev.jsonl", SplitName::kDev);
  record_input(inv, "train", data / "train.jsonl");
  record_input(inv, "dev", data / "dev.jsonl");
  if (train_split.empty()) throw ValidationError("training split is empty");
  if (dev_split.empty()) throw ValidationError("dev split is empty");

  TrainConfig tc = inv.config.train();
  tc.mode = mode;
  const RewardWeights weights = inv.config.reward();

  auto [model, vocab] = [&]() -> std::pair<Summarizer, Vocabulary> {
    if (!init.empty()) {
      const fs::path ckpt = checkpoint_dir(init);
      record_input(inv, "init", ckpt);
      return Summarizer::load(ckpt.string());
    }
    Vocabulary v = Vocabulary::build(train_split, inv.config.vocab_max_size());
    Summarizer m(inv.config.model(v.size()));
    m.initialize(inv.config.seed(), inv.config.init_scale());
    return {std::move(m), std::move(v)};
  }();

  const fs::path log_path = inv.run_dir / "train_log.jsonl";
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());
  const auto start = std::chrono::steady_clock::now();
  const TrainLogger logger = [&](const TrainLogRecord& r) {
    json j = {{"step", r.step},
              {"learning_rate", r.learning_rate},
              {"loss", r.stats.loss},
              {"loss_rouge", r.stats.loss_rouge},
              {"loss_factual", r.stats.loss_factual},
              {"loss_nll", r.stats.loss_nll},
              {"reward_sample", r.stats.reward_sample},
              {"reward_greedy", r.stats.reward_greedy},
              {"zero_advantage", r.stats.zero_advantage},
              {"grad_norm", r.stats.grad_norm},
              {"event", r.event}};
    if (r.dev) j["dev"] = eval_json(*r.dev);
    log << j.dump() << "\n";
    log.flush();
    if (r.dev || !r.event.empty()) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cerr << "step " << r.step;
      if (r.dev)
        std::cerr << " dev R-L " << std::fixed << std::setprecision(4) << r.dev->rouge.rl.f1
                  << " F1 " << r.dev->factual.macro_f1 << std::defaultfloat;
      if (!r.event.empty()) std::cerr << " [" << r.event << "]";
      std::cerr << " (" << std::fixed << std::setprecision(0) << secs << "s)"
                << std::defaultfloat << "\n";
    }
  };
  const TrainResult result =
      train(model, vocab, train_split, dev_split, tc, weights, default_rules(), logger);
  record_output(inv, log_path);

  const fs::path model_dir = inv.run_dir / "model";
  model.save(model_dir.string(), vocab);
  for (const char* f : {"model.cfg", "model.params", "vocab.txt"}) record_output(inv, model_dir / f);

  const EvalResult dev = evaluate(model, vocab, dev_split.reports, default_rules(), 1, tc.threads);
  std::string summary = "mode=" + std::string(to_string(mode)) + "\n" +
                        "steps=" + std::to_string(result.steps) + "\n" +
                        "best_step=" + std::to_string(result.best_step) + "\n" +
                        "decays=" + std::to_string(result.decays) + "\n" +
                        "dev.rouge_1=" + num(dev.rouge.r1.f1) + "\n" +
                        "dev.rouge_2=" + num(dev.rouge.r2.f1) + "\n" +
                        "dev.rouge_l=" + num(dev.rouge.rl.f1) + "\n" +
                        "dev.macro_f1=" + num(dev.factual.macro_f1) + "\n";
  write_text(inv.run_dir / "summary.txt", summary);
  record_output(inv, inv.run_dir / "summary.txt");
  std::cout << summary;
  return 0;
}

// ---- decode -----------------------------------------------------------------

int cmd_decode(Invocation& inv, const fs::path& model_dir, const fs::path& input, std::size_t beam) {
  if (beam == 0) throw ValidationError("--beam must be >= 1");
  const fs::path ckpt = checkpoint_dir(model_dir);
  auto [model, vocab] = Summarizer::load(ckpt.string());
  const DatasetSplit data = read_dataset(input);
  record_input(inv, "model", ckpt);
  record_input(inv, "input", input);
  const EvalResult r =
      evaluate(model, vocab, data.reports, default_rules(), beam, inv.config.train().threads);
  const fs::path out = inv.run_dir / "predictions.txt";
  write_predictions(out, r.predictions);
  record_output(inv, out);
  inv.manifest["beam"] = beam;
  std::cout << "decoded " << r.predictions.size() << " reports into " << out.string() << "\n";
  return 0;
}

// ---- extract ----------------------------------------------------------------

int cmd_extract(Invocation& inv, const fs::path& input, const std::string& rules_file) {
  const RuleSet rules = rules_file.empty() ? default_rules() : load_rules(rules_file);
  record_input(inv, "input", input);
  if (!rules_file.empty()) record_input(inv, "rules", rules_file);
  std::vector<std::string> ids;
  std::vector<Tokens> summaries;
  if (is_dataset_file(input)) {
    for (const auto& r : read_dataset(input).reports) {
      ids.push_back(r.id);
      summaries.push_back(r.summary);
    }
  } else {
    summaries = read_predictions(input);
    for (std::size_t i = 0; i < summaries.size(); ++i) ids.push_back(std::to_string(i));
  }
  std::string text;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const json rec = {{"id", ids[i]},
                      {"facts", json::parse(format_facts_json(extract_facts(summaries[i], rules)))}};
    text += rec.dump() + "\n";
  }
  const fs::path out = inv.run_dir / "facts.jsonl";
  write_text(out, text);
  record_output(inv, out);
  std::cout << "extracted " << summaries.size() << " fact vectors into " << out.string() << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

int cmd_eval(Invocation& inv, const fs::path& predictions, const fs::path& reference,
             const std::string& compare, std::size_t resamples, std::uint64_t seed) {
  const DatasetSplit ref = read_dataset(reference);
  const std::vector<Tokens> hyp = read_predictions(predictions);
  record_input(inv, "predictions", predictions);
  record_input(inv, "reference", reference);
  if (hyp.size() != ref.size())
    throw ValidationError("predictions and references are not aligned: " +
                          std::to_string(hyp.size()) + " predictions vs " +
                          std::to_string(ref.size()) + " references");
  const RuleSet& rules = default_rules();
  const EvalResult e = score_predictions(hyp, ref.reports, rules);

  std::ostringstream kv, table;
  kv << "count=" << hyp.size() << "\n"
     << "rouge_1.precision=" << num(e.rouge.r1.precision) << "\n"
     << "rouge_1.recall=" << num(e.rouge.r1.recall) << "\n"
     << "rouge_1.f1=" << num(e.rouge.r1.f1) << "\n"
     << "rouge_2.precision=" << num(e.rouge.r2.precision) << "\n"
     << "rouge_2.recall=" << num(e.rouge.r2.recall) << "\n"
     << "rouge_2.f1=" << num(e.rouge.r2.f1) << "\n"
     << "rouge_l.precision=" << num(e.rouge.rl.precision) << "\n"
     << "rouge_l.recall=" << num(e.rouge.rl.recall) << "\n"
     << "rouge_l.f1=" << num(e.rouge.rl.f1) << "\n";
  for (std::size_t v = 0; v < kNumVariables; ++v)
    kv << "f1." << kVariableNames[v] << "=" << num(e.factual.per_variable_f1[v]) << "\n";
  kv << "macro_f1=" << num(e.factual.macro_f1) << "\n";

  table << std::fixed << std::setprecision(2) << "ROUGE-1  " << 100 * e.rouge.r1.f1 << "\n"
        << "ROUGE-2  " << 100 * e.rouge.r2.f1 << "\n"
        << "ROUGE-L  " << 100 * e.rouge.rl.f1 << "\n\n";
  for (std::size_t v = 0; v < kNumVariables; ++v)
    table << std::left << std::setw(18) << kVariableNames[v] << std::right << std::setw(7)
          << 100 * e.factual.per_variable_f1[v] << "\n";
  table << std::left << std::setw(18) << "macro_f1" << std::right << std::setw(7)
        << 100 * e.factual.macro_f1 << "\n";

  if (!compare.empty()) {
    const std::vector<Tokens> other = read_predictions(compare);
    record_input(inv, "compare", compare);
    if (other.size() != ref.size())
      throw ValidationError("comparison predictions and references are not aligned: " +
                            std::to_string(other.size()) + " predictions vs " +
                            std::to_string(ref.size()) + " references");
    if (resamples < 1000) throw ValidationError("--resamples must be >= 1000");
    const EvalResult o = score_predictions(other, ref.reports, rules);
    std::vector<double> a(hyp.size()), b(hyp.size());
    std::vector<FactVector> fa, fb, fr;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      a[i] = rouge_l(hyp[i], ref.reports[i].summary).f1;
      b[i] = rouge_l(other[i], ref.reports[i].summary).f1;
      fa.push_back(extract_facts(hyp[i], rules));
      fb.push_back(extract_facts(other[i], rules));
      fr.push_back(extract_facts(ref.reports[i].summary, rules));
    }
    const double p_rouge = bootstrap_compare(a, b, resamples, seed);
    const double p_f1 = bootstrap_compare_factual_f1(fa, fb, fr, resamples, seed);
    kv << "compare.rouge_l.f1=" << num(o.rouge.rl.f1) << "\n"
       << "compare.macro_f1=" << num(o.factual.macro_f1) << "\n"
       << "bootstrap.resamples=" << resamples << "\n"
       << "bootstrap.seed=" << seed << "\n"
       << "p_value.rouge_l=" << num(p_rouge) << "\n"
       << "p_value.macro_f1=" << num(p_f1) << "\n";
    table << "\ncompared with " << compare << "\n"
          << "ROUGE-L  " << 100 * o.rouge.rl.f1 << "  p=" << std::setprecision(4) << p_rouge
          << "\n"
          << std::setprecision(2) << "macro_f1 " << 100 * o.factual.macro_f1
          << "  p=" << std::setprecision(4) << p_f1 << "\n";
  }
  write_text(inv.run_dir / "metrics.txt", kv.str());
  write_text(inv.run_dir / "metrics_table.txt", table.str());
  record_output(inv, inv.run_dir / "metrics.txt");
  record_output(inv, inv.run_dir / "metrics_table.txt");
  std::cout << table.str();
  return 0;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeOptions {
  std::string input;
  std::vector<std::size_t> ngrams;
  std::string sentence;
  std::string perplexity_lm;
  std::string train_lm;
  bool lexrank = false;
  std::size_t top_n = 3;
};

int cmd_analyze(Invocation& inv, const AnalyzeOptions& o) {
  if (o.ngrams.empty() && o.sentence.empty() && o.perplexity_lm.empty() && o.train_lm.empty() &&
      !o.lexrank)
    throw ValidationError(
        "analyze needs at least one of --ngrams, --sentence-rate, --perplexity, --train-lm, "
        "--lexrank");
  record_input(inv, "input", o.input);
  const std::vector<Tokens> summaries = read_summaries(o.input);
  std::ostringstream kv;
  kv << "summaries=" << summaries.size() << "\n";
  const SentenceCount top = most_frequent_sentence(summaries);
  kv << "most_frequent_sentence=" << join(top.sentence) << "\n"
     << "most_frequent_sentence.rate=" << num(top.rate) << "\n";

  if (!o.ngrams.empty()) {
    if (o.ngrams.size() != 2) throw ValidationError("--ngrams takes two values: n k");
    const NgramProfile p = ngram_profile(summaries, o.ngrams[0], o.ngrams[1]);
    std::ostringstream tsv;
    tsv << "rank\tngram\tcount\tshare\toutput_ratio\n";
    for (std::size_t i = 0; i < p.top.size(); ++i)
      tsv << i + 1 << '\t' << join(p.top[i].gram) << '\t' << p.top[i].count << '\t'
          << num(p.top[i].share) << '\t' << num(p.top[i].output_ratio) << '\n';
    const fs::path out = inv.run_dir / ("ngrams_" + std::to_string(p.n) + ".tsv");
    write_text(out, tsv.str());
    record_output(inv, out);
    kv << "ngrams.n=" << p.n << "\nngrams.total=" << p.total << "\n";
    std::cout << tsv.str();
  }
  if (!o.sentence.empty()) {
    const Tokens s = tokenize(o.sentence);
    kv << "sentence=" << join(s) << "\nsentence.rate=" << num(sentence_rate(summaries, s)) << "\n";
  }
  if (!o.train_lm.empty()) {
    TrigramLM lm;
    lm.train(summaries);
    lm.save(o.train_lm);
    kv << "trained_lm=" << o.train_lm << "\n";
  }
  if (!o.perplexity_lm.empty()) {
    record_input(inv, "lm", o.perplexity_lm);
    const TrigramLM lm = TrigramLM::load(o.perplexity_lm);
    kv << "perplexity=" << num(lm.perplexity(summaries)) << "\n";
  }
  if (o.lexrank) {
    if (!is_dataset_file(o.input)) throw ValidationError("--lexrank needs a .jsonl dataset input");
    LexRankOptions lo;
    lo.top_n = o.top_n;
    std::vector<Tokens> extracts;
    for (const auto& r : read_dataset(o.input).reports)
      extracts.push_back(lexrank(r.findings, lo).summary);
    const fs::path out = inv.run_dir / "lexrank_predictions.txt";
    write_predictions(out, extracts);
    record_output(inv, out);
    const SentenceCount lt = most_frequent_sentence(extracts);
    kv << "lexrank.most_frequent_sentence.rate=" << num(lt.rate) << "\n";
  }
  write_text(inv.run_dir / "analysis.txt", kv.str());
  record_output(inv, inv.run_dir / "analysis.txt");
  std::cout << kv.str();
  return 0;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "config override key=value (repeatable)");
  cmd->add_option("--out", c.out,
                  "run directory (default $FACTSUM_RUN_ROOT/<command>-NNN, root defaults to runs)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factsum: factual-correctness summarization toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "cap on worker threads")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic report corpus");
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen->add_option("--seed", gen_seed, "corpus seed (overrides the config seed)");
  add_common(gen, common);

  auto* trn = app.add_subcommand("train", "teacher-forcing training");
  std::string data_dir;
  trn->add_option("--data", data_dir, "directory with train.jsonl and dev.jsonl")->required();
  add_common(trn, common);

  auto* fin = app.add_subcommand("finetune", "self-critical fine-tuning");
  std::string mode_name = "rl_rc", init_dir;
  fin->add_option("--mode", mode_name, "rl_r, rl_c or rl_rc")
      ->check(CLI::IsMember({"rl_r", "rl_c", "rl_rc"}));
  fin->add_option("--init", init_dir, "checkpoint to start from")->required();
  fin->add_option("--data", data_dir, "directory with train.jsonl and dev.jsonl")->required();
  add_common(fin, common);

  auto* dec = app.add_subcommand("decode", "summarize a dataset with a checkpoint");
  std::string model_dir, input;
  std::size_t beam = 1;
  dec->add_option("--model", model_dir, "checkpoint directory or training run")->required();
  dec->add_option("--input", input, "dataset .jsonl")->required();
  dec->add_option("--beam", beam, "beam width (1 = greedy)");
  add_common(dec, common);

  auto* ext = app.add_subcommand("extract", "extract fact vectors from summaries");
  std::string rules_file;
  ext->add_option("--input", input, "dataset .jsonl or predictions file")->required();
  ext->add_option("--rules", rules_file, "rule file (default: built-in rules)");
  add_common(ext, common);

  auto* evl = app.add_subcommand("eval", "score predictions against references");
  std::string predictions, reference, compare;
  std::size_t resamples = 5000;
  std::uint64_t boot_seed = 1;
  evl->add_option("--predictions", predictions, "one summary per line")->required();
  evl->add_option("--reference", reference, "reference dataset .jsonl")->required();
  evl->add_option("--compare", compare, "second predictions file for bootstrap tests");
  evl->add_option("--resamples", resamples, "bootstrap resamples");
  evl->add_option("--bootstrap-seed", boot_seed, "bootstrap seed");
  add_common(evl, common);

  auto* ana = app.add_subcommand("analyze", "output style analyses");
  AnalyzeOptions ao;
  ana->add_option("--input", ao.input, "predictions file or dataset .jsonl")->required();
  ana->add_option("--ngrams", ao.ngrams, "n k: top-k n-grams")->expected(2);
  ana->add_option("--sentence-rate", ao.sentence, "fraction of summaries containing a sentence");
  ana->add_option("--perplexity", ao.perplexity_lm, "trigram LM file");
  ana->add_option("--train-lm", ao.train_lm, "train a trigram LM on the input and save it");
  ana->add_flag("--lexrank", ao.lexrank, "LexRank extracts of the findings");
  ana->add_option("--top-n", ao.top_n, "LexRank sentences per extract");
  add_common(ana, common);

  for (auto* sub : {gen, trn, fin, dec, ext, evl, ana}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }
  gen_seed_set = gen->count("--seed") > 0;

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "gen-corpus" && gen_seed_set)
      common.overrides.push_back("seed=" + std::to_string(gen_seed));
    Invocation inv = begin(name, common, argc, argv);
    int rc = 0;
    if (name == "gen-corpus") rc = cmd_gen_corpus(inv);
    else if (name == "train") rc = run_training(inv, data_dir, TrainMode::kNll, {});
    else if (name == "finetune")
      rc = run_training(inv, data_dir, *parse_train_mode(mode_name), init_dir);
    else if (name == "decode") rc = cmd_decode(inv, model_dir, input, beam);
    else if (name == "extract") rc = cmd_extract(inv, input, rules_file);
    else if (name == "eval") rc = cmd_eval(inv, predictions, reference, compare, resamples, boot_seed);
    else if (name == "analyze") rc = cmd_analyze(inv, ao);
    finish(inv);
    return rc;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const RuleError& e) {
    std::cerr << "rule error: " << e.what() << "\n";
    return 1;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 2;
  }
}
