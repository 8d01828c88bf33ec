#include "factsum/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace factsum {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = [] {
    std::map<std::string, std::string> m = {
        {"seed", "1"},
        {"corpus.n_reports", "2800"},
        {"corpus.uncertainty_rate", "0.25"},
        {"corpus.distractor_rate", "2"},
        {"corpus.pertinent_negative_rate", "0.15"},
        {"corpus.negated_mention_rate", "0.35"},
        {"corpus.resolved_rate", "0.12"},
        {"model.embedding_dim", "32"},
        {"model.encoder_hidden", "64"},
        {"model.decoder_hidden", "64"},
        {"model.background_hidden", "64"},
        {"model.max_decode_len", "50"},
        {"model.dropout_rate", "0.5"},
        {"model.vocab_max_size", "0"},
        {"model.init_scale", "0.1"},
        {"train.learning_rate", "0.001"},
        {"train.batch_size", "16"},
        {"train.grad_clip_norm", "5"},
        {"train.eval_every_steps", "500"},
        {"train.lr_decay", "0.5"},
        {"train.patience_steps", "2500"},
        {"train.max_decays", "3"},
        {"train.max_steps", "2000"},
        {"train.dev_eval_limit", "0"},
        {"train.threads", "1"},
        {"reward.lambda1", "0.97"},
        {"reward.lambda2", "0.97"},
        {"reward.lambda3", "0.03"},
    };
    const CorpusConfig c;
    for (std::size_t v = 1; v < kNumVariables; ++v) {
      std::ostringstream os;
      os << c.prevalence[v];
      m["corpus.prevalence." + std::string(kVariableNames[v])] = os.str();
    }
    return m;
  }();
  return d;
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, value] : defaults()) out.push_back(key);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  if (value.empty()) throw ConfigError("empty value for config key '" + key + "'");
  it->second = value;
}

void RunConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::merge_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      set(std::string_view(t));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::format() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const std::string& s = get(key);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

std::uint64_t RunConfig::seed() const { return get_size("seed"); }

CorpusConfig RunConfig::corpus() const {
  CorpusConfig c;
  c.n_reports = get_size("corpus.n_reports");
  c.uncertainty_rate = get_double("corpus.uncertainty_rate");
  c.distractor_rate = get_double("corpus.distractor_rate");
  c.pertinent_negative_rate = get_double("corpus.pertinent_negative_rate");
  c.negated_mention_rate = get_double("corpus.negated_mention_rate");
  c.resolved_rate = get_double("corpus.resolved_rate");
  for (std::size_t v = 1; v < kNumVariables; ++v)
    c.prevalence[v] = get_double("corpus.prevalence." + std::string(kVariableNames[v]));
  c.seed = seed();
  c.validate();
  return c;
}

ModelConfig RunConfig::model(std::size_t vocab_size) const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.embedding_dim = get_size("model.embedding_dim");
  m.encoder_hidden = get_size("model.encoder_hidden");
  m.decoder_hidden = get_size("model.decoder_hidden");
  m.background_hidden = get_size("model.background_hidden");
  m.max_decode_len = get_size("model.max_decode_len");
  m.dropout_rate = get_double("model.dropout_rate");
  m.validate();
  return m;
}

std::size_t RunConfig::vocab_max_size() const { return get_size("model.vocab_max_size"); }

double RunConfig::init_scale() const {
  const double s = get_double("model.init_scale");
  if (!(s > 0.0)) throw ConfigError("model.init_scale must be > 0");
  return s;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.learning_rate = get_double("train.learning_rate");
  t.batch_size = get_size("train.batch_size");
  t.grad_clip_norm = get_double("train.grad_clip_norm");
  t.eval_every_steps = get_size("train.eval_every_steps");
  t.lr_decay = get_double("train.lr_decay");
  t.patience_steps = get_size("train.patience_steps");
  t.max_decays = get_size("train.max_decays");
  t.max_steps = get_size("train.max_steps");
  t.dev_eval_limit = get_size("train.dev_eval_limit");
  t.threads = get_size("train.threads");
  t.seed = seed();
  t.validate();
  return t;
}

RewardWeights RunConfig::reward() const {
  RewardWeights w{get_double("reward.lambda1"), get_double("reward.lambda2"),
                  get_double("reward.lambda3")};
  w.validate();
  return w;
}

void RunConfig::validate() const {
  corpus();
  model(Vocabulary().size() + 1);
  vocab_max_size();
  init_scale();
  train();
  reward();
}

}  // namespace factsum
