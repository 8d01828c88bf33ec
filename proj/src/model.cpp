#include "factsum/model.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace factsum {

namespace fs = std::filesystem;

// ---- Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  for (const char* s : {"<unk>", "<s>", "</s>"}) {
    index_.emplace(s, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(s);
  }
  for (const auto& t : tokens) {
    if (index_.count(t)) continue;
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }
}

Vocabulary Vocabulary::build(const DatasetSplit& train, std::size_t max_size) {
  const auto counts = count_vocabulary({&train});
  std::vector<std::string> toks;
  for (const auto& [t, n] : counts) {
    if (max_size && toks.size() + 3 >= max_size) break;
    toks.push_back(t);
  }
  return Vocabulary(toks);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocabulary " + path);
  std::vector<std::string> toks;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) toks.push_back(line);
  // The file includes the specials; the constructor re-adds and skips them.
  return Vocabulary(toks);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

// ---- config -------------------------------------------------------------------

void ModelConfig::validate() const {
  if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4");
  if (embedding_dim < 1 || encoder_hidden < 1 || decoder_hidden < 1 || background_hidden < 1)
    throw ConfigError("model dimensions must be >= 1");
  if (max_decode_len < 2) throw ConfigError("max_decode_len must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout_rate must lie in [0,1)");
}

std::string format_model_config(const ModelConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "format_version=1\n"
     << "vocab_size=" << c.vocab_size << '\n'
     << "embedding_dim=" << c.embedding_dim << '\n'
     << "encoder_hidden=" << c.encoder_hidden << '\n'
     << "decoder_hidden=" << c.decoder_hidden << '\n'
     << "background_hidden=" << c.background_hidden << '\n'
     << "max_decode_len=" << c.max_decode_len << '\n'
     << "dropout_rate=" << c.dropout_rate << '\n'
     << "vocab=vocab.txt\n"
     << "params=model.params\n";
  return os.str();
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("bad model config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["format_version"] != "1") throw ConfigError("unsupported model config version");
  auto get = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError(std::string("model config missing ") + k);
    return it->second;
  };
  c.vocab_size = std::stoul(get("vocab_size"));
  c.embedding_dim = std::stoul(get("embedding_dim"));
  c.encoder_hidden = std::stoul(get("encoder_hidden"));
  c.decoder_hidden = std::stoul(get("decoder_hidden"));
  c.background_hidden = std::stoul(get("background_hidden"));
  c.max_decode_len = std::stoul(get("max_decode_len"));
  c.dropout_rate = std::stod(get("dropout_rate"));
  c.validate();
  return c;
}

// ---- examples -----------------------------------------------------------------

std::string EncodedExample::token(const Vocabulary& vocab, int ext_id) const {
  if (ext_id < static_cast<int>(vocab_size)) return vocab.token(ext_id);
  return oovs.at(static_cast<std::size_t>(ext_id) - vocab_size);
}

int EncodedExample::ext_id(const Vocabulary& vocab, const std::string& tok) const {
  if (vocab.contains(tok)) return vocab.id(tok);
  auto it = std::find(oovs.begin(), oovs.end(), tok);
  if (it != oovs.end()) return static_cast<int>(vocab_size + (it - oovs.begin()));
  return Vocabulary::kUnk;
}

EncodedExample encode_example(const Report& report, const Vocabulary& vocab) {
  EncodedExample ex;
  ex.vocab_size = vocab.size();
  for (const auto& t : report.findings) {
    const int id = vocab.id(t);
    ex.findings.push_back(id);
    if (id != Vocabulary::kUnk || t == "<unk>") {
      ex.findings_ext.push_back(id);
      continue;
    }
    auto it = std::find(ex.oovs.begin(), ex.oovs.end(), t);
    if (it == ex.oovs.end()) {
      ex.oovs.push_back(t);
      it = ex.oovs.end() - 1;
    }
    ex.findings_ext.push_back(static_cast<int>(ex.vocab_size + (it - ex.oovs.begin())));
  }
  for (const auto& t : report.background) ex.background.push_back(vocab.id(t));
  for (const auto& t : report.summary) ex.target.push_back(ex.ext_id(vocab, t));
  ex.target.push_back(Vocabulary::kEos);
  return ex;
}

Tokens decode_tokens(const EncodedExample& ex, const Vocabulary& vocab, const std::vector<int>& ids) {
  Tokens out;
  for (int id : ids) {
    if (id == Vocabulary::kEos) break;
    out.push_back(ex.token(vocab, id));
  }
  return out;
}

// ---- Summarizer ---------------------------------------------------------------

Summarizer::Summarizer(ModelConfig config) : config_(config) {
  config_.validate();
  const std::size_t V = config_.vocab_size, E = config_.embedding_dim, H = config_.encoder_hidden,
                    D = config_.decoder_hidden, B = config_.background_hidden;
  using ad::Shape;
  using ad::Tensor;
  params_.add("embedding", Tensor(Shape{V, E}));
  params_.add("enc_fwd.w", Tensor(Shape{4 * H, E + H}));
  params_.add("enc_fwd.b", Tensor(Shape{4 * H}));
  params_.add("enc_bwd.w", Tensor(Shape{4 * H, E + H}));
  params_.add("enc_bwd.b", Tensor(Shape{4 * H}));
  params_.add("bg.w", Tensor(Shape{4 * B, E + B}));
  params_.add("bg.b", Tensor(Shape{4 * B}));
  params_.add("init.w", Tensor(Shape{D, 2 * H}));
  params_.add("init.b", Tensor(Shape{D}));
  params_.add("dec.w", Tensor(Shape{4 * D, E + B + D}));
  params_.add("dec.b", Tensor(Shape{4 * D}));
  params_.add("attn.wh", Tensor(Shape{2 * H, D}));
  params_.add("attn.ws", Tensor(Shape{D, D}));
  params_.add("attn.b", Tensor(Shape{D}));
  params_.add("attn.v", Tensor(Shape{D}));
  params_.add("out.w", Tensor(Shape{V, D + 2 * H}));
  params_.add("out.b", Tensor(Shape{V}));
  params_.add("gen.w", Tensor(Shape{1, 2 * H + D + E + B}));
  params_.add("gen.b", Tensor(Shape{1}));
}

void Summarizer::initialize(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (ad::ParamId p = 0; p < params_.size(); ++p)
    for (double& x : params_.value(p).values()) x = u(rng);
  for (const char* name : {"enc_fwd.b", "enc_bwd.b", "bg.b", "dec.b"}) {
    auto& b = params_.value(params_.id(name));
    const std::size_t h = b.size() / 4;
    for (std::size_t j = 0; j < b.size(); ++j) b[j] = (j >= h && j < 2 * h) ? 1.0 : 0.0;
  }
  params_.zero_grad();
}

void Summarizer::zero_parameters() {
  for (ad::ParamId p = 0; p < params_.size(); ++p) params_.value(p).fill(0.0);
}

ad::Var Summarizer::embed(ad::Tape& tape, int id, std::mt19937_64* dropout) const {
  const int row = id < static_cast<int>(config_.vocab_size) ? id : Vocabulary::kUnk;
  ad::Var e = ad::embedding(tape.param("embedding"), static_cast<std::size_t>(row));
  if (dropout == nullptr || config_.dropout_rate == 0.0) return e;
  const double keep = 1.0 - config_.dropout_rate;
  std::bernoulli_distribution coin(keep);
  ad::Tensor mask(ad::Shape{config_.embedding_dim});
  for (double& m : mask.values()) m = coin(*dropout) ? 1.0 / keep : 0.0;
  return ad::mul(e, tape.constant(std::move(mask)));
}

ad::Var Summarizer::lstm_run_step(ad::Tape& tape, const char* prefix, ad::Var x, ad::Var& h,
                                  ad::Var& c, std::size_t hidden) const {
  const std::string p(prefix);
  ad::Var out = ad::lstm_cell(x, h, c, tape.param(p + ".w"), tape.param(p + ".b"));
  h = ad::slice(out, 0, hidden);
  c = ad::slice(out, hidden, hidden);
  return h;
}

EncoderOutput Summarizer::encode(ad::Tape& tape, const EncodedExample& ex,
                                 std::mt19937_64* dropout) const {
  if (ex.findings.empty()) throw ConfigError("cannot encode empty findings");
  const std::size_t N = ex.findings.size(), H = config_.encoder_hidden,
                    B = config_.background_hidden, D = config_.decoder_hidden;
  std::vector<ad::Var> emb;
  emb.reserve(N);
  for (int id : ex.findings) emb.push_back(embed(tape, id, dropout));

  std::vector<ad::Var> fwd(N), bwd(N);
  {
    ad::Var h = tape.constant(ad::Tensor(ad::Shape{H}));
    ad::Var c = h;
    for (std::size_t i = 0; i < N; ++i) fwd[i] = lstm_run_step(tape, "enc_fwd", emb[i], h, c, H);
  }
  {
    ad::Var h = tape.constant(ad::Tensor(ad::Shape{H}));
    ad::Var c = h;
    for (std::size_t i = N; i-- > 0;) bwd[i] = lstm_run_step(tape, "enc_bwd", emb[i], h, c, H);
  }
  std::vector<ad::Var> rows(N);
  for (std::size_t i = 0; i < N; ++i) {
    const ad::Var pair[] = {fwd[i], bwd[i]};
    rows[i] = ad::concat(pair);
  }
  EncoderOutput enc;
  enc.states = ad::stack_rows(rows);
  enc.states_proj = ad::matmul(enc.states, tape.param("attn.wh"));

  ad::Var bh = tape.constant(ad::Tensor(ad::Shape{B}));
  ad::Var bc = bh;
  for (int id : ex.background) lstm_run_step(tape, "bg", embed(tape, id, dropout), bh, bc, B);
  enc.background = bh;

  const ad::Var ends[] = {fwd[N - 1], bwd[0]};
  enc.init_h = ad::tanh(
      ad::add(ad::matmul(tape.param("init.w"), ad::concat(ends)), tape.param("init.b")));
  enc.init_c = tape.constant(ad::Tensor(ad::Shape{D}));
  return enc;
}

StepOutput Summarizer::decode_step(ad::Tape& tape, const EncodedExample& ex,
                                   const EncoderOutput& enc, const DecoderState& state,
                                   int prev_token, std::mt19937_64* dropout,
                                   const StepOptions& options) const {
  const std::size_t D = config_.decoder_hidden;
  const ad::Var in_parts[] = {embed(tape, prev_token, dropout), enc.background};
  ad::Var x = ad::concat(in_parts);
  ad::Var h = state.h, c = state.c;
  lstm_run_step(tape, "dec", x, h, c, D);

  ad::Var query = ad::add(ad::matmul(tape.param("attn.ws"), h), tape.param("attn.b"));
  ad::Var energy = ad::tanh(ad::add_row(enc.states_proj, query));
  ad::Var attn = ad::softmax(ad::matmul(energy, tape.param("attn.v")));
  ad::Var ctx = ad::vecmat(attn, enc.states);

  const ad::Var feat_parts[] = {h, ctx};
  ad::Var logits = ad::add(ad::matmul(tape.param("out.w"), ad::concat(feat_parts)),
                           tape.param("out.b"));
  ad::Var vocab = ad::softmax(logits);

  ad::Var p_gen;
  if (options.force_p_gen) {
    p_gen = tape.constant(*options.force_p_gen);
  } else {
    const ad::Var gate_parts[] = {ctx, h, x};
    p_gen = ad::sigmoid(ad::add(ad::matmul(tape.param("gen.w"), ad::concat(gate_parts)),
                                tape.param("gen.b")));
  }
  StepOutput out;
  out.dist = ad::copy_mix(vocab, attn, p_gen, ex.findings_ext, ex.ext_size());
  out.vocab_dist = vocab;
  out.attention = attn;
  out.p_gen = p_gen;
  out.next = DecoderState{h, c};
  return out;
}

ad::Var Summarizer::sequence_nll(ad::Tape& tape, const EncodedExample& ex,
                                 const EncoderOutput& enc, std::mt19937_64* dropout) const {
  if (ex.target.empty()) throw ConfigError("empty reference summary");
  DecoderState st = initial_state(enc);
  int prev = Vocabulary::kBos;
  std::vector<ad::Var> terms;
  terms.reserve(ex.target.size());
  for (int y : ex.target) {
    StepOutput step = decode_step(tape, ex, enc, st, prev, dropout);
    terms.push_back(ad::log(ad::pick(step.dist, static_cast<std::size_t>(y))));
    st = step.next;
    prev = y;
  }
  return ad::scale(ad::sum(terms), -1.0 / static_cast<double>(terms.size()));
}

ad::Var Summarizer::sequence_nll(ad::Tape& tape, const EncodedExample& ex,
                                 std::mt19937_64* dropout) const {
  return sequence_nll(tape, ex, encode(tape, ex, dropout), dropout);
}

void Summarizer::save(const std::string& dir, const Vocabulary& vocab) const {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "model.cfg", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model config in " + dir);
    out << format_model_config(config_);
  }
  params_.save((fs::path(dir) / "model.params").string());
  vocab.save((fs::path(dir) / "vocab.txt").string());
}

std::pair<Summarizer, Vocabulary> Summarizer::load(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "model.cfg");
  if (!in) throw std::runtime_error("no model.cfg in " + dir);
  std::stringstream ss;
  ss << in.rdbuf();
  const ModelConfig cfg = parse_model_config(ss.str());
  Vocabulary vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  if (vocab.size() != cfg.vocab_size)
    throw std::runtime_error("vocabulary size " + std::to_string(vocab.size()) +
                             " does not match model config " + std::to_string(cfg.vocab_size));
  Summarizer model(cfg);
  model.params().load((fs::path(dir) / "model.params").string());
  return {std::move(model), std::move(vocab)};
}

}  // namespace factsum
