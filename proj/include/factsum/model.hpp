#pragma once

// Background-augmented pointer-generator summarizer.
//
//   findings  -> BiLSTM -> source states H (one row per token)
//   background -> LSTM  -> background vector b (final hidden state)
//   decoder input at every step: [embed(prev token); b]
//   additive attention over H, vocabulary softmax over [s; ctx], and a
//   generation gate p_gen mixing the vocabulary and copy distributions.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "factsum/autodiff.hpp"
#include "factsum/corpus.hpp"

namespace factsum {

class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary();
  // Specials first, then the given tokens in order (duplicates ignored).
  explicit Vocabulary(const std::vector<std::string>& tokens);

  // Most frequent tokens of the training split (ties lexicographic).
  static Vocabulary build(const DatasetSplit& train, std::size_t max_size = 0);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 32;
  std::size_t encoder_hidden = 64;
  std::size_t decoder_hidden = 64;
  std::size_t background_hidden = 64;
  std::size_t max_decode_len = 50;
  double dropout_rate = 0.5;

  void validate() const;  // throws ConfigError
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// A report mapped to ids. Findings tokens missing from the vocabulary get
// temporary ids >= vocab size (one per distinct token) so they can be copied.
struct EncodedExample {
  std::vector<int> findings;      // vocabulary ids, OOV -> kUnk
  std::vector<int> findings_ext;  // extended ids
  std::vector<int> background;    // vocabulary ids
  std::vector<std::string> oovs;  // token for extended id vocab_size + k
  std::vector<int> target;        // reference summary in extended ids + kEos
  std::size_t vocab_size = 0;

  std::size_t ext_size() const { return vocab_size + oovs.size(); }
  // Maps an extended id to its surface token.
  std::string token(const Vocabulary& vocab, int ext_id) const;
  // Extended id of a surface token (kUnk when neither in vocab nor source).
  int ext_id(const Vocabulary& vocab, const std::string& token) const;
};

EncodedExample encode_example(const Report& report, const Vocabulary& vocab);
Tokens decode_tokens(const EncodedExample& ex, const Vocabulary& vocab, const std::vector<int>& ids);

struct EncoderOutput {
  ad::Var states;       // [N, 2H]
  ad::Var states_proj;  // [N, D] attention keys
  ad::Var background;   // [B]
  ad::Var init_h, init_c;
};

struct DecoderState {
  ad::Var h, c;
};

struct StepOutput {
  ad::Var dist;       // [ext_size] final distribution
  ad::Var vocab_dist; // [V]
  ad::Var attention;  // [N]
  ad::Var p_gen;      // scalar
  DecoderState next;
};

struct StepOptions {
  std::optional<double> force_p_gen;
};

class Summarizer {
 public:
  explicit Summarizer(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  // Uniform(-scale, scale) initialisation; forget-gate biases start at 1.
  void initialize(std::uint64_t seed, double scale = 0.1);
  void zero_parameters();

  // dropout == nullptr disables dropout (evaluation).
  EncoderOutput encode(ad::Tape& tape, const EncodedExample& ex,
                       std::mt19937_64* dropout = nullptr) const;
  StepOutput decode_step(ad::Tape& tape, const EncodedExample& ex, const EncoderOutput& enc,
                         const DecoderState& state, int prev_token,
                         std::mt19937_64* dropout = nullptr,
                         const StepOptions& options = {}) const;
  DecoderState initial_state(const EncoderOutput& enc) const { return {enc.init_h, enc.init_c}; }

  // Mean over reference steps (EOS included) of -log P(y_t | y_<t, x).
  ad::Var sequence_nll(ad::Tape& tape, const EncodedExample& ex, const EncoderOutput& enc,
                       std::mt19937_64* dropout = nullptr) const;
  ad::Var sequence_nll(ad::Tape& tape, const EncodedExample& ex,
                       std::mt19937_64* dropout = nullptr) const;

  // Checkpoint directory: model.cfg, model.params, vocab.txt.
  void save(const std::string& dir, const Vocabulary& vocab) const;
  static std::pair<Summarizer, Vocabulary> load(const std::string& dir);

 private:
  ad::Var embed(ad::Tape& tape, int id, std::mt19937_64* dropout) const;
  ad::Var lstm_run_step(ad::Tape& tape, const char* prefix, ad::Var x, ad::Var& h, ad::Var& c,
                        std::size_t hidden) const;

  ModelConfig config_;
  ad::ParameterSet params_;
};

std::string format_model_config(const ModelConfig& c);
ModelConfig parse_model_config(const std::string& text);

}  // namespace factsum
