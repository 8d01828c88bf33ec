#pragma once

// Rule-based fact extraction: maps a lowercase token sequence to a status per
// clinical variable using phrase lexicons and windowed negation scope.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace factsum {

using Tokens = std::vector<std::string>;

enum class FactStatus { kNotMentioned = 0, kPositive = 1, kNegative = 2 };

std::string_view to_string(FactStatus s);
std::optional<FactStatus> parse_status(std::string_view s);

inline constexpr std::size_t kNumVariables = 9;

// Canonical variable order. Index 0 (no_finding) is derived from the others.
inline constexpr std::array<std::string_view, kNumVariables> kVariableNames = {
    "no_finding",    "cardiomegaly", "airspace_opacity",
    "edema",         "consolidation", "pneumonia",
    "atelectasis",   "pneumothorax", "pleural_effusion"};

inline constexpr std::size_t kNoFinding = 0;

std::optional<std::size_t> variable_index(std::string_view name);

class FactVector {
 public:
  FactVector() { statuses_.fill(FactStatus::kNotMentioned); }

  static constexpr std::size_t size() { return kNumVariables; }
  FactStatus operator[](std::size_t i) const { return statuses_[i]; }
  FactStatus& operator[](std::size_t i) { return statuses_[i]; }
  const std::array<FactStatus, kNumVariables>& statuses() const { return statuses_; }
  bool present(std::size_t i) const { return statuses_[i] == FactStatus::kPositive; }

  friend bool operator==(const FactVector&, const FactVector&) = default;

 private:
  std::array<FactStatus, kNumVariables> statuses_;
};

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PhraseKind { kMention, kNegation, kPostNegation, kUncertainty, kBreaker };

struct PhraseEntry {
  Tokens phrase;
  PhraseKind kind;
  std::size_t variable = 0;  // mentions only
};

// Phrases keyed by first token, longest first.
using PhraseIndex = std::unordered_map<std::string, std::vector<PhraseEntry>>;

struct RuleSet {
  // mentions[v]: phrases (token lists) naming variable v. For no_finding these
  // are the global-normal phrases.
  std::array<std::vector<Tokens>, kNumVariables> mentions;
  std::vector<Tokens> negation;       // cue precedes the mention
  std::vector<Tokens> post_negation;  // cue follows the mention
  std::vector<Tokens> uncertainty;
  std::vector<Tokens> scope_breakers;
  std::size_t window = 5;

  PhraseIndex index;

  // Throws RuleError on an empty lexicon or window < 1.
  void validate() const;
  // Rebuilds `index` from the phrase lists; call after editing them.
  void compile();
};

// Parses the plain-text rule format:
//   window=5
//   negation=            <- list section, one phrase per following line
//   no
//   variable=edema       <- selects the variable for the next mention=
//   mention=
//   pulmonary edema
// Recognised list sections: negation, post_negation, uncertainty, breaker,
// mention. '#' starts a comment line. Duplicate phrases are dropped.
RuleSet parse_rules(std::string_view text);
RuleSet load_rules(const std::string& path);
std::string format_rules(const RuleSet& rules);

// Shipped rule set; identical to data/default.rules.
const RuleSet& default_rules();
std::string_view default_rules_text();

Tokens tokenize(std::string_view text);
std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

FactVector extract_facts(std::span<const std::string> tokens, const RuleSet& rules);
inline FactVector extract_facts(std::string_view text, const RuleSet& rules) {
  const Tokens t = tokenize(text);
  return extract_facts(std::span<const std::string>(t), rules);
}

}  // namespace factsum
