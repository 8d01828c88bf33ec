#pragma once

// Synthetic radiology-report corpus with planted ground-truth fact vectors.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "factsum/factext.hpp"

namespace factsum {

struct Report {
  std::string id;
  Tokens background;
  Tokens findings;
  Tokens summary;
  FactVector facts;

  friend bool operator==(const Report&, const Report&) = default;
};

enum class SplitName { kTrain, kDev, kTest };
std::string_view to_string(SplitName s);

struct DatasetSplit {
  SplitName name = SplitName::kTrain;
  std::vector<Report> reports;

  std::size_t size() const { return reports.size(); }
  bool empty() const { return reports.empty(); }
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CorpusConfig {
  std::size_t n_reports = 2800;
  std::array<double, 3> split_ratios = {5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0};
  // Positive probability per variable in canonical order; the no_finding
  // entry is ignored (it is derived).
  std::array<double, kNumVariables> prevalence = {0.0,  0.15, 0.20, 0.15, 0.10,
                                                  0.10, 0.20, 0.10, 0.20};
  double uncertainty_rate = 0.25;
  // Mean number of fact-free sentences per findings section.
  double distractor_rate = 2.0;
  // Chance that a non-positive variable is stated as a pertinent negative in
  // the summary (only when the summary has some positive finding).
  double pertinent_negative_rate = 0.15;
  // Chance that an unmentioned variable still gets a negated findings sentence.
  double negated_mention_rate = 0.35;
  // Chance that an unmentioned variable gets a "previously seen, now resolved"
  // findings sentence.
  double resolved_rate = 0.12;
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

struct Corpus {
  DatasetSplit train, dev, test;
};

// Generates the three splits; each split is drawn from its own seed block.
Corpus generate_corpus(const CorpusConfig& config);

// One generated report from an explicit seed (used for property tests).
Report generate_report(const CorpusConfig& config, std::uint64_t seed, const std::string& id);

// Every surface template the generator can emit, rendered with fixed slot
// fillers, paired with the status extraction must assign.
struct RenderedTemplate {
  std::size_t variable;
  FactStatus status;
  std::string kind;  // findings_positive, findings_hedged, findings_negated, ...
  Tokens tokens;
};
std::vector<RenderedTemplate> template_bank();

inline const std::string kNormalSummary = "no acute cardiopulmonary abnormality";

// ---- persistence --------------------------------------------------------
// One JSON object per line with fields id, background, findings, summary
// (space-joined tokens) and facts (variable -> status string).

void save_dataset(const DatasetSplit& split, std::ostream& out);
void save_dataset(const DatasetSplit& split, const std::string& path);
DatasetSplit load_dataset(std::istream& in, SplitName name = SplitName::kTrain);
DatasetSplit load_dataset(const std::string& path, SplitName name = SplitName::kTrain);

// Vocabulary over all tokens of the given splits: descending frequency, then
// lexicographic.
std::vector<std::pair<std::string, std::size_t>> count_vocabulary(
    const std::vector<const DatasetSplit*>& splits);
void save_vocabulary(const std::vector<std::pair<std::string, std::size_t>>& vocab,
                     const std::string& path);

std::string format_facts_json(const FactVector& facts);

}  // namespace factsum
