#pragma once

// Key/value run configuration shared by the command-line tools. Values come
// from built-in defaults, then a config file, then explicit overrides.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "factsum/corpus.hpp"
#include "factsum/model.hpp"
#include "factsum/training.hpp"

namespace factsum {

class RunConfig {
 public:
  RunConfig();

  // Lines of the form key=value; blank lines and lines starting with '#'
  // are ignored. Unknown keys and malformed lines throw ConfigError.
  void merge_text(std::string_view text, const std::string& origin = "config");
  void merge_file(const std::string& path);
  // "key=value".
  void set(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Sorted key=value lines.
  std::string format() const;

  std::uint64_t seed() const;
  CorpusConfig corpus() const;
  ModelConfig model(std::size_t vocab_size) const;
  std::size_t vocab_max_size() const;
  double init_scale() const;
  TrainConfig train() const;
  RewardWeights reward() const;

  // Parses and validates every typed section.
  void validate() const;

 private:
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;

  std::map<std::string, std::string> values_;
};

}  // namespace factsum
