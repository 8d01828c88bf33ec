#include <map>
#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "doctest.h"
#include "factsum/corpus.hpp"

using namespace factsum;

namespace {

std::string serialize(const DatasetSplit& s) {
  std::ostringstream os;
  save_dataset(s, os);
  return os.str();
}

CorpusConfig small(std::size_t n, std::uint64_t seed = 1) {
  CorpusConfig c;
  c.n_reports = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const Corpus a = generate_corpus(small(140));
  const Corpus b = generate_corpus(small(140));
  CHECK(serialize(a.train) == serialize(b.train));
  CHECK(serialize(a.test) == serialize(b.test));
  const Corpus c = generate_corpus(small(140, 2));
  CHECK(serialize(a.train) != serialize(c.train));
}

TEST_CASE("split sizes and disjoint ids") {
  const Corpus c = generate_corpus(small(2800));
  CHECK(c.train.size() == 2000);
  CHECK(c.dev.size() == 400);
  CHECK(c.test.size() == 400);
  std::set<std::string> ids;
  for (const auto* s : {&c.train, &c.dev, &c.test})
    for (const auto& r : s->reports) ids.insert(r.id);
  CHECK(ids.size() == 2800);
  CHECK(c.dev.name == SplitName::kDev);
}

TEST_CASE("report invariants") {
  const Corpus c = generate_corpus(small(700));
  const RuleSet& rules = default_rules();
  for (const auto& r : c.train.reports) {
    CHECK(r.findings.size() >= 10);
    CHECK(!r.summary.empty());
    for (const auto* seq : {&r.findings, &r.summary, &r.background})
      for (const auto& t : *seq)
        CHECK(std::none_of(t.begin(), t.end(), [](unsigned char ch) { return std::isupper(ch); }));
    CHECK(extract_facts(r.summary, rules) == r.facts);
    CHECK(std::find(r.background.begin(), r.background.end(), "<date>") != r.background.end());
  }
}

TEST_CASE("prevalence is respected") {
  CorpusConfig c;
  c.prevalence[7] = 0.5;
  std::size_t pos = 0;
  for (std::uint64_t i = 0; i < 10000; ++i)
    pos += generate_report(c, 77 + i * 1315423911ULL, "r").facts.present(7);
  CHECK(std::abs(pos / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("all-negative facts give the normal summary") {
  CorpusConfig c;
  for (std::size_t v = 1; v < kNumVariables; ++v) c.prevalence[v] = 0.03;
  std::size_t normals = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const Report r = generate_report(c, i, "r");
    bool any = false;
    for (std::size_t v = 1; v < kNumVariables; ++v) any = any || r.facts.present(v);
    if (!any) {
      ++normals;
      CHECK(join(r.summary) == kNormalSummary);
      CHECK(r.facts[kNoFinding] == FactStatus::kPositive);
    }
  }
  CHECK(normals > 100);
}

TEST_CASE("config validation") {
  CorpusConfig c;
  c.prevalence[2] = 0.01;
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  CorpusConfig d;
  d.split_ratios = {0.5, 0.3, 0.3};
  CHECK_THROWS_AS(generate_corpus(d), ConfigError);
  CorpusConfig e;
  e.uncertainty_rate = 1.5;
  CHECK_THROWS_AS(e.validate(), ConfigError);
}

TEST_CASE("dataset round trip") {
  DatasetSplit s = generate_corpus(small(21)).train;
  s.reports.resize(3);
  std::istringstream in(serialize(s));
  CHECK(load_dataset(in) == s);
}

TEST_CASE("dataset parse errors name the line") {
  DatasetSplit s = generate_corpus(small(21)).train;
  s.reports.resize(2);
  std::string text = serialize(s);
  text += "{\"id\":\"x\",\"background\":\"a\",\"findings\":\"b\",\"facts\":{}}\n";
  std::istringstream in(text);
  try {
    load_dataset(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream bad("{not json\n");
  CHECK_THROWS_AS(load_dataset(bad), ParseError);
  std::istringstream empty("");
  CHECK(load_dataset(empty).empty());
}

TEST_CASE("vocabulary covers every token, ordered by frequency") {
  const Corpus c = generate_corpus(small(140));
  const auto vocab = count_vocabulary({&c.train, &c.dev, &c.test});
  std::set<std::string> words;
  for (const auto& [w, n] : vocab) words.insert(w);
  for (const auto* s : {&c.train, &c.dev, &c.test})
    for (const auto& r : s->reports)
      for (const auto* seq : {&r.findings, &r.summary, &r.background})
        for (const auto& t : *seq) CHECK(words.count(t) == 1);
  for (std::size_t i = 1; i < vocab.size(); ++i) {
    CHECK(vocab[i - 1].second >= vocab[i].second);
    if (vocab[i - 1].second == vocab[i].second) CHECK(vocab[i - 1].first < vocab[i].first);
  }
}

TEST_CASE("template bank has at least three variants per cell") {
  std::map<std::pair<std::size_t, std::string>, std::set<Tokens>> cells;
  for (const auto& t : template_bank())
    if (t.variable != kNoFinding) cells[{t.variable, t.kind}].insert(t.tokens);
  for (const auto& [key, variants] : cells) {
    INFO(kVariableNames[key.first], " ", key.second);
    CHECK(variants.size() >= 3);
  }
}
