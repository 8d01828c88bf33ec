#include "factsum/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

namespace factsum {

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::kTrain: return "train";
    case SplitName::kDev: return "dev";
    case SplitName::kTest: return "test";
  }
  return "train";
}

void CorpusConfig::validate() const {
  if (n_reports == 0) throw ConfigError("n_reports must be positive");
  double total = 0.0;
  for (double r : split_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0,1]");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  for (std::size_t v = 1; v < kNumVariables; ++v) {
    const double p = prevalence[v];
    if (!(p >= 0.03 && p <= 1.0))
      throw ConfigError("prevalence of " + std::string(kVariableNames[v]) +
                        " must lie in [0.03, 1]");
  }
  auto unit = [](double r, const char* name) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
  };
  unit(uncertainty_rate, "uncertainty_rate");
  unit(pertinent_negative_rate, "pertinent_negative_rate");
  unit(negated_mention_rate, "negated_mention_rate");
  unit(resolved_rate, "resolved_rate");
  if (!(distractor_rate >= 0.0 && distractor_rate <= 20.0))
    throw ConfigError("distractor_rate must lie in [0,20]");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Slot fillers: {loc}, {sev}, {side}.
struct Slots {
  std::string loc, sev, side;
};

struct VariableTemplates {
  std::vector<std::string> severities;
  std::vector<std::string> findings_positive;
  std::string hedge_phrase;   // phrase with slots used by hedged/resolved forms
  std::string bare_phrase;    // slot-free phrase used by negations
  std::vector<std::string> summary_positive;
};

const std::vector<std::string> kLocations = {
    "right lower lobe", "left lower lobe", "right upper lobe", "left upper lobe",
    "right middle lobe", "bibasilar",     "left basilar",     "right basilar",
    "retrocardiac"};
const std::vector<std::string> kSides = {"right", "left"};

// Indexed by variable; entry 0 (no_finding) is unused.
const std::array<VariableTemplates, kNumVariables>& variable_templates() {
  static const std::array<VariableTemplates, kNumVariables> t = {{
      {},
      {{"mild", "moderate", "stable"},
       {"there is {sev} cardiomegaly", "enlarged cardiac silhouette is noted",
        "cardiac enlargement is again seen"},
       "cardiomegaly",
       "cardiomegaly",
       {"cardiomegaly", "{sev} cardiomegaly", "enlarged cardiac silhouette"}},
      {{"patchy", "hazy", "focal"},
       {"there is a {loc} airspace opacity", "{loc} airspace disease is present",
        "{sev} {loc} opacities are seen"},
       "{loc} airspace opacity",
       "airspace opacity",
       {"{loc} airspace opacity", "{loc} airspace disease", "{sev} {loc} opacity"}},
      {{"mild", "moderate", "severe"},
       {"there is {sev} pulmonary edema", "{sev} interstitial edema is present",
        "findings of {sev} pulmonary edema"},
       "pulmonary edema",
       "pulmonary edema",
       {"{sev} pulmonary edema", "pulmonary edema", "interstitial edema"}},
      {{"dense", "patchy", "focal"},
       {"{loc} consolidation is seen", "there is {loc} lobar consolidation",
        "{sev} consolidation in the {loc}"},
       "{loc} consolidation",
       "consolidation",
       {"{loc} consolidation", "consolidation in the {loc}", "{loc} lobar consolidation"}},
      {{"early", "multifocal", "focal"},
       {"{loc} pneumonia is seen", "findings compatible with {loc} pneumonia",
        "there is {loc} infection"},
       "{loc} pneumonia",
       "pneumonia",
       {"{loc} pneumonia", "findings concerning for pneumonia", "{sev} pneumonia"}},
      {{"mild", "linear", "subsegmental"},
       {"{sev} {loc} atelectasis is present", "there are {loc} atelectatic changes",
        "mild volume loss in the {loc}"},
       "{loc} atelectasis",
       "atelectasis",
       {"{loc} atelectasis", "{sev} atelectasis", "{loc} atelectatic changes"}},
      {{"small", "moderate", "large"},
       {"there is a {sev} {side} pneumothorax", "{side} apical pneumothorax is seen",
        "a {sev} {side} pneumothorax persists"},
       "{side} pneumothorax",
       "pneumothorax",
       {"{side} pneumothorax", "{sev} {side} pneumothorax", "pneumothorax is seen"}},
      {{"small", "moderate", "large"},
       {"{sev} {side} pleural effusion is present", "there is a {sev} {side} pleural effusion",
        "{side} pleural effusion persists"},
       "{side} pleural effusion",
       "pleural effusion",
       {"{side} pleural effusion", "{sev} {side} pleural effusion", "pleural effusion persists"}},
  }};
  return t;
}

const std::vector<std::string> kHedgedFindings = {
    "possible {p}", "findings concerning for {p}", "{p} is likely present",
    "questionable {p}"};
const std::vector<std::string> kNegatedFindings = {
    "no {n}", "there is no {n}", "no evidence of {n}", "{n} is not seen"};
const std::vector<std::string> kResolvedFindings = {
    "{p} seen on prior is no longer evident", "previously seen {p} has resolved",
    "interval resolution of {p}"};
const std::vector<std::string> kNegatedSummary = {"no {n}", "no evidence of {n}",
                                                  "{n} is not seen"};
const std::vector<std::string> kDistractors = {
    "the osseous structures are intact",
    "lines and tubes are unchanged",
    "the cardiomediastinal silhouette is within normal limits",
    "degenerative changes of the thoracic spine",
    "the trachea is midline",
    "median sternotomy wires are intact",
    "thoracic aorta appears calcified",
    "no acute osseous abnormality",
    "the lungs are well expanded",
    "surgical clips in the upper abdomen",
    "there is a right internal jugular catheter",
    "old healed rib fractures"};
const std::vector<std::string> kStudyTypes = {
    "radiographic examination of the chest", "portable chest radiograph",
    "chest radiograph two views"};
const std::vector<std::string> kHistories = {
    "cough", "fever and cough", "shortness of breath", "chest pain",
    "trauma", "post op", "evaluate line placement", "dyspnea"};

// Summary variant weights: skewed so a modal phrasing exists.
constexpr std::array<double, 3> kVariantWeights = {0.6, 0.25, 0.15};

std::string fill(std::string s, const Slots& slots, const std::string& p = {},
                 const std::string& n = {}) {
  auto sub = [&](const std::string& key, const std::string& val) {
    for (std::size_t pos; (pos = s.find(key)) != std::string::npos;) s.replace(pos, key.size(), val);
  };
  sub("{p}", p);
  sub("{n}", n);
  sub("{loc}", slots.loc);
  sub("{sev}", slots.sev);
  sub("{side}", slots.side);
  return s;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }
  template <typename T>
  const T& choose(const std::vector<T>& v) { return v[index(v.size())]; }
  std::size_t weighted_variant() {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < kVariantWeights.size(); ++i) {
      acc += kVariantWeights[i];
      if (u < acc) return i;
    }
    return kVariantWeights.size() - 1;
  }
  std::size_t poisson(double mean) {
    return std::poisson_distribution<std::size_t>(mean)(rng_);
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

void append_sentence(Tokens& out, const std::string& text) {
  const Tokens t = tokenize(text);
  out.insert(out.end(), t.begin(), t.end());
}

}  // namespace

Report generate_report(const CorpusConfig& config, std::uint64_t seed, const std::string& id) {
  const auto& tmpl = variable_templates();
  Sampler s(seed);
  Report r;
  r.id = id;

  std::array<Slots, kNumVariables> slots;
  bool any_positive = false;
  std::array<bool, kNumVariables> positive{};
  for (std::size_t v = 1; v < kNumVariables; ++v) {
    slots[v] = Slots{s.choose(kLocations), s.choose(tmpl[v].severities), s.choose(kSides)};
    positive[v] = s.bernoulli(config.prevalence[v]);
    any_positive = any_positive || positive[v];
  }

  FactVector facts;
  std::vector<std::string> findings_sentences;
  std::vector<std::string> summary_sentences;
  if (!any_positive) facts[kNoFinding] = FactStatus::kPositive;
  for (std::size_t v = 1; v < kNumVariables; ++v) {
    const auto& t = tmpl[v];
    const std::string hedge = fill(t.hedge_phrase, slots[v]);
    if (positive[v]) {
      facts[v] = FactStatus::kPositive;
      if (s.bernoulli(config.uncertainty_rate))
        findings_sentences.push_back(fill(s.choose(kHedgedFindings), slots[v], hedge));
      else
        findings_sentences.push_back(fill(s.choose(t.findings_positive), slots[v]));
      summary_sentences.push_back(fill(t.summary_positive[s.weighted_variant()], slots[v]));
      continue;
    }
    const bool pertinent = any_positive && s.bernoulli(config.pertinent_negative_rate);
    if (pertinent) {
      facts[v] = FactStatus::kNegative;
      findings_sentences.push_back(fill(s.choose(kNegatedFindings), slots[v], {}, t.bare_phrase));
      summary_sentences.push_back(
          fill(kNegatedSummary[s.weighted_variant()], slots[v], {}, t.bare_phrase));
      continue;
    }
    if (s.bernoulli(config.resolved_rate))
      findings_sentences.push_back(fill(s.choose(kResolvedFindings), slots[v], hedge));
    else if (s.bernoulli(config.negated_mention_rate))
      findings_sentences.push_back(fill(s.choose(kNegatedFindings), slots[v], {}, t.bare_phrase));
  }
  std::size_t n_distract = s.poisson(config.distractor_rate);
  std::vector<std::string> pool = kDistractors;
  std::shuffle(pool.begin(), pool.end(), s.engine());
  n_distract = std::min(n_distract, pool.size());
  for (std::size_t i = 0; i < n_distract; ++i) findings_sentences.push_back(pool[i]);
  std::shuffle(findings_sentences.begin(), findings_sentences.end(), s.engine());

  for (const auto& sent : findings_sentences) {
    append_sentence(r.findings, sent);
    r.findings.push_back(".");
  }
  // Findings must reach 10 tokens; pad with further distractors.
  for (std::size_t i = n_distract; r.findings.size() < 10 && i < pool.size(); ++i) {
    append_sentence(r.findings, pool[i]);
    r.findings.push_back(".");
  }

  if (summary_sentences.empty()) {
    append_sentence(r.summary, kNormalSummary);
  } else {
    for (std::size_t i = 0; i < summary_sentences.size(); ++i) {
      if (i) r.summary.push_back(".");
      append_sentence(r.summary, summary_sentences[i]);
    }
  }

  std::string history = s.choose(kHistories);
  if ((positive[5] || positive[4]) && s.bernoulli(0.5)) history = "fever and cough";
  else if (positive[7] && s.bernoulli(0.5)) history = "trauma";
  else if ((positive[3] || positive[8]) && s.bernoulli(0.5)) history = "shortness of breath";
  append_sentence(r.background, s.choose(kStudyTypes) +
                                    " : <date> <time> . clinical history : <age> years of age , " +
                                    history + " .");
  r.facts = facts;
  return r;
}

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(config.n_reports * config.split_ratios[0]));
  const std::size_t n_dev = std::min(
      config.n_reports - n_train,
      static_cast<std::size_t>(std::llround(config.n_reports * config.split_ratios[1])));
  const std::size_t n_test = config.n_reports - n_train - n_dev;

  auto make = [&](SplitName name, std::size_t n, std::uint64_t block) {
    DatasetSplit split;
    split.name = name;
    split.reports.reserve(n);
    const std::uint64_t block_seed = splitmix64(splitmix64(config.seed) ^ (block * 0x5851f42d4c957f2dULL));
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = std::string(to_string(name)) + "-" +
                             std::to_string(config.seed) + "-" + std::to_string(i);
      split.reports.push_back(generate_report(config, splitmix64(block_seed + i), id));
    }
    return split;
  };
  Corpus c;
  c.train = make(SplitName::kTrain, n_train, 1);
  c.dev = make(SplitName::kDev, n_dev, 2);
  c.test = make(SplitName::kTest, n_test, 3);
  return c;
}

std::vector<RenderedTemplate> template_bank() {
  const auto& tmpl = variable_templates();
  std::vector<RenderedTemplate> out;
  auto add = [&](std::size_t v, FactStatus st, const char* kind, const std::string& text) {
    out.push_back(RenderedTemplate{v, st, kind, tokenize(text)});
  };
  for (std::size_t v = 1; v < kNumVariables; ++v) {
    const auto& t = tmpl[v];
    for (const auto& loc : kLocations)
      for (const auto& sev : t.severities)
        for (const auto& side : kSides) {
          const Slots sl{loc, sev, side};
          const std::string hedge = fill(t.hedge_phrase, sl);
          for (const auto& f : t.findings_positive)
            add(v, FactStatus::kPositive, "findings_positive", fill(f, sl));
          for (const auto& f : kHedgedFindings)
            add(v, FactStatus::kPositive, "findings_hedged", fill(f, sl, hedge));
          for (const auto& f : kResolvedFindings)
            add(v, FactStatus::kNegative, "findings_resolved", fill(f, sl, hedge));
          for (const auto& f : t.summary_positive)
            add(v, FactStatus::kPositive, "summary_positive", fill(f, sl));
        }
    for (const auto& f : kNegatedFindings)
      add(v, FactStatus::kNegative, "findings_negated", fill(f, {}, {}, t.bare_phrase));
    for (const auto& f : kNegatedSummary)
      add(v, FactStatus::kNegative, "summary_negated", fill(f, {}, {}, t.bare_phrase));
  }
  add(kNoFinding, FactStatus::kPositive, "summary_normal", kNormalSummary);
  for (const auto& d : kDistractors) add(kNoFinding, FactStatus::kNotMentioned, "distractor", d);
  return out;
}

// ---- persistence ------------------------------------------------------------

std::string format_facts_json(const FactVector& facts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t v = 0; v < kNumVariables; ++v)
    j[std::string(kVariableNames[v])] = std::string(to_string(facts[v]));
  return j.dump();
}

void save_dataset(const DatasetSplit& split, std::ostream& out) {
  for (const auto& r : split.reports) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["background"] = join(r.background);
    j["findings"] = join(r.findings);
    j["summary"] = join(r.summary);
    nlohmann::ordered_json facts = nlohmann::ordered_json::object();
    for (std::size_t v = 0; v < kNumVariables; ++v)
      facts[std::string(kVariableNames[v])] = std::string(to_string(r.facts[v]));
    j["facts"] = facts;
    out << j.dump() << '\n';
  }
}

void save_dataset(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_dataset(split, out);
}

namespace {

Tokens split_spaces(const std::string& s) {
  Tokens out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

}  // namespace

DatasetSplit load_dataset(std::istream& in, SplitName name) {
  DatasetSplit split;
  split.name = name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not an object");
    Report r;
    for (const char* key : {"id", "background", "findings", "summary"}) {
      if (!j.contains(key) || !j[key].is_string())
        throw ParseError(line_no, std::string("missing or non-string field '") + key + "'");
    }
    r.id = j["id"].get<std::string>();
    r.background = split_spaces(j["background"].get<std::string>());
    r.findings = split_spaces(j["findings"].get<std::string>());
    r.summary = split_spaces(j["summary"].get<std::string>());
    if (!j.contains("facts") || !j["facts"].is_object())
      throw ParseError(line_no, "missing or non-object field 'facts'");
    for (auto it = j["facts"].begin(); it != j["facts"].end(); ++it) {
      const auto v = variable_index(it.key());
      if (!v) throw ParseError(line_no, "unknown variable '" + it.key() + "'");
      if (!it.value().is_string()) throw ParseError(line_no, "non-string status for " + it.key());
      const auto st = parse_status(it.value().get<std::string>());
      if (!st) throw ParseError(line_no, "unknown status '" + it.value().get<std::string>() + "'");
      r.facts[*v] = *st;
    }
    split.reports.push_back(std::move(r));
  }
  return split;
}

DatasetSplit load_dataset(const std::string& path, SplitName name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return load_dataset(in, name);
}

std::vector<std::pair<std::string, std::size_t>> count_vocabulary(
    const std::vector<const DatasetSplit*>& splits) {
  std::map<std::string, std::size_t> counts;
  for (const auto* split : splits)
    for (const auto& r : split->reports)
      for (const auto* seq : {&r.background, &r.findings, &r.summary})
        for (const auto& tok : *seq) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

void save_vocabulary(const std::vector<std::pair<std::string, std::size_t>>& vocab,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [tok, n] : vocab) out << tok << '\n';
}

}  // namespace factsum
