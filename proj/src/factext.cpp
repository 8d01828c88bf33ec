#include "factsum/factext.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "default_rules.inc"

namespace factsum {

std::string_view to_string(FactStatus s) {
  switch (s) {
    case FactStatus::kPositive: return "positive";
    case FactStatus::kNegative: return "negative";
    case FactStatus::kNotMentioned: return "not_mentioned";
  }
  return "not_mentioned";
}

std::optional<FactStatus> parse_status(std::string_view s) {
  if (s == "positive") return FactStatus::kPositive;
  if (s == "negative") return FactStatus::kNegative;
  if (s == "not_mentioned") return FactStatus::kNotMentioned;
  return std::nullopt;
}

std::optional<std::size_t> variable_index(std::string_view name) {
  for (std::size_t i = 0; i < kVariableNames.size(); ++i)
    if (kVariableNames[i] == name) return i;
  return std::nullopt;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (ch == '.' || ch == ',' || ch == ';' || ch == ':') {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// ---- rules ------------------------------------------------------------------

void RuleSet::validate() const {
  if (window < 1) throw RuleError("window must be >= 1");
  for (std::size_t v = 0; v < kNumVariables; ++v)
    if (mentions[v].empty())
      throw RuleError("empty mention list for variable " + std::string(kVariableNames[v]));
  if (negation.empty()) throw RuleError("empty negation list");
  if (uncertainty.empty()) throw RuleError("empty uncertainty list");
}

void RuleSet::compile() {
  index.clear();
  auto put = [&](const std::vector<Tokens>& phrases, PhraseKind kind, std::size_t var) {
    for (const auto& p : phrases)
      if (!p.empty()) index[p.front()].push_back(PhraseEntry{p, kind, var});
  };
  for (std::size_t v = 0; v < kNumVariables; ++v) put(mentions[v], PhraseKind::kMention, v);
  put(negation, PhraseKind::kNegation, 0);
  put(post_negation, PhraseKind::kPostNegation, 0);
  put(uncertainty, PhraseKind::kUncertainty, 0);
  put(scope_breakers, PhraseKind::kBreaker, 0);
  for (auto& [first, entries] : index)
    std::stable_sort(entries.begin(), entries.end(),
                     [](const PhraseEntry& a, const PhraseEntry& b) {
                       return a.phrase.size() > b.phrase.size();
                     });
}

namespace {

void add_unique(std::vector<Tokens>& list, Tokens phrase) {
  if (std::find(list.begin(), list.end(), phrase) == list.end())
    list.push_back(std::move(phrase));
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

RuleSet parse_rules(std::string_view text) {
  RuleSet rules;
  std::vector<Tokens>* section = nullptr;
  std::optional<std::size_t> variable;
  std::array<bool, kNumVariables> declared{};
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> RuleError {
    return RuleError("rules line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (section == nullptr) throw fail("phrase outside a list section");
      Tokens phrase;
      std::istringstream ws(line);
      for (std::string w; ws >> w;) {
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        phrase.push_back(w);
      }
      add_unique(*section, std::move(phrase));
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "window") {
      try {
        const long w = std::stol(value);
        if (w < 1) throw fail("window must be >= 1");
        rules.window = static_cast<std::size_t>(w);
      } catch (const std::logic_error&) {
        throw fail("bad window value '" + value + "'");
      }
      section = nullptr;
    } else if (key == "variable") {
      variable = variable_index(value);
      if (!variable) throw fail("unknown variable '" + value + "'");
      section = nullptr;
    } else if (key == "mention") {
      if (!variable) throw fail("mention= before variable=");
      declared[*variable] = true;
      section = &rules.mentions[*variable];
    } else if (key == "negation") {
      section = &rules.negation;
    } else if (key == "post_negation") {
      section = &rules.post_negation;
    } else if (key == "uncertainty") {
      section = &rules.uncertainty;
    } else if (key == "breaker") {
      section = &rules.scope_breakers;
    } else {
      throw fail("unknown key '" + key + "'");
    }
    if (section != nullptr && !value.empty()) throw fail("list section '" + key + "' takes no inline value");
  }
  for (std::size_t v = 0; v < kNumVariables; ++v)
    if (!declared[v] || rules.mentions[v].empty())
      throw RuleError("empty phrase list for variable " + std::string(kVariableNames[v]));
  rules.validate();
  rules.compile();
  return rules;
}

RuleSet load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuleError("cannot open rule file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rules(ss.str());
}

std::string format_rules(const RuleSet& rules) {
  std::ostringstream os;
  auto list = [&](const char* key, const std::vector<Tokens>& phrases) {
    os << key << "=\n";
    for (const auto& p : phrases) os << join(p) << '\n';
    os << '\n';
  };
  os << "window=" << rules.window << "\n\n";
  list("negation", rules.negation);
  list("post_negation", rules.post_negation);
  list("uncertainty", rules.uncertainty);
  list("breaker", rules.scope_breakers);
  for (std::size_t v = 0; v < kNumVariables; ++v) {
    os << "variable=" << kVariableNames[v] << '\n';
    list("mention", rules.mentions[v]);
  }
  return os.str();
}

std::string_view default_rules_text() { return kDefaultRulesText; }

const RuleSet& default_rules() {
  static const RuleSet rules = parse_rules(kDefaultRulesText);
  return rules;
}

// ---- extraction --------------------------------------------------------------

namespace {

struct Segment {
  std::size_t begin = 0, end = 0;
  bool mention = false;
  std::size_t variable = 0;
  bool negation = false, post_negation = false, breaker = false;
};

// Greedy longest-match segmentation of one sentence.
std::vector<Segment> segment(std::span<const std::string> sent, const PhraseIndex& index) {
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < sent.size()) {
    auto it = index.find(sent[i]);
    std::size_t best = 0;
    Segment seg;
    if (it != index.end()) {
      for (const auto& e : it->second) {
        const std::size_t n = e.phrase.size();
        if (n < best) break;
        if (i + n > sent.size()) continue;
        if (!std::equal(e.phrase.begin(), e.phrase.end(), sent.begin() + i)) continue;
        best = n;
        switch (e.kind) {
          case PhraseKind::kMention:
            seg.mention = true;
            seg.variable = e.variable;
            break;
          case PhraseKind::kNegation: seg.negation = true; break;
          case PhraseKind::kPostNegation: seg.post_negation = true; break;
          case PhraseKind::kBreaker: seg.breaker = true; break;
          case PhraseKind::kUncertainty: break;  // uncertain reads as positive
        }
      }
    }
    if (best == 0) {
      ++i;
      continue;
    }
    if (seg.mention) seg.negation = seg.post_negation = seg.breaker = false;
    seg.begin = i;
    seg.end = i + best;
    out.push_back(seg);
    i += best;
  }
  return out;
}

bool negated(const std::vector<Segment>& segs, std::size_t m, std::size_t window) {
  const Segment& mention = segs[m];
  for (std::size_t k = m; k-- > 0;) {
    const Segment& s = segs[k];
    if (mention.begin - s.end >= window) break;
    if (s.breaker) break;
    if (s.negation) return true;
  }
  for (std::size_t k = m + 1; k < segs.size(); ++k) {
    const Segment& s = segs[k];
    if (s.begin - mention.end >= window) break;
    if (s.breaker) break;
    if (s.post_negation) return true;
  }
  return false;
}

}  // namespace

FactVector extract_facts(std::span<const std::string> tokens, const RuleSet& rules) {
  RuleSet compiled_copy;
  const PhraseIndex* index = &rules.index;
  if (index->empty()) {
    compiled_copy = rules;
    compiled_copy.compile();
    index = &compiled_copy.index;
  }
  std::array<bool, kNumVariables> pos{}, neg{};
  bool global_normal = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= tokens.size(); ++i) {
    if (i < tokens.size() && tokens[i] != ".") continue;
    const auto sent = tokens.subspan(start, i - start);
    start = i + 1;
    const auto segs = segment(sent, *index);
    for (std::size_t m = 0; m < segs.size(); ++m) {
      if (!segs[m].mention) continue;
      const std::size_t v = segs[m].variable;
      if (v == kNoFinding) {
        global_normal = true;
        continue;
      }
      if (negated(segs, m, rules.window)) neg[v] = true;
      else pos[v] = true;
    }
  }
  FactVector out;
  bool any_positive = false;
  for (std::size_t v = 1; v < kNumVariables; ++v) {
    if (pos[v]) {
      out[v] = FactStatus::kPositive;
      any_positive = true;
    } else if (neg[v]) {
      out[v] = FactStatus::kNegative;
    }
  }
  if (global_normal && !any_positive) out[kNoFinding] = FactStatus::kPositive;
  return out;
}

}  // namespace factsum
