#include "factsum/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace factsum {

NgramProfile ngram_profile(const std::vector<Tokens>& summaries, std::size_t n, std::size_t k) {
  if (n == 0 || k == 0) throw std::invalid_argument("ngram_profile: n and k must be >= 1");
  std::map<Tokens, std::size_t> counts, docs;
  NgramProfile prof;
  prof.n = n;
  for (const auto& s : summaries) {
    std::set<Tokens> seen;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      Tokens g(s.begin() + static_cast<std::ptrdiff_t>(i),
               s.begin() + static_cast<std::ptrdiff_t>(i + n));
      ++counts[g];
      ++prof.total;
      seen.insert(std::move(g));
    }
    for (const auto& g : seen) ++docs[g];
  }
  for (const auto& [g, c] : counts) {
    NgramEntry e;
    e.gram = g;
    e.count = c;
    e.share = static_cast<double>(c) / static_cast<double>(prof.total);
    e.output_ratio = static_cast<double>(docs[g]) / static_cast<double>(summaries.size());
    prof.top.push_back(std::move(e));
  }
  std::stable_sort(prof.top.begin(), prof.top.end(),
                   [](const NgramEntry& a, const NgramEntry& b) { return a.count > b.count; });
  if (prof.top.size() > k) prof.top.resize(k);
  return prof;
}

std::vector<Tokens> split_sentences(const Tokens& summary) {
  std::vector<Tokens> out;
  Tokens cur;
  for (const auto& t : summary) {
    if (t == ".") {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(t);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Tokens join_sentences(const std::vector<Tokens>& sentences) {
  Tokens out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out.push_back(".");
    out.insert(out.end(), sentences[i].begin(), sentences[i].end());
  }
  return out;
}

double sentence_rate(const std::vector<Tokens>& summaries, const Tokens& sentence) {
  if (summaries.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : summaries) {
    const auto sents = split_sentences(s);
    hits += std::find(sents.begin(), sents.end(), sentence) != sents.end();
  }
  return static_cast<double>(hits) / static_cast<double>(summaries.size());
}

SentenceCount most_frequent_sentence(const std::vector<Tokens>& summaries) {
  std::map<Tokens, std::size_t> docs;
  for (const auto& s : summaries) {
    auto sents = split_sentences(s);
    std::sort(sents.begin(), sents.end());
    sents.erase(std::unique(sents.begin(), sents.end()), sents.end());
    for (auto& x : sents) ++docs[std::move(x)];
  }
  SentenceCount best;
  std::size_t best_count = 0;
  for (const auto& [sent, c] : docs)
    if (c > best_count) {
      best_count = c;
      best.sentence = sent;
    }
  if (!summaries.empty()) best.rate = static_cast<double>(best_count) / summaries.size();
  return best;
}

// ---- TrigramLM -----------------------------------------------------------------

TrigramLM::TrigramLM(double k) : k_(k) {
  if (!(k >= 0.0 && std::isfinite(k))) throw std::invalid_argument("TrigramLM: k must be >= 0");
  add_outcome(kUnk);
  add_outcome(kEos);
}

void TrigramLM::add_outcome(const std::string& w) {
  if (outcome_index_.emplace(w, outcomes_.size()).second) outcomes_.push_back(w);
}

std::string TrigramLM::map(const std::string& w) const {
  return outcome_index_.count(w) ? w : std::string(kUnk);
}

void TrigramLM::train(const std::vector<Tokens>& summaries,
                      const std::vector<std::string>& extra_vocabulary) {
  for (const auto& s : summaries)
    for (const auto& w : s) add_outcome(w);
  for (const auto& w : extra_vocabulary) add_outcome(w);
  for (const auto& s : summaries) {
    std::string u = kBos, v = kBos;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      const std::string w = i < s.size() ? s[i] : std::string(kEos);
      ++uni_[w];
      ++total_;
      ++bi_[{v, w}];
      ++uni_ctx_[v];
      ++tri_[{u, v, w}];
      ++tri_ctx_[{u, v}];
      u = v;
      v = w;
    }
  }
}

double TrigramLM::prob(const std::string& u0, const std::string& v0, const std::string& w0) const {
  const std::string w = map(w0);
  const std::string u = u0 == kBos ? u0 : map(u0);
  const std::string v = v0 == kBos ? v0 : map(v0);
  auto count = [](const auto& m, const auto& key) -> double {
    auto it = m.find(key);
    return it == m.end() ? 0.0 : static_cast<double>(it->second);
  };
  double p1;
  {
    const double denom = static_cast<double>(total_) + k_ * static_cast<double>(outcomes_.size());
    p1 = denom > 0.0 ? (count(uni_, w) + k_) / denom : 1.0 / static_cast<double>(outcomes_.size());
  }
  double p2 = p1;
  {
    const double c = count(uni_ctx_, v);
    if (c + k_ > 0.0 && c > 0.0) p2 = (count(bi_, std::make_pair(v, w)) + k_ * p1) / (c + k_);
  }
  double p3 = p2;
  {
    const double c = count(tri_ctx_, std::make_pair(u, v));
    if (c + k_ > 0.0 && c > 0.0)
      p3 = (count(tri_, std::make_tuple(u, v, w)) + k_ * p2) / (c + k_);
  }
  return p3;
}

double TrigramLM::perplexity(const std::vector<Tokens>& summaries) const {
  double nll = 0.0;
  std::size_t n = 0;
  for (const auto& s : summaries) {
    std::string u = kBos, v = kBos;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      const std::string w = i < s.size() ? s[i] : std::string(kEos);
      const double p = prob(u, v, w);
      if (p <= 0.0) return std::numeric_limits<double>::infinity();
      nll -= std::log(p);
      ++n;
      u = v;
      v = w;
    }
  }
  if (n == 0) throw std::invalid_argument("perplexity: no tokens");
  return std::exp(nll / static_cast<double>(n));
}

void TrigramLM::save(std::ostream& out) const {
  out.precision(17);
  out << "trigramlm 1\nk " << k_ << "\n";
  for (const auto& w : outcomes_) out << "o\t" << w << '\n';
  for (const auto& [key, c] : tri_)
    out << "t\t" << std::get<0>(key) << '\t' << std::get<1>(key) << '\t' << std::get<2>(key)
        << '\t' << c << '\n';
}

void TrigramLM::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save(out);
}

TrigramLM TrigramLM::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "trigramlm 1")
    throw std::runtime_error("not a trigram LM file (bad header)");
  if (!std::getline(in, line) || line.rfind("k ", 0) != 0)
    throw std::runtime_error("trigram LM file: missing k");
  TrigramLM lm(std::stod(line.substr(2)));
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, '\t');) f.push_back(x);
    if (f[0] == "o" && f.size() == 2) {
      lm.add_outcome(f[1]);
    } else if (f[0] == "t" && f.size() == 5) {
      const std::size_t c = std::stoul(f[4]);
      const auto& u = f[1];
      const auto& v = f[2];
      const auto& w = f[3];
      lm.tri_[{u, v, w}] += c;
      lm.tri_ctx_[{u, v}] += c;
      // Every token position contributes exactly one trigram, so lower orders
      // are recoverable from the trigram table.
      lm.bi_[{v, w}] += c;
      lm.uni_ctx_[v] += c;
      lm.uni_[w] += c;
      lm.total_ += c;
    } else {
      throw std::runtime_error("trigram LM file: bad line " + std::to_string(lineno));
    }
  }
  return lm;
}

TrigramLM TrigramLM::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return load(in);
}

// ---- LexRank ---------------------------------------------------------------------

std::vector<std::vector<double>> lexrank_transition(const std::vector<Tokens>& sentences,
                                                    double threshold) {
  const std::size_t n = sentences.size();
  std::map<std::string, std::size_t> df;
  std::vector<std::map<std::string, double>> tf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& w : sentences[i]) tf[i][w] += 1.0;
    for (const auto& [w, c] : tf[i]) ++df[w];
  }
  // Smoothed idf keeps terms shared by every sentence from vanishing.
  std::vector<std::map<std::string, double>> vec(n);
  std::vector<double> norm(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [w, c] : tf[i]) {
      const double idf = std::log((1.0 + n) / (1.0 + df[w])) + 1.0;
      vec[i][w] = c * idf;
      norm[i] += c * idf * c * idf;
    }
    norm[i] = std::sqrt(norm[i]);
  }
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double cos = 0.0;
      if (i == j) {
        cos = 1.0;
      } else if (norm[i] > 0.0 && norm[j] > 0.0) {
        for (const auto& [w, x] : vec[i]) {
          auto it = vec[j].find(w);
          if (it != vec[j].end()) cos += x * it->second;
        }
        cos /= norm[i] * norm[j];
      }
      m[i][j] = cos >= threshold ? 1.0 : 0.0;
    }
    const double row = std::accumulate(m[i].begin(), m[i].end(), 0.0);
    for (double& x : m[i]) x /= row;
  }
  return m;
}

LexRankResult lexrank(const Tokens& document, const LexRankOptions& options) {
  if (!(options.damping > 0.0 && options.damping < 1.0))
    throw std::invalid_argument("lexrank: damping must lie in (0,1)");
  if (options.top_n == 0) throw std::invalid_argument("lexrank: top_n must be >= 1");
  LexRankResult res;
  res.sentences = split_sentences(document);
  const std::size_t n = res.sentences.size();
  if (n == 0) throw std::invalid_argument("lexrank: no sentences");
  const auto m = lexrank_transition(res.sentences, options.threshold);

  const double d = options.damping;
  std::vector<double> p(n, 1.0 / n), next(n);
  for (res.iterations = 1; res.iterations <= options.max_iterations; ++res.iterations) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += m[i][j] * p[i];
      next[j] = (1.0 - d) / n + d * s;
    }
    double delta = 0.0;
    for (std::size_t j = 0; j < n; ++j) delta += std::abs(next[j] - p[j]);
    p.swap(next);
    if (delta < options.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, options.max_iterations);
  res.centrality = p;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  order.resize(std::min(options.top_n, n));
  std::sort(order.begin(), order.end());
  res.selected = order;
  std::vector<Tokens> chosen;
  for (std::size_t i : order) chosen.push_back(res.sentences[i]);
  res.summary = join_sentences(chosen);
  return res;
}

}  // namespace factsum
