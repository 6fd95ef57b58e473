#include "intentloop/qpp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <spdlog/spdlog.h>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

std::uint64_t CorpusStats::cf_of(std::string_view term) const {
  auto it = cf.find(std::string(term));
  return it == cf.end() ? 0 : it->second;
}

std::uint64_t CorpusStats::df_of(std::string_view term) const {
  auto it = df.find(std::string(term));
  return it == df.end() ? 0 : it->second;
}

std::vector<std::string> CorpusStats::vocabulary() const {
  std::vector<std::string> v;
  v.reserve(cf.size());
  for (const auto& [t, c] : cf) v.push_back(t);
  std::sort(v.begin(), v.end());
  return v;
}

nlohmann::ordered_json QppOptions::to_json() const {
  return {{"remove_stopwords", remove_stopwords},
          {"scs_oov_cf", scs_oov_cf},
          {"cc_neighbors", cc_neighbors},
          {"cc_threshold", cc_threshold},
          {"closeness", "wasserman_faust"}};
}

std::vector<std::string> qpp_tokens(std::string_view text, bool remove_stopwords) {
  auto toks = tokenize(text);
  if (remove_stopwords) std::erase_if(toks, [](const std::string& t) { return is_stopword(t); });
  return toks;
}

CorpusStats index_documents(std::span<const std::vector<std::string>> docs) {
  CorpusStats s;
  for (const auto& doc : docs) {
    ++s.num_docs;
    std::set<std::string_view> uniq;
    for (const auto& t : doc) {
      ++s.cf[t];
      ++s.total_tokens;
      uniq.insert(t);
    }
    for (auto t : uniq) ++s.df[std::string(t)];
  }
  if (s.num_docs == 0) throw ValidationError("corpus is empty");
  if (s.total_tokens == 0) throw ValidationError("corpus has no tokens");
  return s;
}

std::vector<std::vector<std::string>> tokenize_corpus(std::span<const CorpusEntry> corpus, bool remove_stopwords) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& e : corpus) docs.push_back(qpp_tokens(e.document.title + " " + e.document.snippet, remove_stopwords));
  return docs;
}

CorpusStats index_corpus(std::span<const CorpusEntry> corpus, bool remove_stopwords) {
  const auto docs = tokenize_corpus(corpus, remove_stopwords);
  return index_documents(docs);
}

CorpusStats index_corpus(const std::filesystem::path& path, bool remove_stopwords) {
  const auto corpus = read_corpus(path);
  return index_corpus(corpus, remove_stopwords);
}

double scs(std::span<const std::string> q, const CorpusStats& stats, double oov_cf) {
  if (q.empty()) throw ValidationError("query has no terms");
  std::map<std::string, std::size_t> tf;
  for (const auto& t : q) ++tf[t];
  const double qlen = static_cast<double>(q.size());
  const double clen = static_cast<double>(stats.total_tokens);
  double s = 0.0;
  for (const auto& [term, n] : tf) {
    const double pq = static_cast<double>(n) / qlen;
    const auto cf = stats.cf_of(term);
    const double pc = (cf == 0 ? oov_cf : static_cast<double>(cf)) / clen;
    s += pq * std::log2(pq / pc);
  }
  return s;
}

double scs(std::string_view query, const CorpusStats& stats, const QppOptions& o) {
  return scs(qpp_tokens(query, o.remove_stopwords), stats, o.scs_oov_cf);
}

double scq(std::span<const std::string> q, const CorpusStats& stats) {
  if (q.empty()) throw ValidationError("query has no terms");
  const double n = static_cast<double>(stats.num_docs);
  double s = 0.0;
  for (const auto& t : q) {
    const auto cf = stats.cf_of(t);
    if (cf == 0) continue;
    s += (1.0 + std::log(static_cast<double>(cf))) * std::log(1.0 + n / static_cast<double>(stats.df_of(t)));
  }
  return s / static_cast<double>(q.size());
}

double scq(std::string_view query, const CorpusStats& stats, const QppOptions& o) {
  return scq(qpp_tokens(query, o.remove_stopwords), stats);
}

double closeness_centrality(const std::vector<std::vector<std::size_t>>& adj, std::size_t v) {
  const std::size_t n = adj.size();
  if (v >= n) throw ValidationError("closeness: node out of range");
  if (n < 2) return 0.0;
  std::vector<std::size_t> dist(n, std::numeric_limits<std::size_t>::max());
  std::deque<std::size_t> queue{v};
  dist[v] = 0;
  std::size_t reach = 0, total = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    ++reach;
    total += dist[u];
    for (auto w : adj[u]) {
      if (dist[w] != std::numeric_limits<std::size_t>::max()) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }
  if (reach <= 1 || total == 0) return 0.0;
  const double r1 = static_cast<double>(reach - 1);
  return (r1 / static_cast<double>(total)) * (r1 / static_cast<double>(n - 1));
}

double neural_cc(std::span<const std::string> q, const VocabularyIndex& index, std::size_t k, double threshold,
                 const EmbeddingProvider* provider) {
  if (k == 0) throw ValidationError("neural_cc needs k >= 1");
  if (index.empty()) {
    spdlog::warn("neural_cc: empty vocabulary index, scoring 0");
    return 0.0;
  }
  if (q.empty()) throw ValidationError("query has no terms");
  std::vector<std::string> terms;
  for (const auto& t : q)
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);

  std::vector<std::string> nodes;
  std::vector<std::optional<std::vector<double>>> vecs;
  std::map<std::string, std::size_t> pos;
  auto add_node = [&](const std::string& term, std::optional<std::vector<double>> v) {
    if (pos.contains(term)) return;
    pos[term] = nodes.size();
    nodes.push_back(term);
    vecs.push_back(std::move(v));
  };
  for (const auto& t : terms) {
    if (auto i = index.find(t)) add_node(t, index.vector(*i).values);
    else if (provider) add_node(t, provider->embed(t).values);
    else add_node(t, std::nullopt);
  }
  for (const auto& t : terms) {
    if (!index.find(t) && !provider) continue;
    for (const auto& nb : nearest_terms(index, t, k, provider)) add_node(nb.term, index.vector(*index.find(nb.term)).values);
  }

  const std::size_t n = nodes.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (!vecs[a]) continue;
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!vecs[b]) continue;
      if (cosine_similarity(*vecs[a], *vecs[b]) >= threshold) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    }
  }
  double s = 0.0;
  for (const auto& t : terms) s += closeness_centrality(adj, pos.at(t));
  return s / static_cast<double>(terms.size());
}

double neural_cc(std::string_view query, const VocabularyIndex& index, const QppOptions& o,
                 const EmbeddingProvider* provider) {
  return neural_cc(qpp_tokens(query, o.remove_stopwords), index, o.cc_neighbors, o.cc_threshold, provider);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired t-test needs samples of equal length");
  if (a.size() < 2) throw ValidationError("paired t-test needs at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = b[i] - a[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.n = n;
  if (sd == 0.0) {
    if (mean == 0.0) return r;
    r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  boost::math::students_t dist(static_cast<double>(n - 1));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

std::string_view to_string(Breadth b) noexcept { return b == Breadth::broad ? "broad" : "specific"; }

Breadth classify_breadth(std::size_t mentioned) noexcept {
  return mentioned <= kBroadMaxSlots ? Breadth::broad : Breadth::specific;
}

Breadth classify_breadth(const SemanticFrame& frame) { return classify_breadth(frame.mentioned_ids().size()); }

std::optional<double> percent_difference(double original, double refined) {
  if (original == 0.0) return std::nullopt;
  return 100.0 * (refined - original) / std::abs(original);
}

QppScores score_request(std::string_view text, const CorpusStats& stats, const VocabularyIndex& index,
                        const QppOptions& o, const EmbeddingProvider* provider) {
  const auto toks = qpp_tokens(text, o.remove_stopwords);
  QppScores s{std::string(text)};
  s.scs = scs(toks, stats, o.scs_oov_cf);
  s.scq = scq(toks, stats);
  s.neural_cc = neural_cc(toks, index, o.cc_neighbors, o.cc_threshold, provider);
  return s;
}

namespace {

const char* const kMetrics[] = {"scs", "scq", "neural_cc"};

double metric(const QppScores& s, std::string_view m) {
  if (m == "scs") return s.scs;
  if (m == "scq") return s.scq;
  if (m == "neural_cc") return s.neural_cc;
  throw ValidationError("unknown metric '" + std::string(m) + "'");
}

nlohmann::ordered_json scores_json(const QppScores& s) {
  return {{"text", s.text}, {"scs", s.scs}, {"scq", s.scq}, {"neural_cc", s.neural_cc}};
}

nlohmann::ordered_json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(x > 0 ? "inf" : x < 0 ? "-inf" : "nan");
}

}  // namespace

double QppReport::mean(const std::string& m, bool refined_side) const {
  const auto& rows = refined_side ? refined : originals;
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += metric(r, m);
  return s / static_cast<double>(rows.size());
}

nlohmann::ordered_json QppReport::to_json() const {
  nlohmann::ordered_json j;
  j["options"] = options.to_json();
  auto orig = nlohmann::ordered_json::array();
  for (const auto& r : originals) orig.push_back(scores_json(r));
  j["requests"] = std::move(orig);
  nlohmann::ordered_json means;
  for (const char* m : kMetrics) means[m] = mean(m);
  j["means"] = std::move(means);
  if (!refined.empty()) {
    auto ref = nlohmann::ordered_json::array();
    for (const auto& r : refined) ref.push_back(scores_json(r));
    j["refined"] = std::move(ref);
    nlohmann::ordered_json cmp;
    for (const auto& [name, c] : comparison) {
      nlohmann::ordered_json e;
      e["mean_original"] = c.mean_original;
      e["mean_refined"] = c.mean_refined;
      e["percent_difference"] = c.percent_difference ? nlohmann::ordered_json(*c.percent_difference) : nlohmann::ordered_json();
      e["t"] = number_or_null(c.test.t);
      e["p"] = c.test.p;
      e["n"] = c.test.n;
      cmp[name] = std::move(e);
    }
    j["comparison"] = std::move(cmp);
  }
  return j;
}

std::string QppReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  if (refined.empty()) {
    os << std::left << std::setw(12) << "metric" << "mean\n";
    for (const char* m : kMetrics) os << std::setw(12) << m << mean(m) << "\n";
    return os.str();
  }
  os << std::left << std::setw(12) << "metric" << std::setw(14) << "original" << std::setw(14) << "refined"
     << std::setw(12) << "diff %" << std::setw(12) << "t" << "p\n";
  for (const char* m : kMetrics) {
    const auto& c = comparison.at(m);
    std::ostringstream diff;
    diff << std::fixed << std::setprecision(2);
    if (c.percent_difference) diff << *c.percent_difference;
    else diff << "n/a";
    os << std::setw(12) << m << std::setw(14) << c.mean_original << std::setw(14) << c.mean_refined << std::setw(12)
       << diff.str() << std::setw(12) << c.test.t << c.test.p << "\n";
  }
  return os.str();
}

QppReport score_requests(std::span<const std::string> requests, const CorpusStats& stats,
                         const VocabularyIndex& index, const QppOptions& o, const EmbeddingProvider* provider) {
  QppReport r;
  r.options = o;
  for (const auto& q : requests) r.originals.push_back(score_request(q, stats, index, o, provider));
  return r;
}

QppReport compare_requests(std::span<const std::string> originals, std::span<const std::string> refineds,
                           const CorpusStats& stats, const VocabularyIndex& index, const QppOptions& o,
                           const EmbeddingProvider* provider) {
  if (originals.size() != refineds.size())
    throw ValidationError("original and refined request lists differ in length");
  QppReport r = score_requests(originals, stats, index, o, provider);
  for (const auto& q : refineds) r.refined.push_back(score_request(q, stats, index, o, provider));
  for (const char* m : kMetrics) {
    MetricComparison c;
    c.mean_original = r.mean(m);
    c.mean_refined = r.mean(m, true);
    c.percent_difference = percent_difference(c.mean_original, c.mean_refined);
    if (r.originals.size() >= 2) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < r.originals.size(); ++i) {
        a.push_back(metric(r.originals[i], m));
        b.push_back(metric(r.refined[i], m));
      }
      c.test = paired_t_test(a, b);
    }
    r.comparison[m] = c;
  }
  return r;
}

}  // namespace intentloop
