#include "intentloop/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "http_client.hpp"
#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

nlohmann::ordered_json to_json(const Document& doc) {
  nlohmann::ordered_json j;
  j["title"] = doc.title;
  j["url"] = doc.url;
  j["snippet"] = doc.snippet;
  return j;
}

nlohmann::ordered_json to_json(const Suggestion& s) {
  nlohmann::ordered_json j;
  j["title"] = s.document.title;
  j["url"] = s.document.url;
  j["snippet"] = s.document.snippet;
  j["score"] = s.score;
  j["matched_slots"] = s.matched_slots;
  return j;
}

namespace {

Document document_from_json(const nlohmann::json& j) {
  Document d;
  if (j.contains("title")) d.title = j.at("title").get<std::string>();
  else if (j.contains("name")) d.title = j.at("name").get<std::string>();
  d.url = j.value("url", "");
  d.snippet = j.value("snippet", "");
  return d;
}

}  // namespace

Suggestion suggestion_from_json(const nlohmann::json& j) {
  return {document_from_json(j), j.value("matched_slots", std::vector<std::string>{}), j.value("score", 0.0)};
}

std::vector<Document> documents_from_response(const nlohmann::json& body) {
  const nlohmann::json* items = nullptr;
  if (body.is_array()) items = &body;
  else if (body.contains("webPages") && body.at("webPages").contains("value")) items = &body.at("webPages").at("value");
  std::vector<Document> out;
  if (!items) return out;
  for (const auto& item : *items) out.push_back(document_from_json(item));
  return out;
}

FixtureSearchProvider::FixtureSearchProvider(std::map<std::string, std::vector<Document>> results)
    : results_(std::move(results)) {}

FixtureSearchProvider FixtureSearchProvider::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("search fixture must be a JSON object of query -> results");
  FixtureSearchProvider p;
  for (const auto& [query, value] : doc.items()) p.add(query, documents_from_response(value));
  return p;
}

FixtureSearchProvider FixtureSearchProvider::load(const std::filesystem::path& path) {
  return from_json(parse_json_text(read_text_file(path), path.string()));
}

void FixtureSearchProvider::add(std::string query, std::vector<Document> docs) {
  results_[std::move(query)] = std::move(docs);
}

std::vector<Document> FixtureSearchProvider::search(const std::string& query, std::size_t k) {
  auto it = results_.find(query);
  if (it == results_.end()) return {};
  std::vector<Document> out(it->second.begin(), it->second.begin() + std::min(k, it->second.size()));
  return out;
}

HttpSearchProvider::HttpSearchProvider(HttpSearchOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ValidationError("search endpoint URL is empty");
}

std::vector<Document> HttpSearchProvider::search(const std::string& query, std::size_t k) {
  // Split "scheme://host[:port]/path" for the HTTP client.
  const auto scheme_end = options_.endpoint.find("://");
  const auto path_start = options_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  detail::HttpRequestOptions req;
  req.base_url = options_.endpoint.substr(0, path_start);
  req.path = path_start == std::string::npos ? "/" : options_.endpoint.substr(path_start);
  req.max_attempts = options_.max_attempts;
  req.backoff_ms = options_.backoff_ms;
  req.timeout_s = options_.timeout_s;
  if (!options_.api_key.empty()) req.headers.emplace_back(options_.key_header, options_.api_key);
  return documents_from_response(detail::get_json(req, {{"q", query}, {"count", std::to_string(k)}}));
}

std::vector<Document> search(const std::string& query, SearchProvider& provider, std::size_t k) {
  std::vector<Document> out;
  std::set<std::string> seen;
  for (auto& d : provider.search(query, k)) {
    if (out.size() >= k) break;
    if (d.url.empty() || !seen.insert(d.url).second) continue;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<std::string> generate_subqueries(const IntentOntology& ontology, const SemanticFrame& frame,
                                             std::span<const std::string> selected,
                                             const std::optional<std::string>& location) {
  const auto& intent = ontology.intent(frame.key());
  std::string suffix;
  if (location && !trim(*location).empty()) suffix = " in " + trim(*location);
  std::vector<std::string> slots = frame.mentioned_ids();
  for (const auto& s : selected)
    if (std::find(slots.begin(), slots.end(), s) == slots.end()) slots.push_back(s);
  std::vector<std::string> out;
  for (const auto& s : slots) out.push_back(intent.label + " with " + ontology.slot(s).label + suffix);
  if (out.empty()) out.push_back(intent.label + suffix);
  return out;
}

std::string corpus_query(std::string_view intent_label, std::string_view location, std::string_view slot_label) {
  return std::string(intent_label) + " near " + std::string(location) + " with " + std::string(slot_label);
}

CorpusBuildSummary build_corpus(const IntentOntology& ontology, std::span<const std::string> locations,
                                SearchProvider& provider, const std::filesystem::path& out_path,
                                const CorpusBuildOptions& options) {
  if (locations.empty()) throw ValidationError("corpus building needs at least one location");
  std::vector<std::string> queries;
  for (const auto& loc : locations)
    for (const auto& key : ontology.intent_keys())
      for (const auto& slot : ontology.slot_ids(key))
        queries.push_back(corpus_query(ontology.intent(key).label, loc, ontology.slot(slot).label));
  if (queries.empty()) spdlog::warn("ontology has no slots; writing an empty corpus");

  std::vector<std::vector<Document>> results(queries.size());
  std::vector<char> failed(queries.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < queries.size();) {
      try {
        results[i] = search(queries[i], provider, options.per_query);
      } catch (const ProviderError& e) {
        failed[i] = 1;
        spdlog::warn("corpus query '{}' failed: {}", queries[i], e.what());
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = std::max<std::size_t>(1, std::min(options.concurrency, queries.size()));
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }

  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus file " + out_path.string());
  CorpusBuildSummary summary;
  summary.queries = queries.size();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    summary.failures += failed[i];
    for (const auto& d : results[i]) {
      nlohmann::ordered_json line;
      line["query"] = queries[i];
      line["title"] = d.title;
      line["url"] = d.url;
      line["snippet"] = d.snippet;
      out << line.dump() << '\n';
      ++summary.documents;
    }
  }
  if (!out) throw Error("error writing corpus file " + out_path.string());
  if (summary.failures > 0) spdlog::warn("{} of {} corpus queries failed", summary.failures, summary.queries);
  return summary;
}

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read corpus file " + path.string());
  std::vector<CorpusEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    }
    if (!j.is_object() || !j.contains("title") || !j.contains("url") || !j.contains("snippet"))
      throw ParseError(path.string() + ": corpus line needs title, url and snippet", n);
    out.push_back({j.value("query", ""), document_from_json(j)});
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<RankingTerm> ranking_terms(const IntentOntology& ontology, const SemanticFrame& frame,
                                       std::span<const std::string> selected) {
  std::vector<RankingTerm> terms;
  auto add = [&](const std::string& slot, const std::string& text, double w) {
    for (const auto& tok : tokenize(text)) {
      if (is_stopword(tok)) continue;
      auto it = std::find_if(terms.begin(), terms.end(), [&](const RankingTerm& t) { return t.term == tok; });
      if (it == terms.end()) terms.push_back({slot, tok, w});
      else if (w > it->weight) *it = {slot, tok, w};
    }
  };
  for (const auto& m : frame.mentioned_slots) {
    add(m.slot_id, ontology.slot(m.slot_id).label, 1.0);
    if (m.aspect) add(m.slot_id, m.aspect->raw_span + " " + m.aspect->normalized, 2.0);
  }
  for (const auto& s : selected) add(s, ontology.slot(s).label, 1.0);
  return terms;
}

double lexical_score(const Document& doc, std::span<const RankingTerm> terms, std::vector<std::string>* matched) {
  const auto tokens = tokenize(doc.title + " " + doc.snippet);
  if (tokens.empty()) return 0.0;
  const std::set<std::string> present(tokens.begin(), tokens.end());
  double s = 0.0;
  std::set<std::string> slots;
  for (const auto& t : terms) {
    if (!present.contains(t.term)) continue;
    s += t.weight;
    slots.insert(t.slot_id);
  }
  if (matched) matched->assign(slots.begin(), slots.end());
  return s / static_cast<double>(tokens.size());
}

namespace {

std::string ranking_prompt(std::string_view request_text, std::span<const RankingTerm> terms,
                           std::span<const Document> batch) {
  std::string p =
      "Rate how well each candidate satisfies the request and its constraints. "
      "Answer with a JSON array of numbers between 0 and 1, one per candidate, in order.\n\n"
      "REQUEST: " + std::string(request_text) + "\nCONSTRAINTS:";
  for (const auto& t : terms) p += " " + t.term;
  p += "\n";
  for (std::size_t i = 0; i < batch.size(); ++i)
    p += "[" + std::to_string(i + 1) + "] " + batch[i].title + " | " + batch[i].snippet + "\n";
  p += "SCORES:";
  return p;
}

std::optional<std::vector<double>> parse_scores(const std::string& text, std::size_t n) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array() || j.size() != n) return std::nullopt;
    std::vector<double> out;
    for (const auto& v : j) {
      if (!v.is_number()) return std::nullopt;
      const double x = v.get<double>();
      if (!std::isfinite(x)) return std::nullopt;
      out.push_back(x);
    }
    return out;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<Suggestion> rank_suggestions(std::span<const Document> candidates, const IntentOntology& ontology,
                                         const SemanticFrame& frame, std::span<const std::string> selected,
                                         std::string_view request_text, CompletionProvider* ranker,
                                         const RankOptions& options) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  for (const auto& d : candidates)
    if (!d.url.empty() && seen.insert(d.url).second) docs.push_back(d);

  const auto terms = ranking_terms(ontology, frame, selected);
  std::vector<Suggestion> out;
  for (auto& d : docs) {
    Suggestion s{d, {}, 0.0};
    s.score = lexical_score(d, terms, &s.matched_slots);
    out.push_back(std::move(s));
  }
  if (ranker) {
    const std::size_t bs = std::max<std::size_t>(1, options.batch_size);
    for (std::size_t start = 0; start < docs.size(); start += bs) {
      const std::size_t end = std::min(docs.size(), start + bs);
      std::span<const Document> batch(docs.data() + start, end - start);
      CompletionRequest req;
      req.prompt = ranking_prompt(request_text, terms, batch);
      req.request_text = req.prompt;
      std::optional<std::vector<double>> scores;
      try {
        scores = parse_scores(ranker->complete(req), batch.size());
      } catch (const ProviderError& e) {
        spdlog::warn("ranker failed ({}); lexical scores kept for this batch", e.what());
      }
      if (!scores) {
        spdlog::warn("ranker output unusable for candidates {}-{}; lexical scores kept", start, end - 1);
        continue;
      }
      for (std::size_t i = start; i < end; ++i) out[i].score = (*scores)[i - start];
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Suggestion& a, const Suggestion& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.document.url < b.document.url;
  });
  if (out.size() > options.top_k) out.resize(options.top_k);
  return out;
}

}  // namespace intentloop
