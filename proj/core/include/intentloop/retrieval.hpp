#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/nlu.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/profile.hpp"

namespace intentloop {

struct Document {
  std::string title;
  std::string url;
  std::string snippet;

  bool operator==(const Document&) const = default;
};

struct Suggestion {
  Document document;
  std::vector<std::string> matched_slots;
  double score = 0.0;

  bool operator==(const Suggestion&) const = default;
};

nlohmann::ordered_json to_json(const Document& doc);
nlohmann::ordered_json to_json(const Suggestion& suggestion);
Suggestion suggestion_from_json(const nlohmann::json& doc);

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::vector<Document> search(const std::string& query, std::size_t k) = 0;
};

/// Query -> results from a JSON object. Values are either arrays of
/// {title|name, url, snippet} or a search-API response with
/// `webPages.value`. Unknown queries return no results.
class FixtureSearchProvider final : public SearchProvider {
 public:
  FixtureSearchProvider() = default;
  explicit FixtureSearchProvider(std::map<std::string, std::vector<Document>> results);
  static FixtureSearchProvider load(const std::filesystem::path& path);
  static FixtureSearchProvider from_json(const nlohmann::json& doc);

  void add(std::string query, std::vector<Document> docs);
  std::vector<Document> search(const std::string& query, std::size_t k) override;

 private:
  std::map<std::string, std::vector<Document>> results_;
};

struct HttpSearchOptions {
  std::string endpoint;  // full URL of the search route
  std::string api_key;
  std::string key_header = "Ocp-Apim-Subscription-Key";
  int max_attempts = 3;
  int backoff_ms = 200;
  int timeout_s = 30;
};

// GET <endpoint>?q=<query>&count=<k>, reading webPages.value[].{name,url,snippet}.
class HttpSearchProvider final : public SearchProvider {
 public:
  explicit HttpSearchProvider(HttpSearchOptions options);
  std::vector<Document> search(const std::string& query, std::size_t k) override;

 private:
  HttpSearchOptions options_;
};

/// Documents from a search-API style response body.
std::vector<Document> documents_from_response(const nlohmann::json& body);

/// At most k documents, first occurrence of each url kept, empty urls dropped.
std::vector<Document> search(const std::string& query, SearchProvider& provider, std::size_t k = 10);

/// `<intent> with <slot> in <location>`, one per active slot (mentioned
/// first, then selections); `<intent> in <location>` when no slot is active.
/// The location clause is dropped when there is no location.
std::vector<std::string> generate_subqueries(const IntentOntology& ontology, const SemanticFrame& frame,
                                             std::span<const std::string> selected,
                                             const std::optional<std::string>& location);

/// `<intent> near <location> with <slot>`.
std::string corpus_query(std::string_view intent_label, std::string_view location, std::string_view slot_label);

struct CorpusEntry {
  std::string query;
  Document document;

  bool operator==(const CorpusEntry&) const = default;
};

struct CorpusBuildSummary {
  std::size_t queries = 0;
  std::size_t documents = 0;
  std::size_t failures = 0;
};

struct CorpusBuildOptions {
  std::size_t per_query = 100;
  std::size_t concurrency = 4;
};

/// Issues one corpus query per (location, topic, intent, slot) and writes
/// JSONL `{query, title, url, snippet}` in enumeration order. Failing queries
/// are logged and counted; the run continues.
CorpusBuildSummary build_corpus(const IntentOntology& ontology, std::span<const std::string> locations,
                                SearchProvider& provider, const std::filesystem::path& out_path,
                                const CorpusBuildOptions& options = {});

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

struct RankingTerm {
  std::string slot_id;
  std::string term;
  double weight = 1.0;
};

/// Lexical ranking terms: slot label tokens weigh 1.0, aspect value tokens
/// 2.0; stopwords are skipped and a term keeps its largest weight.
std::vector<RankingTerm> ranking_terms(const IntentOntology& ontology, const SemanticFrame& frame,
                                       std::span<const std::string> selected);

/// Sum of the weights of ranking terms present in title + snippet divided by
/// the candidate's token count.
double lexical_score(const Document& doc, std::span<const RankingTerm> terms,
                     std::vector<std::string>* matched_slots = nullptr);

struct RankOptions {
  std::size_t top_k = 10;
  std::size_t batch_size = 5;
};

/// Scores candidates (deduplicated by url) and returns the best top_k, score
/// descending with ties by url. With a ranker the completion for each batch
/// must be a JSON array of numbers, one per candidate; otherwise that batch
/// is scored lexically.
std::vector<Suggestion> rank_suggestions(std::span<const Document> candidates, const IntentOntology& ontology,
                                         const SemanticFrame& frame, std::span<const std::string> selected,
                                         std::string_view request_text, CompletionProvider* ranker,
                                         const RankOptions& options = {});

}  // namespace intentloop
