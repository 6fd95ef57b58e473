#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/embedding.hpp"
#include "intentloop/profile.hpp"
#include "intentloop/retrieval.hpp"

namespace intentloop {

struct CorpusStats {
  std::unordered_map<std::string, std::uint64_t> cf;  // collection frequency
  std::unordered_map<std::string, std::uint64_t> df;  // document frequency
  std::uint64_t total_tokens = 0;
  std::uint64_t num_docs = 0;

  std::uint64_t cf_of(std::string_view term) const;
  std::uint64_t df_of(std::string_view term) const;
  std::vector<std::string> vocabulary() const;  // sorted
};

struct QppOptions {
  bool remove_stopwords = false;
  double scs_oov_cf = 0.5;
  std::size_t cc_neighbors = 10;
  double cc_threshold = 0.5;

  nlohmann::ordered_json to_json() const;
};

std::vector<std::string> qpp_tokens(std::string_view text, bool remove_stopwords);

CorpusStats index_documents(std::span<const std::vector<std::string>> tokenized_docs);
/// Documents are title + " " + snippet.
CorpusStats index_corpus(std::span<const CorpusEntry> corpus, bool remove_stopwords = false);
CorpusStats index_corpus(const std::filesystem::path& corpus_path, bool remove_stopwords = false);
std::vector<std::vector<std::string>> tokenize_corpus(std::span<const CorpusEntry> corpus,
                                                      bool remove_stopwords = false);

/// Simplified clarity: sum over unique terms of P(w|q) log2(P(w|q) / P(w|C)).
double scs(std::span<const std::string> query_tokens, const CorpusStats& stats, double oov_cf = 0.5);
double scs(std::string_view query, const CorpusStats& stats, const QppOptions& options = {});

/// Mean over query tokens of (1 + ln cf) ln(1 + N / df); OOV tokens score 0.
double scq(std::span<const std::string> query_tokens, const CorpusStats& stats);
double scq(std::string_view query, const CorpusStats& stats, const QppOptions& options = {});

/// Component-scaled closeness of node v: ((r-1)/sum d) * ((r-1)/(n-1)) where
/// r counts the nodes reachable from v (itself included). 0 when isolated.
double closeness_centrality(const std::vector<std::vector<std::size_t>>& adjacency, std::size_t v);

/// Mean closeness of the unique query terms in the graph over the query
/// terms and their top-k vocabulary neighbours, with an edge wherever the
/// cosine similarity reaches the threshold. Terms outside the vocabulary are
/// embedded with `provider` when given, otherwise they stay isolated.
double neural_cc(std::span<const std::string> query_tokens, const VocabularyIndex& index, std::size_t k,
                 double sim_threshold, const EmbeddingProvider* provider = nullptr);
double neural_cc(std::string_view query, const VocabularyIndex& index, const QppOptions& options = {},
                 const EmbeddingProvider* provider = nullptr);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Two-sided paired t-test on b - a with n - 1 degrees of freedom.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

enum class Breadth { broad, specific };
std::string_view to_string(Breadth b) noexcept;
inline constexpr std::size_t kBroadMaxSlots = 3;
Breadth classify_breadth(std::size_t mentioned_slots) noexcept;
Breadth classify_breadth(const SemanticFrame& frame);

struct QppScores {
  std::string text;
  double scs = 0.0;
  double scq = 0.0;
  double neural_cc = 0.0;
};

struct MetricComparison {
  double mean_original = 0.0;
  double mean_refined = 0.0;
  std::optional<double> percent_difference;  // undefined when the original mean is 0
  TTestResult test;
};

std::optional<double> percent_difference(double original, double refined);

struct QppReport {
  QppOptions options;
  std::vector<QppScores> originals;
  std::vector<QppScores> refined;                      // empty unless comparing
  std::map<std::string, MetricComparison> comparison;  // keyed by metric name

  double mean(const std::string& metric, bool refined_side = false) const;
  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

QppScores score_request(std::string_view text, const CorpusStats& stats, const VocabularyIndex& index,
                        const QppOptions& options = {}, const EmbeddingProvider* provider = nullptr);

QppReport score_requests(std::span<const std::string> requests, const CorpusStats& stats,
                         const VocabularyIndex& index, const QppOptions& options = {},
                         const EmbeddingProvider* provider = nullptr);

/// Per-request scores for both lists, metric means, percent differences and
/// paired t-tests. The lists are aligned pairwise.
QppReport compare_requests(std::span<const std::string> originals, std::span<const std::string> refineds,
                           const CorpusStats& stats, const VocabularyIndex& index, const QppOptions& options = {},
                           const EmbeddingProvider* provider = nullptr);

}  // namespace intentloop
