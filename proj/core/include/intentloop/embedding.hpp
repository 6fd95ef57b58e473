#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace intentloop {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool is_zero() const noexcept;
  bool operator==(const EmbeddingVector&) const = default;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::size_t dim() const noexcept = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;
};

/// Offline provider. Each token gets a pseudo-random vector:
///
///   state = seed XOR fnv1a64(token bytes)
///   v[j]  = 2 * ((splitmix64(state) >> 11) * 2^-53) - 1,  j = 0..dim-1
///
/// The text vector is the mean of its token vectors (tokens as produced by
/// tokenize()), L2-normalized. Text without tokens maps to the zero vector.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 512;

  explicit HashEmbeddingProvider(std::size_t dim = kDefaultDim, std::uint64_t seed = 0);

  std::size_t dim() const noexcept override { return dim_; }
  EmbeddingVector embed(std::string_view text) const override;

  /// Raw (unnormalized) vector of a single token.
  std::vector<double> token_vector(std::string_view token) const;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct HttpProviderOptions {
  std::string base_url;  // e.g. http://localhost:8500
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  int backoff_ms = 200;
  int timeout_s = 30;
};

/// Client for a sentence-embedding service: POST /embed {texts} -> {vectors}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(HttpProviderOptions options, std::size_t dim);
  ~HttpEmbeddingProvider() override;

  std::size_t dim() const noexcept override { return dim_; }
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;

 private:
  HttpProviderOptions options_;
  std::size_t dim_;
  mutable std::counting_semaphore<64> in_flight_;
};

EmbeddingVector embed_text(std::string_view text, const EmbeddingProvider& provider);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// 1 - cos(a, b), in [0, 2]. Defined as 1 when either vector is zero.
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine_distance(std::span<const double> a, std::span<const double> b);

struct Neighbor {
  std::string term;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Terms with aligned vectors; positions are stable and terms unique.
class VocabularyIndex {
 public:
  void add(std::string term, EmbeddingVector vector);

  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  std::size_t dim() const noexcept { return dim_; }

  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const EmbeddingVector& vector(std::size_t i) const { return vectors_.at(i); }
  std::optional<std::size_t> find(std::string_view term) const;

  static VocabularyIndex load_jsonl(const std::filesystem::path& path);
  void save_jsonl(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> terms_;
  std::vector<EmbeddingVector> vectors_;
  std::unordered_map<std::string, std::size_t> positions_;
  std::size_t dim_ = 0;
};

/// Top-k vocabulary terms by cosine similarity to `query_term`, excluding the
/// term itself. Ties are broken lexicographically. The query vector comes
/// from the index, or from `provider` when the term is out of vocabulary.
std::vector<Neighbor> nearest_terms(const VocabularyIndex& index, std::string_view query_term, std::size_t k,
                                    const EmbeddingProvider* provider = nullptr);

/// Random indexing over document co-occurrence: every term has a fixed
/// sparse ternary index vector (`nonzeros` entries of +-1, seeded by the
/// term), and a term's vector is the sum of the index vectors of the other
/// terms in each document it occurs in. Terms with shared contexts end up
/// close in cosine space.
VocabularyIndex build_cooccurrence_index(std::span<const std::vector<std::string>> tokenized_documents,
                                         std::size_t dim = 128, std::size_t nonzeros = 8,
                                         std::uint64_t seed = 0);

}  // namespace intentloop
