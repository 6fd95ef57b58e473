#include "intentloop/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "intentloop/errors.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/text.hpp"
#include "http_client.hpp"

namespace intentloop {

bool EmbeddingVector::is_zero() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

std::vector<double> HashEmbeddingProvider::token_vector(std::string_view token) const {
  std::vector<double> v(dim_);
  std::uint64_t state = seed_ ^ fnv1a64(token);
  for (auto& x : v) {
    const double unit = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    x = 2.0 * unit - 1.0;
  }
  return v;
}

EmbeddingVector HashEmbeddingProvider::embed(std::string_view text) const {
  EmbeddingVector out{std::vector<double>(dim_, 0.0)};
  const auto tokens = tokenize(text);
  if (tokens.empty()) return out;
  for (const auto& token : tokens) {
    const auto tv = token_vector(token);
    for (std::size_t j = 0; j < dim_; ++j) out.values[j] += tv[j];
  }
  const double n = static_cast<double>(tokens.size());
  double norm = 0.0;
  for (auto& x : out.values) {
    x /= n;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (auto& x : out.values) x /= norm;
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpProviderOptions options, std::size_t dim)
    : options_(std::move(options)),
      dim_(dim),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options_.max_in_flight, 1, 64))) {
  if (options_.base_url.empty()) throw ValidationError("embedding service URL is empty");
}

HttpEmbeddingProvider::~HttpEmbeddingProvider() = default;

EmbeddingVector HttpEmbeddingProvider::embed(std::string_view text) const {
  const std::string owned(text);
  return embed_batch(std::span<const std::string>(&owned, 1)).front();
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out(texts.size(), EmbeddingVector{std::vector<double>(dim_, 0.0)});
  std::vector<std::string> pending;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (!tokenize(texts[i]).empty()) {
      pending.push_back(texts[i]);
      slots.push_back(i);
    }
  }
  if (pending.empty()) return out;

  in_flight_.acquire();
  nlohmann::json response;
  try {
    detail::HttpRequestOptions req{options_.base_url, "/embed", options_.max_attempts, options_.backoff_ms,
                                   options_.timeout_s};
    response = detail::post_json(req, nlohmann::json{{"texts", pending}});
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();

  if (!response.contains("vectors") || !response.at("vectors").is_array() ||
      response.at("vectors").size() != pending.size()) {
    throw ProviderError("embedding service returned a malformed body");
  }
  for (std::size_t i = 0; i < pending.size(); ++i) {
    auto values = response.at("vectors")[i].get<std::vector<double>>();
    if (values.size() != dim_) throw ProviderError("embedding service returned a vector of the wrong dimension");
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
      throw ProviderError("embedding service returned non-finite values");
    }
    out[slots[i]].values = std::move(values);
  }
  return out;
}

EmbeddingVector embed_text(std::string_view text, const EmbeddingProvider& provider) {
  return provider.embed(text);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  return 1.0 - cosine_similarity(a, b);
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_distance(std::span<const double>(a.values), std::span<const double>(b.values));
}

void VocabularyIndex::add(std::string term, EmbeddingVector vector) {
  if (term.empty()) throw ValidationError("vocabulary term is empty");
  if (vector.dim() == 0) throw ValidationError("vocabulary vector for '" + term + "' is empty");
  if (dim_ == 0) dim_ = vector.dim();
  if (vector.dim() != dim_) throw ValidationError("vocabulary vector for '" + term + "' has the wrong dimension");
  if (positions_.contains(term)) throw ValidationError("duplicate vocabulary term '" + term + "'");
  positions_.emplace(term, terms_.size());
  terms_.push_back(std::move(term));
  vectors_.push_back(std::move(vector));
}

std::optional<std::size_t> VocabularyIndex::find(std::string_view term) const {
  auto it = positions_.find(std::string(term));
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

VocabularyIndex VocabularyIndex::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  VocabularyIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
      index.add(row.at("term").get<std::string>(), EmbeddingVector{row.at("vector").get<std::vector<double>>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return index;
}

void VocabularyIndex::save_jsonl(const std::filesystem::path& path) const {
  std::string out;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    nlohmann::ordered_json row;
    row["term"] = terms_[i];
    row["vector"] = vectors_[i].values;
    out += row.dump() + "\n";
  }
  write_text_file(path, out);
}

std::vector<Neighbor> nearest_terms(const VocabularyIndex& index, std::string_view query_term, std::size_t k,
                                    const EmbeddingProvider* provider) {
  if (k == 0) throw ValidationError("k must be at least 1");
  if (index.empty()) return {};
  EmbeddingVector query;
  if (auto pos = index.find(query_term)) {
    query = index.vector(*pos);
  } else if (provider != nullptr) {
    query = provider->embed(query_term);
  } else {
    throw ReferenceError("term '" + std::string(query_term) + "' is not in the vocabulary");
  }
  std::vector<Neighbor> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index.terms()[i] == query_term) continue;
    all.push_back({index.terms()[i], cosine_similarity(query.values, index.vector(i).values)});
  }
  auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.term < b.term;
  };
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), better);
  all.resize(take);
  return all;
}

VocabularyIndex build_cooccurrence_index(std::span<const std::vector<std::string>> tokenized_documents,
                                         std::size_t dim, std::size_t nonzeros, std::uint64_t seed) {
  if (dim == 0 || nonzeros == 0 || nonzeros > dim) {
    throw ValidationError("random indexing needs 0 < nonzeros <= dim");
  }
  struct Signature {
    std::vector<std::size_t> positions;
    std::vector<double> signs;
  };
  std::map<std::string, Signature> signatures;
  std::vector<std::size_t> scratch(dim);
  auto signature = [&](const std::string& term) -> const Signature& {
    auto it = signatures.find(term);
    if (it != signatures.end()) return it->second;
    std::uint64_t state = seed ^ fnv1a64(term);
    std::iota(scratch.begin(), scratch.end(), std::size_t{0});
    // Partial Fisher-Yates picks distinct coordinates.
    Signature sig;
    for (std::size_t j = 0; j < nonzeros; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(splitmix64(state) % (dim - j));
      std::swap(scratch[j], scratch[pick]);
      sig.positions.push_back(scratch[j]);
      sig.signs.push_back((splitmix64(state) & 1U) != 0 ? 1.0 : -1.0);
    }
    return signatures.emplace(term, std::move(sig)).first->second;
  };

  std::map<std::string, std::vector<double>> vectors;
  for (const auto& doc : tokenized_documents) {
    const std::set<std::string> unique(doc.begin(), doc.end());
    std::vector<const Signature*> sigs;
    for (const auto& term : unique) sigs.push_back(&signature(term));
    std::size_t a = 0;
    for (const auto& term : unique) {
      auto& v = vectors[term];
      if (v.empty()) v.assign(dim, 0.0);
      for (std::size_t b = 0; b < sigs.size(); ++b) {
        if (b == a) continue;
        for (std::size_t j = 0; j < nonzeros; ++j) v[sigs[b]->positions[j]] += sigs[b]->signs[j];
      }
      ++a;
    }
  }
  VocabularyIndex index;
  for (auto& [term, v] : vectors) index.add(term, EmbeddingVector{std::move(v)});
  return index;
}

}  // namespace intentloop
