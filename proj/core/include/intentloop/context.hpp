#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentloop/embedding.hpp"
#include "intentloop/profile.hpp"

namespace intentloop {

class SlotPredictorModel;

enum class ContextScheme {
  method1,  // one-hot of active slots
  method2,  // one-hot ++ request embedding
  method3,  // max-pooled learned slot embeddings ++ request embedding
};

std::string_view to_string(ContextScheme scheme) noexcept;
ContextScheme context_scheme_from_string(std::string_view name);

struct ContextVector {
  std::vector<double> values;
  ContextScheme scheme = ContextScheme::method1;
  int step = 0;

  bool operator==(const ContextVector&) const = default;
};

/// Mentioned slots followed by selected slots, duplicates dropped.
std::vector<std::string> active_slots(const SemanticFrame& frame, std::span<const std::string> selected);

/// Bit k set iff universe[k] is active. Active slots outside the universe are
/// a ValidationError.
std::vector<double> one_hot(std::span<const std::string> active, std::span<const std::string> universe);

ContextVector context_method1(const SemanticFrame& frame, std::span<const std::string> selected,
                              std::span<const std::string> universe, int step = 0);

ContextVector context_method2(const SemanticFrame& frame, std::span<const std::string> selected,
                              std::span<const std::string> universe, std::string_view request_text,
                              const EmbeddingProvider& embedding, int step = 0);

ContextVector context_method3(const SemanticFrame& frame, std::span<const std::string> selected,
                              const SlotPredictorModel& predictor, std::string_view request_text,
                              const EmbeddingProvider& embedding, int step = 0);

/// Context from an explicit active-slot list; `embedding` is needed for
/// method2/method3 and `predictor` for method3.
ContextVector build_context(ContextScheme scheme, std::span<const std::string> active,
                            std::span<const std::string> universe, std::string_view request_text,
                            const EmbeddingProvider* embedding, const SlotPredictorModel* predictor, int step = 0);

std::size_t context_dim(ContextScheme scheme, std::size_t n_slots, std::size_t embed_dim,
                        std::size_t slot_embed_dim);

}  // namespace intentloop
