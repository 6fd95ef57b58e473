#include "intentloop/context.hpp"

#include <algorithm>
#include <set>

#include "intentloop/errors.hpp"
#include "intentloop/slot_predictor.hpp"

namespace intentloop {

std::string_view to_string(ContextScheme scheme) noexcept {
  switch (scheme) {
    case ContextScheme::method1: return "method1";
    case ContextScheme::method2: return "method2";
    case ContextScheme::method3: return "method3";
  }
  return "method1";
}

ContextScheme context_scheme_from_string(std::string_view name) {
  if (name == "method1") return ContextScheme::method1;
  if (name == "method2") return ContextScheme::method2;
  if (name == "method3") return ContextScheme::method3;
  throw ValidationError("unknown context scheme '" + std::string(name) + "'");
}

std::vector<std::string> active_slots(const SemanticFrame& frame, std::span<const std::string> selected) {
  std::vector<std::string> out = frame.mentioned_ids();
  std::set<std::string> seen(out.begin(), out.end());
  for (const auto& s : selected)
    if (seen.insert(s).second) out.push_back(s);
  return out;
}

std::vector<double> one_hot(std::span<const std::string> active, std::span<const std::string> universe) {
  std::vector<double> v(universe.size(), 0.0);
  for (const auto& slot : active) {
    auto it = std::find(universe.begin(), universe.end(), slot);
    if (it == universe.end()) throw ValidationError("slot '" + slot + "' is outside the context universe");
    v[static_cast<std::size_t>(it - universe.begin())] = 1.0;
  }
  return v;
}

ContextVector build_context(ContextScheme scheme, std::span<const std::string> active,
                            std::span<const std::string> universe, std::string_view request_text,
                            const EmbeddingProvider* embedding, const SlotPredictorModel* predictor, int step) {
  if (scheme == ContextScheme::method1) return {one_hot(active, universe), scheme, step};
  if (!embedding) throw ValidationError(std::string(to_string(scheme)) + " context needs an embedding provider");
  std::vector<double> values;
  if (scheme == ContextScheme::method2) {
    values = one_hot(active, universe);
  } else {
    if (!predictor || !predictor->trained()) throw StateError("context method3 needs a trained slot predictor");
    values.assign(predictor->embed_dim(), 0.0);
    bool first = true;
    for (const auto& slot : active) {
      if (!predictor->has_slot(slot)) throw ValidationError("slot '" + slot + "' unknown to the slot predictor");
      auto row = predictor->slot_embedding(slot);
      for (std::size_t j = 0; j < values.size(); ++j) values[j] = first ? row[j] : std::max(values[j], row[j]);
      first = false;
    }
  }
  auto e = embedding->embed(request_text);
  values.insert(values.end(), e.values.begin(), e.values.end());
  return {std::move(values), scheme, step};
}

ContextVector context_method1(const SemanticFrame& frame, std::span<const std::string> selected,
                              std::span<const std::string> universe, int step) {
  return build_context(ContextScheme::method1, active_slots(frame, selected), universe, {}, nullptr, nullptr, step);
}

ContextVector context_method2(const SemanticFrame& frame, std::span<const std::string> selected,
                              std::span<const std::string> universe, std::string_view request_text,
                              const EmbeddingProvider& embedding, int step) {
  return build_context(ContextScheme::method2, active_slots(frame, selected), universe, request_text, &embedding,
                       nullptr, step);
}

ContextVector context_method3(const SemanticFrame& frame, std::span<const std::string> selected,
                              const SlotPredictorModel& predictor, std::string_view request_text,
                              const EmbeddingProvider& embedding, int step) {
  return build_context(ContextScheme::method3, active_slots(frame, selected), {}, request_text, &embedding,
                       &predictor, step);
}

std::size_t context_dim(ContextScheme scheme, std::size_t n_slots, std::size_t embed_dim,
                        std::size_t slot_embed_dim) {
  switch (scheme) {
    case ContextScheme::method1: return n_slots;
    case ContextScheme::method2: return n_slots + embed_dim;
    case ContextScheme::method3: return slot_embed_dim + embed_dim;
  }
  return n_slots;
}

}  // namespace intentloop
