#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/ontology.hpp"

namespace intentloop {

/// Conditional slot distribution P(slot | intent, topic) for one intent,
/// captured at a single point in time.
struct SlotDistribution {
  IntentKey key;
  std::vector<std::string> slot_ids;  // ontology order
  std::vector<double> probabilities;  // aligned with slot_ids
  bool smoothed = false;

  double probability(std::string_view slot_id) const;
  bool contains(std::string_view slot_id) const;

  /// Mean plus population standard deviation of the probabilities.
  double threshold() const;

  nlohmann::json to_json() const;
  static SlotDistribution from_json(const nlohmann::json& doc);
};

/// Per-intent slot frequency counts. Updates to one (topic, intent) are
/// serialized by that key's lock; readers always see a normalized snapshot.
class IntentProfile {
 public:
  explicit IntentProfile(const IntentOntology& ontology, double laplace_alpha = 1.0);

  IntentProfile(IntentProfile&&) noexcept = default;
  IntentProfile& operator=(IntentProfile&&) noexcept = default;

  /// Increments each listed slot by one. All ids are validated before any
  /// count changes.
  void record(const IntentKey& key, std::span<const std::string> slot_ids);

  std::uint64_t count(const IntentKey& key, std::string_view slot_id) const;
  std::uint64_t total(const IntentKey& key) const;

  SlotDistribution distribution(const IntentKey& key) const;
  const std::vector<std::string>& slot_ids(const IntentKey& key) const;
  std::vector<IntentKey> keys() const;

  void reset(const IntentKey& key);
  void set_count(const IntentKey& key, std::string_view slot_id, std::uint64_t count);

  double laplace_alpha() const noexcept { return alpha_; }

  /// `{"<topic>/<intent>/<slot>": count}` with zero counts omitted.
  nlohmann::ordered_json to_json() const;
  void load_counts(const nlohmann::json& doc);

 private:
  struct Entry {
    std::vector<std::string> slot_ids;
    std::map<std::string, std::size_t, std::less<>> position;
    std::vector<std::uint64_t> counts;
    mutable std::shared_mutex mutex;
  };

  Entry& entry(const IntentKey& key);
  const Entry& entry(const IntentKey& key) const;

  double alpha_;
  std::map<IntentKey, std::unique_ptr<Entry>> entries_;
};

IntentProfile load_profile(const std::filesystem::path& path, const IntentOntology& ontology);
void save_profile(const IntentProfile& profile, const std::filesystem::path& path);

struct MentionedSlot {
  std::string slot_id;
  std::optional<AspectValue> aspect;

  bool operator==(const MentionedSlot&) const = default;
};

// Structured form of a complex request: topic, intent, mentioned slots, ICS.
struct SemanticFrame {
  std::string topic_id;
  std::string intent_id;
  std::vector<MentionedSlot> mentioned_slots;
  double ics = 0.0;
  std::optional<std::string> location;
  std::string provenance;  // "lm", "fallback", "rule", "simulated"
  std::vector<std::string> new_candidates;

  IntentKey key() const { return {topic_id, intent_id}; }

  /// Mentioned slot ids, first occurrence kept.
  std::vector<std::string> mentioned_ids() const;

  bool operator==(const SemanticFrame&) const = default;
};

nlohmann::ordered_json to_json(const SemanticFrame& frame);
SemanticFrame frame_from_json(const nlohmann::json& doc);

void record_interaction(IntentProfile& profile, const IntentKey& key,
                        std::span<const std::string> slot_ids);

double slot_probability(const IntentProfile& profile, const IntentKey& key, std::string_view slot_id);

/// Sum of P(slot) over the mentioned and the selected slots. Duplicates
/// within a list are counted once; the two lists must be disjoint. The
/// result is clamped to [0, 1].
double intent_completion_score(const SlotDistribution& distribution,
                               std::span<const std::string> mentioned,
                               std::span<const std::string> selected);

double intent_completion_score(const IntentProfile& profile, const SemanticFrame& frame,
                               std::span<const std::string> selected);

double stopping_threshold(const IntentProfile& profile, const IntentKey& key);

inline constexpr int kDefaultMaxSteps = 6;

/// True while the intent is not yet complete and the step budget remains.
bool should_continue(double ics, double threshold, int step, int max_steps = kDefaultMaxSteps);

}  // namespace intentloop
