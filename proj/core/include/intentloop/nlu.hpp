#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentloop/embedding.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/profile.hpp"

namespace intentloop {

struct ComplexRequest {
  std::string text;
  std::optional<std::string> location;
  std::chrono::system_clock::time_point received_at{};
};

struct FewShotSlot {
  std::string label;
  std::string aspect;
};

struct FewShotExample {
  std::string request_text;
  std::string topic;
  std::string intent;
  std::vector<FewShotSlot> slots;
  std::optional<std::string> location;
};

std::vector<FewShotExample> load_few_shot_examples(const std::filesystem::path& path);

/// Picks at most `max_examples` examples, cycling over intents in order of
/// first appearance so every intent is represented before any repeats.
std::vector<FewShotExample> select_few_shot_pool(std::span<const FewShotExample> examples,
                                                 std::size_t max_examples = 16);

/// Renders the examples as REQUEST:/FRAME: blocks in the given order followed
/// by the target request and an empty FRAME: line.
std::string build_few_shot_prompt(std::span<const FewShotExample> examples, const ComplexRequest& request);

struct CompletionRequest {
  std::string prompt;
  std::string request_text;  // key for fixture providers
  double temperature = 0.0;
  int max_tokens = 256;
};

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// Serves completions from a JSON file mapping fixture_key(request text) to
/// completion text. Unknown requests raise ProviderError.
class FixtureCompletionProvider final : public CompletionProvider {
 public:
  FixtureCompletionProvider() = default;
  explicit FixtureCompletionProvider(std::map<std::string, std::string> completions);
  static FixtureCompletionProvider load(const std::filesystem::path& path);

  static std::string fixture_key(std::string_view request_text);

  void add(std::string_view request_text, std::string completion);
  std::string complete(const CompletionRequest& request) override;

 private:
  std::map<std::string, std::string> completions_;
};

// POST /complete {prompt, temperature, max_tokens} -> {text}
class HttpCompletionProvider final : public CompletionProvider {
 public:
  explicit HttpCompletionProvider(HttpProviderOptions options);
  std::string complete(const CompletionRequest& request) override;

 private:
  HttpProviderOptions options_;
};

inline constexpr double kDefaultMatchThreshold = 0.35;

struct CanonicalSlot {
  std::optional<std::string> slot_id;  // set when the match is accepted
  std::string nearest_slot_id;         // best ontology slot, empty if the intent has none
  double distance = 1.0;
  std::string raw_label;

  bool is_new_candidate() const noexcept { return !slot_id.has_value(); }
};

/// Maps a generated slot label to the closest ontology slot of (topic, intent)
/// by cosine distance; distances above `threshold` yield a new candidate.
CanonicalSlot canonicalize_slot(std::string_view generated_label, const IntentKey& key,
                                const IntentOntology& ontology, const EmbeddingProvider& embedding,
                                double threshold = kDefaultMatchThreshold);

struct NluConfig {
  double match_threshold = kDefaultMatchThreshold;
  double temperature = 0.0;
  int max_tokens = 256;
  std::size_t max_examples = 16;
};

/// Keyword fallback: intent with the highest token overlap with the request,
/// slots whose labels occur verbatim in the request.
SemanticFrame rule_based_frame(const ComplexRequest& request, const IntentOntology& ontology,
                               const IntentProfile& profile);

/// Full NLU path. With a provider the completion must be one JSON object
/// `{topic, intent, slots:[{label, aspect}], location?}`; transport failures
/// or non-JSON output fall back to rule_based_frame (provenance "fallback").
/// Completions naming an unknown topic/intent raise UnknownIntentError.
SemanticFrame parse_frame(const ComplexRequest& request, CompletionProvider* provider,
                          const IntentOntology& ontology, const IntentProfile& profile,
                          const EmbeddingProvider& embedding, std::span<const FewShotExample> few_shot,
                          const NluConfig& config = {});

}  // namespace intentloop
