#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/bandit.hpp"
#include "intentloop/context.hpp"
#include "intentloop/embedding.hpp"
#include "intentloop/interaction_log.hpp"
#include "intentloop/nlu.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/profile.hpp"
#include "intentloop/retrieval.hpp"
#include "intentloop/slot_predictor.hpp"

namespace intentloop {

enum class SessionState { refining, ready, retrieved, abandoned };

std::string_view to_string(SessionState state) noexcept;
SessionState session_state_from_string(std::string_view name);

struct Session {
  std::string id;
  ComplexRequest request;
  SemanticFrame frame;
  ContextVector context;
  int step = 0;
  int max_steps = kDefaultMaxSteps;
  std::vector<std::string> selected;
  std::vector<std::string> rejected;
  std::vector<std::string> shown_history;  // every slot shown so far
  std::vector<std::string> last_shown;
  std::vector<double> last_propensities;
  SessionState state = SessionState::refining;
  std::string created_at;
  std::chrono::system_clock::time_point last_activity{};
  SlotDistribution distribution;  // profile snapshot the ICS is measured against
  double threshold = 0.0;
  std::string diagnostic;
  std::vector<InteractionRecord> log;
  std::vector<Suggestion> results;

  double ics() const noexcept { return frame.ics; }
};

nlohmann::ordered_json to_json(const Session& session);
Session session_from_json(const nlohmann::json& doc);

struct EngineConfig {
  ContextScheme scheme = ContextScheme::method1;
  PolicyConfig policy;
  std::size_t slate_size = 3;
  int max_steps = kDefaultMaxSteps;
  NluConfig nlu;
  std::chrono::seconds idle_ttl{1800};
  std::optional<std::filesystem::path> log_dir;  // logs/<date>/<session_id>.jsonl below this
  std::size_t search_k = 10;
  RankOptions rank;
  std::optional<std::uint64_t> session_id_seed;  // random ids when unset
  bool record_mentions = true;
};

// Borrowed collaborators; all optional except the embedding provider.
struct EngineProviders {
  const EmbeddingProvider* embedding = nullptr;
  CompletionProvider* completion = nullptr;  // NLU; rule-based when null
  CompletionProvider* ranker = nullptr;      // lexical ranking when null
  SearchProvider* search = nullptr;
  const SlotPredictorModel* predictor = nullptr;
  std::vector<FewShotExample> few_shot;
};

/// Replaces the bandit's slate for a session (used for oracle baselines).
using SuggestionOverride =
    std::function<Slate(const Session& session, std::span<const std::string> eligible, std::size_t k)>;

class Engine {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  Engine(IntentOntology ontology, EngineConfig config, EngineProviders providers);

  const IntentOntology& ontology() const noexcept { return ontology_; }
  IntentProfile& profile() noexcept { return profile_; }
  const IntentProfile& profile() const noexcept { return profile_; }
  BanditRegistry& registry() noexcept { return registry_; }
  const EngineConfig& config() const noexcept { return config_; }
  const EngineProviders& providers() const noexcept { return providers_; }

  void set_clock(Clock clock) { clock_ = std::move(clock); }
  void set_suggestion_override(SuggestionOverride fn) { override_ = std::move(fn); }

  /// NLU, initial ICS and the first slate. An unknown intent yields an
  /// abandoned session carrying the diagnostic.
  Session start_session(const ComplexRequest& request);

  /// Same as start_session with an already-parsed frame.
  Session start_session_from_frame(const ComplexRequest& request, SemanticFrame frame);

  /// Feedback on the last slate: updates the profile and the bandit, then
  /// rebuilds the context and recomputes the ICS.
  void apply_feedback(Session& session, std::span<const std::string> selected,
                      std::span<const std::string> rejected);

  /// Sub-queries, search and ranking for a ready session.
  std::vector<Suggestion> retrieve(Session& session);

  void abandon(Session& session, std::string reason);
  /// Abandons the session if it has been idle longer than the TTL.
  bool abandon_if_idle(Session& session);

  /// Slots of the session's intent that may still be suggested.
  std::vector<std::string> eligible_slots(const Session& session) const;

  ContextVector make_context(const Session& session) const;

 private:
  std::string next_session_id();
  std::chrono::system_clock::time_point now() const;
  void issue_suggestions(Session& session);
  void update_state(Session& session);
  void persist(const Session& session, const InteractionRecord& record) const;

  IntentOntology ontology_;
  EngineConfig config_;
  EngineProviders providers_;
  IntentProfile profile_;
  BanditRegistry registry_;
  Clock clock_;
  SuggestionOverride override_;
  std::mutex id_mutex_;
  std::uint64_t id_state_ = 0;
  bool random_ids_ = true;
};

/// Writes every session's records as JSONL, sessions in order.
void export_log(std::span<const Session> sessions, const std::filesystem::path& path);

/// Path of a session's log below `root`: <root>/<YYYY-MM-DD>/<session_id>.jsonl.
std::filesystem::path session_log_path(const std::filesystem::path& root, const std::string& session_id,
                                       const std::string& created_at);

/// Context a logged step was decided in.
ContextVector context_from_record(const InteractionRecord& record, ContextScheme scheme,
                                  const IntentOntology& ontology, const EmbeddingProvider* embedding,
                                  const SlotPredictorModel* predictor);

/// Feeds logged steps through the bandit update in order.
void replay_log(std::span<const InteractionRecord> records, BanditRegistry& registry,
                const IntentOntology& ontology, const EmbeddingProvider* embedding,
                const SlotPredictorModel* predictor);

}  // namespace intentloop
