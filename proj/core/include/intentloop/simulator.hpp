#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/bandit.hpp"
#include "intentloop/embedding.hpp"
#include "intentloop/ope.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/qpp.hpp"
#include "intentloop/retrieval.hpp"
#include "intentloop/session.hpp"

namespace intentloop {

// Coupling strength used for the "context matters" experiments.
inline constexpr double kHighCoupling = 5.0;

struct SimConfig {
  std::uint64_t seed = 7;
  std::size_t n_intents = 14;
  std::size_t n_slots_per_intent = 20;
  std::size_t n_requests = 100;
  double coupling_strength = kHighCoupling;
  std::size_t slate_size = 3;
  double dirichlet_alpha = 0.3;
  double noise = 0.05;
  std::size_t partners_per_slot = 2;
  std::size_t min_mentions = 1;
  std::size_t max_mentions = 6;
  int max_steps = kDefaultMaxSteps;
  std::size_t embed_dim = 32;
  std::size_t max_interactions = 0;  // stop after this many feedback steps; 0 = no limit

  nlohmann::ordered_json to_json() const;
  static SimConfig from_json(const nlohmann::json& doc, SimConfig base);
  static SimConfig from_json(const nlohmann::json& doc);
};

SimConfig load_sim_config(const std::filesystem::path& path);

/// Two topics with the intents service/restaurants, appliance, ... and
/// pseudo-word slot labels; fully determined by the seed.
IntentOntology generate_ontology(const SimConfig& config);

/// Population-level user model of one (topic, intent).
class SyntheticUser {
 public:
  SyntheticUser() = default;
  SyntheticUser(std::vector<std::string> slots, std::vector<double> preferences,
                std::vector<std::vector<double>> affinity, double coupling_strength, double noise);

  static SyntheticUser sample(std::vector<std::string> slots, const SimConfig& config, std::mt19937_64& rng);

  const std::vector<std::string>& slots() const noexcept { return slots_; }
  const std::vector<double>& preferences() const noexcept { return prefs_; }
  double noise() const noexcept { return noise_; }

  /// Preferences over the inactive slots after coupling with `active`,
  /// normalized; active slots get 0. Aligned with slots().
  std::vector<double> coupled(std::span<const std::string> active) const;

  /// Probability of selecting `slot` when shown, given the active slots.
  double selection_probability(const std::string& slot, std::span<const std::string> active) const;

  /// Slots whose preference is boosted once `slot` is active.
  std::vector<std::string> partners(const std::string& slot) const;

  /// Draws mentions one at a time from the coupled preferences.
  std::vector<std::string> draw_mentions(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::vector<std::string> slots_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<double> prefs_;
  std::vector<std::vector<double>> affinity_;  // affinity_[x][y]: boost of y once x is active
  double strength_ = 0.0;
  double noise_ = 0.0;
};

struct SimulatedRequest {
  ComplexRequest request;
  SemanticFrame frame;
};

struct SimulationResult {
  std::vector<Session> sessions;
  std::vector<InteractionRecord> logs;
  std::vector<double> step_rewards;  // selected / shown per feedback step

  double mean_reward() const;
  /// Mean over the last `fraction` of steps.
  double tail_mean(double fraction) const;
};

struct RefinedPair {
  std::string original;
  std::string refined;
  IntentKey key;
  Breadth breadth = Breadth::broad;
  std::size_t selections = 0;
};

class Simulator {
 public:
  explicit Simulator(SimConfig config);

  const SimConfig& config() const noexcept { return config_; }
  const IntentOntology& ontology() const noexcept { return ontology_; }
  const SyntheticUser& user(const IntentKey& key) const;
  const EmbeddingProvider& embedding() const noexcept { return embedding_; }
  const std::vector<std::string>& locations() const noexcept { return locations_; }

  SimulatedRequest draw_request(std::mt19937_64& rng) const;
  SimulatedRequest draw_request(const IntentKey& key, std::mt19937_64& rng) const;

  /// The policy seed is replaced by the simulation seed.
  EngineConfig engine_config(PolicyConfig policy, ContextScheme scheme) const;
  EngineConfig engine_config(PolicyKind kind, ContextScheme scheme) const;
  std::unique_ptr<Engine> make_engine(const PolicyConfig& policy, ContextScheme scheme,
                                      const SlotPredictorModel* predictor = nullptr) const;
  std::unique_ptr<Engine> make_engine(PolicyKind kind, ContextScheme scheme,
                                      const SlotPredictorModel* predictor = nullptr) const;

  /// Suggestion override that shows the slots the users are most likely to pick.
  SuggestionOverride oracle() const;

  /// Runs config.n_requests sessions (or until max_interactions steps) on the engine.
  SimulationResult run(Engine& engine, bool keep_sessions = true) const;

  std::mt19937_64 session_rng(std::size_t index) const;

 private:
  SimConfig config_;
  IntentOntology ontology_;
  std::map<IntentKey, SyntheticUser> users_;
  std::vector<IntentKey> keys_;
  std::vector<double> key_weights_;
  std::vector<std::string> locations_;
  HashEmbeddingProvider embedding_;
};

/// Shortcut: simulator + engine for one policy and scheme.
SimulationResult simulate_sessions(const SimConfig& config, PolicyKind kind, ContextScheme scheme,
                                   bool keep_sessions = true);

/// Request text with the labels of the selected slots appended.
std::vector<RefinedPair> refine_request_corpus(std::span<const Session> sessions, const IntentOntology& ontology);

/// Single-decision environment over one or all intents: the context holds
/// the mentioned slots, every other slot is eligible and the reward is the
/// user's selection of the action.
class SimulatorEnvironment final : public BanditEnvironment {
 public:
  SimulatorEnvironment(const Simulator& simulator, ContextScheme scheme, std::optional<IntentKey> key = std::nullopt);

  LoggedDecision draw(std::mt19937_64& rng) override;
  double reward(const LoggedDecision& decision, const std::string& action, std::mt19937_64& rng) override;
  double expected_reward(const LoggedDecision& decision, const std::string& action) const;

 private:
  const Simulator* sim_;
  ContextScheme scheme_;
  std::optional<IntentKey> key_;
};

/// Search results made up from the ontology and the users' slot affinities,
/// for building a corpus without a search service.
class SyntheticSearchProvider final : public SearchProvider {
 public:
  explicit SyntheticSearchProvider(const Simulator& simulator);
  std::vector<Document> search(const std::string& query, std::size_t k) override;

 private:
  const Simulator* sim_;
  std::map<std::string, IntentKey> intents_by_label_;
  std::map<std::pair<IntentKey, std::string>, std::string> slots_by_label_;
};

}  // namespace intentloop
