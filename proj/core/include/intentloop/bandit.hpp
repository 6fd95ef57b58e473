#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/context.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/profile.hpp"

namespace intentloop {

enum class PolicyKind {
  epsilon_greedy,
  adaptive_greedy,
  adaptive_active_greedy,
  softmax_explorer,
  bootstrapped_ucb,
  bootstrapped_ts,
  popularity_baseline,
  uniform_random,
};

std::string_view to_string(PolicyKind kind) noexcept;
PolicyKind policy_kind_from_string(std::string_view name);
std::vector<PolicyKind> all_policy_kinds();

struct PolicyConfig {
  PolicyKind kind = PolicyKind::adaptive_active_greedy;
  double epsilon = 0.1;
  double epsilon_decay = 0.9997;
  double percentile = 80.0;
  double percentile_decay = 0.998;
  std::size_t window = 500;
  double softmax_temperature = 1.0;
  std::size_t bootstrap_resamples = 10;
  double ucb_percentile = 80.0;
  double ridge_lambda = 1.0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
  /// Fields present in `doc` override `base`.
  static PolicyConfig from_json(const nlohmann::json& doc, PolicyConfig base);
  static PolicyConfig from_json(const nlohmann::json& doc);
};

/// Config file: `{"defaults": {...}, "<policy kind>": {...}}`; the section of
/// `kind` overrides the defaults.
PolicyConfig load_policy_config(const std::filesystem::path& path, PolicyKind kind);

/// Ridge regression with an intercept, kept as (A^-1, b) and updated by
/// Sherman-Morrison rank-one steps.
class RidgeArm {
 public:
  RidgeArm() = default;
  RidgeArm(std::size_t context_dim, double lambda);

  double predict(std::span<const double> x) const;
  void update(std::span<const double> x, double reward, double weight = 1.0);

  std::size_t context_dim() const noexcept { return dim_ == 0 ? 0 : dim_ - 1; }
  const std::vector<double>& weights() const noexcept { return theta_; }

  nlohmann::json to_json() const;
  static RidgeArm from_json(const nlohmann::json& doc);

  bool operator==(const RidgeArm&) const = default;

 private:
  std::size_t dim_ = 0;  // context dim + 1
  std::vector<double> a_inv_;
  std::vector<double> b_;
  std::vector<double> theta_;
};

struct ArmStats {
  std::uint64_t observations = 0;
  std::uint64_t rewards = 0;

  bool operator==(const ArmStats&) const = default;
};

struct Slate {
  std::vector<std::string> arms;
  std::vector<double> propensities;  // probability of each pick given the earlier picks
};

/// Contextual bandit of one (topic, intent): one arm per slot.
///
/// Every policy is expressed as a distribution over the eligible arms;
/// greedy choices are point masses and ties go to the lexicographically
/// smallest slot id. A slate is drawn position by position without
/// replacement, consuming one uniform draw per position.
class BanditModel {
 public:
  BanditModel(IntentKey key, std::vector<std::string> arms, ContextScheme scheme, std::size_t context_dim,
              PolicyConfig config);

  BanditModel(const BanditModel& other);
  BanditModel& operator=(const BanditModel& other);

  const IntentKey& key() const noexcept { return key_; }
  const std::vector<std::string>& arms() const noexcept { return arms_; }
  ContextScheme scheme() const noexcept { return scheme_; }
  std::size_t context_dim() const noexcept { return context_dim_; }
  const PolicyConfig& config() const noexcept { return config_; }

  /// Up to k distinct arms out of `eligible` using the model's own
  /// exploration stream.
  Slate suggest(const ContextVector& context, std::span<const std::string> eligible, std::size_t k);

  /// Single decision with a caller-supplied generator; the model is not
  /// modified.
  std::string choose(const ContextVector& context, std::span<const std::string> eligible,
                     std::mt19937_64& rng) const;

  /// pi(a | c) over `eligible`.
  std::map<std::string, double> action_probabilities(const ContextVector& context,
                                                     std::span<const std::string> eligible) const;

  /// Point estimate of the reward of each eligible arm (aligned).
  std::vector<double> scores(const ContextVector& context, std::span<const std::string> eligible) const;

  /// One observation per shown arm in display order, reward 1 iff selected.
  /// `eligible` is the set the slate was drawn from; the adaptive window
  /// records the best score over it (over every arm when empty).
  void update(const ContextVector& context, std::span<const std::string> shown,
              std::span<const std::string> selected, std::span<const std::string> eligible = {});

  std::uint64_t updates() const;
  ArmStats arm_stats(std::string_view arm) const;
  double current_epsilon() const;
  double current_percentile() const;

  /// Full state including the exploration stream.
  nlohmann::json checkpoint() const;
  static BanditModel from_checkpoint(const nlohmann::json& doc);

  /// State shaped only by updates (no exploration stream); equal across
  /// runs that apply the same update sequence.
  nlohmann::json learned_state() const;

 private:
  struct Distribution {
    std::vector<std::string> arms;  // sorted eligible arms
    std::vector<double> probs;
  };

  std::size_t arm_index(std::string_view arm) const;
  void check_context(const ContextVector& context) const;
  double arm_score(std::size_t arm, std::span<const double> x) const;
  // mode: 1 exploit, 0 explore, -1 decided by the adaptive threshold
  Distribution distribution(std::span<const double> x, std::span<const std::string> eligible, int mode = -1) const;
  bool exploits(std::span<const double> x, std::span<const std::string> eligible) const;
  double adaptive_threshold() const;
  static std::size_t sample(const Distribution& d, double u);
  nlohmann::json learned_json() const;

  IntentKey key_;
  std::vector<std::string> arms_;
  std::map<std::string, std::size_t, std::less<>> arm_pos_;
  ContextScheme scheme_;
  std::size_t context_dim_;
  PolicyConfig config_;

  std::vector<RidgeArm> learners_;               // one per arm (greedy kinds)
  std::vector<std::vector<RidgeArm>> replicas_;  // arm x resample (bootstrapped kinds)
  std::vector<ArmStats> stats_;
  std::vector<double> window_;  // recent best predicted rewards, ring buffer
  std::size_t window_next_ = 0;
  std::uint64_t updates_ = 0;
  std::mt19937_64 explore_rng_;
  std::mt19937_64 update_rng_;
  mutable std::unique_ptr<std::mutex> mutex_;
};

/// Top-k slots of (topic, intent) by P(slot | intent, topic), ties
/// lexicographic, excluding `exclusions`.
std::vector<std::string> popularity_suggest(const IntentProfile& profile, const IntentKey& key,
                                            std::span<const std::string> exclusions, std::size_t k);

/// One lazily created BanditModel per (topic, intent).
class BanditRegistry {
 public:
  BanditRegistry(const IntentOntology& ontology, ContextScheme scheme, PolicyConfig config,
                 std::size_t embed_dim, std::size_t slot_embed_dim = 100);

  std::shared_ptr<BanditModel> model(const IntentKey& key);
  bool contains(const IntentKey& key) const;
  std::size_t size() const;

  ContextScheme scheme() const noexcept { return scheme_; }
  const PolicyConfig& config() const noexcept { return config_; }
  std::size_t context_dim(const IntentKey& key) const;

  nlohmann::json checkpoint() const;
  void load_checkpoint(const nlohmann::json& doc);
  nlohmann::json learned_state() const;

 private:
  const IntentOntology* ontology_;
  ContextScheme scheme_;
  PolicyConfig config_;
  std::size_t embed_dim_;
  std::size_t slot_embed_dim_;
  mutable std::mutex mutex_;
  std::map<IntentKey, std::shared_ptr<BanditModel>> models_;
};

}  // namespace intentloop
