#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intentloop/bandit.hpp"
#include "intentloop/context.hpp"
#include "intentloop/interaction_log.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/slot_predictor.hpp"

namespace intentloop {

struct LoggedDecision {
  IntentKey key;
  ContextVector context;
  std::vector<std::string> eligible;
  std::string action;
  double reward = 0.0;
  double propensity = 1.0;
};

class EvaluationPolicy {
 public:
  virtual ~EvaluationPolicy() = default;

  /// pi(a | c) over decision.eligible.
  virtual std::map<std::string, double> probabilities(const LoggedDecision& decision) const = 0;

  /// Action the policy takes on the decision's context; a draw from
  /// probabilities() unless overridden.
  virtual std::string act(const LoggedDecision& decision, std::mt19937_64& rng) const;

  /// Highest-probability action, ties to the smallest slot id.
  std::string greedy(const LoggedDecision& decision) const;
};

/// Evaluates the bandit models of a registry.
class BanditPolicy final : public EvaluationPolicy {
 public:
  explicit BanditPolicy(BanditRegistry& registry) : registry_(&registry) {}
  std::map<std::string, double> probabilities(const LoggedDecision& decision) const override;

 private:
  BanditRegistry* registry_;
};

/// The behaviour that produced the log: acts as logged, pi(a_i|c_i) equals
/// the logged propensity.
class LoggingPolicy final : public EvaluationPolicy {
 public:
  std::map<std::string, double> probabilities(const LoggedDecision& decision) const override;
  std::string act(const LoggedDecision& decision, std::mt19937_64& rng) const override;
};

class UniformPolicy final : public EvaluationPolicy {
 public:
  std::map<std::string, double> probabilities(const LoggedDecision& decision) const override;
};

struct RsResult {
  double estimate = 0.0;
  std::size_t accepted = 0;
  std::size_t n = 0;

  double acceptance_rate() const noexcept { return n ? static_cast<double>(accepted) / static_cast<double>(n) : 0.0; }
};

/// Rejection sampling: keeps the records where the policy's action on the
/// logged context equals the logged action. Needs uniform logging
/// propensities (1 / |eligible|).
RsResult rs_evaluate(std::span<const LoggedDecision> logs, const EvaluationPolicy& policy, std::uint64_t seed = 0);

struct NcisResult {
  double estimate = 0.0;
  std::size_t n = 0;
  double cap = 10.0;
  double weight_sum = 0.0;
};

inline constexpr double kDefaultNcisCap = 10.0;

/// sum min(w, cap) r / sum min(w, cap) with w = pi(a|c) / propensity.
NcisResult ncis_evaluate(std::span<const LoggedDecision> logs, const EvaluationPolicy& policy,
                         double cap = kDefaultNcisCap);

class BanditEnvironment {
 public:
  virtual ~BanditEnvironment() = default;
  /// A fresh decision point (key, context, eligible); action and reward unset.
  virtual LoggedDecision draw(std::mt19937_64& rng) = 0;
  virtual double reward(const LoggedDecision& decision, const std::string& action, std::mt19937_64& rng) = 0;
};

/// Mean reward of the policy over n fresh interactions with the environment.
double online_ground_truth(const EvaluationPolicy& policy, BanditEnvironment& env, std::size_t n,
                           std::uint64_t seed);

/// n decisions taken by `logging` with their propensities.
std::vector<LoggedDecision> collect_logs(const EvaluationPolicy& logging, BanditEnvironment& env, std::size_t n,
                                         std::uint64_t seed);

struct ExpandedLogs {
  std::vector<LoggedDecision> decisions;
  bool assumed_uniform = false;  // some records carried no propensities
};

/// One decision per shown slot. Eligible sets are rebuilt from the session's
/// earlier records: the intent's slots minus active, previously shown and
/// earlier slate positions.
ExpandedLogs expand_records(std::span<const InteractionRecord> records, ContextScheme scheme,
                            const IntentOntology& ontology, const EmbeddingProvider* embedding,
                            const SlotPredictorModel* predictor);

struct OpeReport {
  std::string policy;
  std::optional<RsResult> rs;
  std::string rs_error;
  NcisResult ncis;
  std::size_t n = 0;
  bool assumed_uniform = false;

  nlohmann::ordered_json to_json() const;
};

OpeReport evaluate_policy(std::string policy_name, std::span<const LoggedDecision> logs,
                          const EvaluationPolicy& policy, double cap = kDefaultNcisCap, std::uint64_t seed = 0);

}  // namespace intentloop
