#include "intentloop/ope.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "intentloop/errors.hpp"
#include "intentloop/session.hpp"

namespace intentloop {

namespace {

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::string EvaluationPolicy::act(const LoggedDecision& d, std::mt19937_64& rng) const {
  const auto p = probabilities(d);
  if (p.empty()) throw ValidationError("policy has no action for an empty eligible set");
  const double u = unit_draw(rng);
  double acc = 0.0;
  std::string last;
  for (const auto& [a, pa] : p) {
    if (pa <= 0.0) continue;
    last = a;
    acc += pa;
    if (u < acc) return a;
  }
  return last.empty() ? p.begin()->first : last;
}

std::string EvaluationPolicy::greedy(const LoggedDecision& d) const {
  const auto p = probabilities(d);
  if (p.empty()) throw ValidationError("policy has no action for an empty eligible set");
  auto best = p.begin();
  for (auto it = p.begin(); it != p.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

std::map<std::string, double> BanditPolicy::probabilities(const LoggedDecision& d) const {
  return registry_->model(d.key)->action_probabilities(d.context, d.eligible);
}

std::map<std::string, double> LoggingPolicy::probabilities(const LoggedDecision& d) const {
  std::map<std::string, double> p;
  std::set<std::string> arms(d.eligible.begin(), d.eligible.end());
  arms.insert(d.action);
  const double rest = arms.size() > 1 ? (1.0 - d.propensity) / static_cast<double>(arms.size() - 1) : 0.0;
  for (const auto& a : arms) p[a] = a == d.action ? d.propensity : rest;
  return p;
}

std::string LoggingPolicy::act(const LoggedDecision& d, std::mt19937_64&) const { return d.action; }

std::map<std::string, double> UniformPolicy::probabilities(const LoggedDecision& d) const {
  std::set<std::string> arms(d.eligible.begin(), d.eligible.end());
  std::map<std::string, double> p;
  for (const auto& a : arms) p[a] = 1.0 / static_cast<double>(arms.size());
  return p;
}

RsResult rs_evaluate(std::span<const LoggedDecision> logs, const EvaluationPolicy& policy, std::uint64_t seed) {
  if (logs.empty()) throw ValidationError("rejection sampling needs a non-empty log");
  for (const auto& d : logs) {
    const std::set<std::string> arms(d.eligible.begin(), d.eligible.end());
    if (arms.empty() || std::abs(d.propensity - 1.0 / static_cast<double>(arms.size())) > 1e-9)
      throw ValidationError("rejection sampling needs uniform logging propensities; use NCIS for this log");
  }
  std::mt19937_64 rng(seed);
  RsResult r;
  r.n = logs.size();
  double total = 0.0;
  for (const auto& d : logs) {
    if (policy.act(d, rng) != d.action) continue;
    ++r.accepted;
    total += d.reward;
  }
  if (r.accepted == 0) throw UndefinedEstimateError("rejection sampling accepted no records");
  r.estimate = total / static_cast<double>(r.accepted);
  return r;
}

NcisResult ncis_evaluate(std::span<const LoggedDecision> logs, const EvaluationPolicy& policy, double cap) {
  if (logs.empty()) throw ValidationError("NCIS needs a non-empty log");
  if (!(cap > 0.0)) throw ValidationError("NCIS cap must be positive");
  NcisResult r;
  r.n = logs.size();
  r.cap = cap;
  double num = 0.0;
  for (const auto& d : logs) {
    if (!(d.propensity > 0.0)) throw ValidationError("logged propensity must be positive");
    const auto p = policy.probabilities(d);
    auto it = p.find(d.action);
    const double pi = it == p.end() ? 0.0 : it->second;
    const double w = std::min(pi / d.propensity, cap);
    num += w * d.reward;
    r.weight_sum += w;
  }
  if (r.weight_sum <= 0.0) throw UndefinedEstimateError("all NCIS weights are zero");
  r.estimate = num / r.weight_sum;
  return r;
}

double online_ground_truth(const EvaluationPolicy& policy, BanditEnvironment& env, std::size_t n,
                           std::uint64_t seed) {
  if (n == 0) throw ValidationError("online ground truth needs n >= 1");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto d = env.draw(rng);
    total += env.reward(d, policy.act(d, rng), rng);
  }
  return total / static_cast<double>(n);
}

std::vector<LoggedDecision> collect_logs(const EvaluationPolicy& logging, BanditEnvironment& env, std::size_t n,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LoggedDecision> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto d = env.draw(rng);
    d.action = logging.act(d, rng);
    d.propensity = logging.probabilities(d).at(d.action);
    d.reward = env.reward(d, d.action, rng);
    out.push_back(std::move(d));
  }
  return out;
}

ExpandedLogs expand_records(std::span<const InteractionRecord> records, ContextScheme scheme,
                            const IntentOntology& ontology, const EmbeddingProvider* embedding,
                            const SlotPredictorModel* predictor) {
  ExpandedLogs out;
  std::map<std::string, std::set<std::string>> shown_before;  // per session
  for (const auto& rec : records) {
    const IntentKey key{rec.topic, rec.intent};
    auto& seen = shown_before[rec.session_id];
    std::set<std::string> excluded(rec.context_slots.begin(), rec.context_slots.end());
    excluded.insert(seen.begin(), seen.end());
    std::vector<std::string> eligible;
    for (const auto& id : ontology.slot_ids(key))
      if (!excluded.contains(id)) eligible.push_back(id);
    const auto ctx = context_from_record(rec, scheme, ontology, embedding, predictor);
    const bool has_prop = rec.propensities.size() == rec.shown.size();
    if (!has_prop) out.assumed_uniform = true;
    for (std::size_t p = 0; p < rec.shown.size(); ++p) {
      const auto& arm = rec.shown[p];
      if (std::find(eligible.begin(), eligible.end(), arm) == eligible.end())
        throw ValidationError("record of session " + rec.session_id + " shows ineligible slot '" + arm + "'");
      LoggedDecision d;
      d.key = key;
      d.context = ctx;
      d.eligible = eligible;
      d.action = arm;
      d.reward = std::find(rec.selected.begin(), rec.selected.end(), arm) != rec.selected.end() ? 1.0 : 0.0;
      d.propensity = has_prop ? rec.propensities[p] : 1.0 / static_cast<double>(eligible.size());
      out.decisions.push_back(std::move(d));
      std::erase(eligible, arm);
    }
    seen.insert(rec.shown.begin(), rec.shown.end());
  }
  return out;
}

nlohmann::ordered_json OpeReport::to_json() const {
  nlohmann::ordered_json j;
  j["policy"] = policy;
  if (rs) {
    j["rs"] = rs->estimate;
    j["acceptance"] = rs->accepted;
    j["acceptance_rate"] = rs->acceptance_rate();
  } else {
    j["rs"] = nullptr;
    j["acceptance"] = 0;
    j["rs_error"] = rs_error;
  }
  j["ncis"] = ncis.estimate;
  j["n"] = n;
  j["cap"] = ncis.cap;
  j["assumed_uniform_propensities"] = assumed_uniform;
  return j;
}

OpeReport evaluate_policy(std::string policy_name, std::span<const LoggedDecision> logs,
                          const EvaluationPolicy& policy, double cap, std::uint64_t seed) {
  OpeReport r;
  r.policy = std::move(policy_name);
  r.n = logs.size();
  try {
    r.rs = rs_evaluate(logs, policy, seed);
  } catch (const Error& e) {
    r.rs_error = e.what();
  }
  r.ncis = ncis_evaluate(logs, policy, cap);
  return r;
}

}  // namespace intentloop
