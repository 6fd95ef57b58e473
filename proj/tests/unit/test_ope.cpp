#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "intentloop/errors.hpp"
#include "intentloop/ope.hpp"
#include "test_support.hpp"

using namespace intentloop;

namespace {

const std::vector<std::string> kArms{"a0", "a1", "a2", "a3", "a4"};

LoggedDecision decision(std::string action, double reward, double propensity,
                        std::vector<std::string> eligible = {"a", "b"}) {
  LoggedDecision d;
  d.key = {"t", "i"};
  d.context = {{1.0}, ContextScheme::method1, 0};
  d.eligible = std::move(eligible);
  d.action = std::move(action);
  d.reward = reward;
  d.propensity = propensity;
  return d;
}

// Always picks `arm`.
class Fixed final : public EvaluationPolicy {
 public:
  explicit Fixed(std::string arm) : arm_(std::move(arm)) {}
  std::map<std::string, double> probabilities(const LoggedDecision& d) const override {
    std::map<std::string, double> p;
    for (const auto& a : d.eligible) p[a] = a == arm_ ? 1.0 : 0.0;
    return p;
  }

 private:
  std::string arm_;
};

// Probabilities looked up by action name, independent of the context.
class Table final : public EvaluationPolicy {
 public:
  explicit Table(std::map<std::string, double> p) : p_(std::move(p)) {}
  std::map<std::string, double> probabilities(const LoggedDecision&) const override { return p_; }

 private:
  std::map<std::string, double> p_;
};

// Context: one of 3 user types. Reward probability depends on (type, arm).
class ToyEnv final : public BanditEnvironment {
 public:
  LoggedDecision draw(std::mt19937_64& rng) override {
    LoggedDecision d;
    d.key = {"t", "i"};
    const auto type = rng() % 3;
    d.context = {{type == 0 ? 1.0 : 0.0, type == 1 ? 1.0 : 0.0, type == 2 ? 1.0 : 0.0}, ContextScheme::method1, 0};
    d.eligible = kArms;
    return d;
  }
  double expected(const LoggedDecision& d, const std::string& a) const {
    const std::size_t type = d.context.values[0] > 0 ? 0 : d.context.values[1] > 0 ? 1 : 2;
    const std::size_t arm = static_cast<std::size_t>(a[1] - '0');
    return arm == type ? 0.8 : 0.1 + 0.05 * static_cast<double>(arm);
  }
  double reward(const LoggedDecision& d, const std::string& a, std::mt19937_64& rng) override {
    return std::uniform_real_distribution<double>(0, 1)(rng) < expected(d, a) ? 1.0 : 0.0;
  }
};

// Leans towards the arm matching the user type.
class Leaning final : public EvaluationPolicy {
 public:
  std::map<std::string, double> probabilities(const LoggedDecision& d) const override {
    const std::size_t type = d.context.values[0] > 0 ? 0 : d.context.values[1] > 0 ? 1 : 2;
    std::map<std::string, double> p;
    for (std::size_t i = 0; i < kArms.size(); ++i) p[kArms[i]] = i == type ? 0.6 : 0.1;
    return p;
  }
};

class AlwaysPays final : public BanditEnvironment {
 public:
  LoggedDecision draw(std::mt19937_64&) override { return decision("", 0, 1, {"best", "worst"}); }
  double reward(const LoggedDecision&, const std::string& a, std::mt19937_64&) override { return a == "best"; }
};

}  // namespace

TEST(Ope, RsHandCount) {
  const std::vector<LoggedDecision> logs{decision("a", 1, 0.5), decision("b", 1, 0.5), decision("a", 0, 0.5),
                                         decision("b", 0, 0.5)};
  const auto r = rs_evaluate(logs, Fixed("a"));
  EXPECT_DOUBLE_EQ(r.estimate, 0.5);
  EXPECT_EQ(r.accepted, 2u);
  EXPECT_EQ(r.n, 4u);
}

TEST(Ope, RsFullAcceptanceForLoggingPolicy) {
  std::vector<LoggedDecision> logs;
  for (int i = 0; i < 9; ++i) logs.push_back(decision(i % 2 ? "a" : "b", i % 3 == 0, 0.5));
  const auto r = rs_evaluate(logs, LoggingPolicy{});
  EXPECT_EQ(r.accepted, 9u);
  EXPECT_DOUBLE_EQ(r.estimate, 3.0 / 9.0);
}

TEST(Ope, RsErrors) {
  EXPECT_THROW(rs_evaluate({}, Fixed("a")), ValidationError);
  const std::vector<LoggedDecision> skewed{decision("a", 1, 0.9)};
  EXPECT_THROW(rs_evaluate(skewed, Fixed("a")), ValidationError);
  const std::vector<LoggedDecision> none{decision("b", 1, 0.5)};
  EXPECT_THROW(rs_evaluate(none, Fixed("a")), UndefinedEstimateError);
}

TEST(Ope, NcisHandEvaluation) {
  // w = (1.0 / 0.5, 0.25 / 0.5)
  const std::vector<LoggedDecision> logs{decision("a", 1, 0.5), decision("b", 0, 0.5)};
  const auto r = ncis_evaluate(logs, Table({{"a", 1.0}, {"b", 0.25}}));
  EXPECT_NEAR(r.estimate, 0.8, 1e-12);
  EXPECT_NEAR(r.weight_sum, 2.5, 1e-12);
}

TEST(Ope, NcisCapAndLoggingPolicy) {
  const std::vector<LoggedDecision> logs{decision("a", 1, 0.01), decision("b", 0, 0.5)};
  const auto capped = ncis_evaluate(logs, Table({{"a", 1.0}, {"b", 0.5}}), 10.0);
  EXPECT_NEAR(capped.estimate, 10.0 / 11.0, 1e-12);
  std::vector<LoggedDecision> mixed;
  for (int i = 0; i < 10; ++i) mixed.push_back(decision(i % 2 ? "a" : "b", i % 4 == 0, 0.1 + 0.08 * i));
  EXPECT_NEAR(ncis_evaluate(mixed, LoggingPolicy{}).estimate, 3.0 / 10.0, 1e-12);
  EXPECT_THROW(ncis_evaluate(logs, Table({{"c", 1.0}})), UndefinedEstimateError);
  EXPECT_THROW(ncis_evaluate(logs, Table({{"a", 1.0}}), 0.0), ValidationError);
}

TEST(OpeProperty, NcisWithinRewardRange) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LoggedDecision> logs;
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 20); ++i) {
      const double r = std::round(u(rng) * 3.0) / 3.0;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      logs.push_back(decision(rng() % 2 ? "a" : "b", r, u(rng)));
    }
    const double pa = u(rng);
    const auto est = ncis_evaluate(logs, Table({{"a", pa}, {"b", 1 - pa}}), 1 + u(rng) * 20).estimate;
    EXPECT_GE(est, lo - 1e-12);
    EXPECT_LE(est, hi + 1e-12);
  }
}

TEST(OpeProperty, UncappedMatchingPolicyIsEmpiricalMean) {
  std::vector<LoggedDecision> logs;
  for (int i = 0; i < 50; ++i) logs.push_back(decision(i % 3 ? "a" : "b", i % 7 < 3, 0.05 + 0.018 * i));
  double mean = 0;
  for (const auto& d : logs) mean += d.reward;
  mean /= 50;
  const auto r = ncis_evaluate(logs, LoggingPolicy{}, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(r.estimate, mean, 1e-12);
}

TEST(OpeProperty, UniformTargetAcceptanceRate) {
  ToyEnv env;
  const auto logs = collect_logs(UniformPolicy{}, env, 20000, 5);
  const auto r = rs_evaluate(logs, UniformPolicy{}, 6);
  EXPECT_NEAR(r.acceptance_rate(), 1.0 / 5.0, 0.02);
}

TEST(Ope, NcisTracksGroundTruthForStochasticTarget) {
  ToyEnv env;
  const auto logs = collect_logs(UniformPolicy{}, env, 10000, 21);
  const Leaning target;
  const double truth = online_ground_truth(target, env, 20000, 22);
  const auto est = ncis_evaluate(logs, target);
  EXPECT_LE(std::abs(est.estimate - truth), 0.03) << est.estimate << " vs " << truth;
}

TEST(Ope, OnlineGroundTruth) {
  AlwaysPays env;
  EXPECT_DOUBLE_EQ(online_ground_truth(Fixed("best"), env, 100, 1), 1.0);
  ToyEnv toy;
  EXPECT_EQ(online_ground_truth(UniformPolicy{}, toy, 500, 3), online_ground_truth(UniformPolicy{}, toy, 500, 3));
  EXPECT_THROW(online_ground_truth(UniformPolicy{}, toy, 0, 3), ValidationError);
}

TEST(Ope, ExpandRecords) {
  IntentOntology o({{"t", "t"}}, {{"i", "t", "i"}},
                   {{"a", "t", "i", "a"}, {"b", "t", "i", "b"}, {"c", "t", "i", "c"}, {"d", "t", "i", "d"}});
  InteractionRecord r1;
  r1.session_id = "s";
  r1.step = 1;
  r1.topic = "t";
  r1.intent = "i";
  r1.context_scheme = "method1";
  r1.context_slots = {"a"};
  r1.shown = {"b", "c"};
  r1.propensities = {1.0 / 3.0, 0.5};
  r1.selected = {"c"};
  InteractionRecord r2 = r1;
  r2.step = 2;
  r2.context_slots = {"a", "c"};
  r2.shown = {"d"};
  r2.propensities = {};
  r2.selected = {};
  const std::vector<InteractionRecord> recs{r1, r2};
  const auto ex = expand_records(recs, ContextScheme::method1, o, nullptr, nullptr);
  ASSERT_EQ(ex.decisions.size(), 3u);
  EXPECT_TRUE(ex.assumed_uniform);
  EXPECT_EQ(ex.decisions[0].eligible, (std::vector<std::string>{"b", "c", "d"}));
  EXPECT_EQ(ex.decisions[0].reward, 0.0);
  EXPECT_EQ(ex.decisions[1].eligible, (std::vector<std::string>{"c", "d"}));
  EXPECT_EQ(ex.decisions[1].reward, 1.0);
  EXPECT_EQ(ex.decisions[2].eligible, (std::vector<std::string>{"d"}));
  EXPECT_DOUBLE_EQ(ex.decisions[2].propensity, 1.0);
  EXPECT_EQ(ex.decisions[0].context.values, (std::vector<double>{1, 0, 0, 0}));
}

TEST(Ope, ReportJson) {
  const std::vector<LoggedDecision> logs{decision("a", 1, 0.5), decision("b", 0, 0.5)};
  const auto rep = evaluate_policy("fixed", logs, Fixed("a"));
  const auto j = rep.to_json();
  EXPECT_EQ(j["policy"], "fixed");
  EXPECT_EQ(j["rs"], 1.0);
  EXPECT_EQ(j["acceptance"], 1);
  EXPECT_EQ(j["cap"], 10.0);
  const std::vector<LoggedDecision> skewed{decision("a", 1, 0.9), decision("b", 0, 0.1)};
  const auto bad = evaluate_policy("b", skewed, Fixed("a"));
  EXPECT_FALSE(bad.rs.has_value());
  EXPECT_FALSE(bad.rs_error.empty());
}
