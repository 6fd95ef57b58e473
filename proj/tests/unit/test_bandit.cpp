#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <random>
#include <set>

#include "../oracle/ridge_oracle.hpp"
#include "intentloop/bandit.hpp"
#include "intentloop/errors.hpp"
#include "test_support.hpp"

using namespace intentloop;
using testing_support::kHike;

namespace {

ContextVector ctx(std::vector<double> v) { return {std::move(v), ContextScheme::method1, 0}; }

BanditModel make(PolicyKind kind, std::vector<std::string> arms, std::size_t dim, std::uint64_t seed = 1,
                 PolicyConfig cfg = {}) {
  cfg.kind = kind;
  cfg.seed = seed;
  return BanditModel(kHike, std::move(arms), ContextScheme::method1, dim, cfg);
}

const std::vector<std::string> kAB{"a", "b"};

}  // namespace

TEST(Ridge, MatchesNormalEquations) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> w(0.2, 3.0);
  const std::size_t d = 5;
  for (double lambda : {0.5, 1.0, 4.0}) {
    RidgeArm arm(d, lambda);
    std::vector<ridge_oracle::Obs> obs;
    for (int n = 0; n < 200; ++n) {
      std::vector<double> x(d);
      for (auto& v : x) v = g(rng);
      const double r = 0.3 * x[0] - 0.7 * x[3] + 0.1 + 0.05 * g(rng);
      const double wt = n % 3 == 0 ? w(rng) : 1.0;
      arm.update(x, r, wt);
      obs.push_back({x, r, wt});
    }
    const auto theta = ridge_oracle::fit(obs, d, lambda);
    ASSERT_EQ(arm.weights().size(), theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_NEAR(arm.weights()[i], theta[i], 1e-9);
    std::vector<double> probe{0.5, -1, 0, 2, 1};
    double expect = theta[d];
    for (std::size_t i = 0; i < d; ++i) expect += theta[i] * probe[i];
    EXPECT_NEAR(arm.predict(probe), expect, 1e-9);
  }
}

TEST(Ridge, ZeroWeightIsNoOpAndJsonRoundTrip) {
  RidgeArm arm(2, 1.0);
  const std::vector<double> x{1, 2};
  arm.update(x, 1.0, 0.0);
  EXPECT_EQ(arm, RidgeArm(2, 1.0));
  arm.update(x, 1.0);
  EXPECT_EQ(RidgeArm::from_json(arm.to_json()), arm);
}

TEST(Bandit, SingleEligibleArm) {
  for (auto kind : all_policy_kinds()) {
    auto m = make(kind, {"a", "b", "c"}, 3);
    const std::vector<std::string> only{"b"};
    const auto s = m.suggest(ctx({1, 0, 0}), only, 3);
    ASSERT_EQ(s.arms, only) << to_string(kind);
    EXPECT_DOUBLE_EQ(s.propensities[0], 1.0);
  }
}

TEST(Bandit, EpsilonOneIsUniform) {
  PolicyConfig cfg;
  cfg.epsilon = 1.0;
  cfg.epsilon_decay = 1.0;
  auto m = make(PolicyKind::epsilon_greedy, kAB, 2, 5, cfg);
  int a = 0;
  for (int i = 0; i < 10000; ++i)
    if (m.suggest(ctx({0, 1}), kAB, 1).arms[0] == "a") ++a;
  EXPECT_GE(a / 10000.0, 0.48);
  EXPECT_LE(a / 10000.0, 0.52);
}

TEST(Bandit, AdaptiveGreedyFindsRewardedArm) {
  auto m = make(PolicyKind::adaptive_greedy, kAB, 2, 3);
  const std::vector<std::string> sel{"a"};
  for (int i = 0; i < 1000; ++i) m.update(ctx({1, 0}), kAB, sel, kAB);
  int first = 0;
  for (int i = 0; i < 100; ++i)
    if (m.suggest(ctx({1, 0}), kAB, 2).arms[0] == "a") ++first;
  EXPECT_GE(first, 95);
}

TEST(Bandit, UpdateCountsPerShownArm) {
  auto m = make(PolicyKind::epsilon_greedy, {"a", "b", "c"}, 1);
  const std::vector<std::string> a{"a"}, ab{"a", "b"};
  m.update(ctx({1}), a, a);
  EXPECT_EQ(m.arm_stats("a"), (ArmStats{1, 1}));
  m.update(ctx({1}), ab, {});
  EXPECT_EQ(m.arm_stats("a"), (ArmStats{2, 1}));
  EXPECT_EQ(m.arm_stats("b"), (ArmStats{1, 0}));
  EXPECT_EQ(m.arm_stats("c"), (ArmStats{0, 0}));
  EXPECT_EQ(m.updates(), 2u);
  const std::vector<std::string> bad{"zz"};
  EXPECT_THROW(m.update(ctx({1}), bad, {}), ValidationError);
  EXPECT_THROW(m.update(ctx({1}), a, ab), ValidationError);
  EXPECT_THROW(m.update(ctx({1, 2}), a, {}), ValidationError);
}

TEST(Bandit, ReplaySameStreamSameState) {
  for (auto kind : all_policy_kinds()) {
    auto m1 = make(kind, {"a", "b", "c", "d"}, 3, 42);
    auto m2 = make(kind, {"a", "b", "c", "d"}, 3, 42);
    std::mt19937_64 rng(1);
    const std::vector<std::string> all{"a", "b", "c", "d"};
    for (int i = 0; i < 300; ++i) {
      std::vector<double> x{double(rng() % 2), double(rng() % 2), double(rng() % 2)};
      const auto s1 = m1.suggest(ctx(x), all, 2);
      const auto s2 = m2.suggest(ctx(x), all, 2);
      ASSERT_EQ(s1.arms, s2.arms);
      ASSERT_EQ(s1.propensities, s2.propensities);
      std::vector<std::string> sel;
      if (rng() % 3 == 0) sel.push_back(s1.arms[0]);
      m1.update(ctx(x), s1.arms, sel, all);
      m2.update(ctx(x), s2.arms, sel, all);
    }
    EXPECT_EQ(m1.learned_state(), m2.learned_state()) << to_string(kind);
    EXPECT_EQ(m1.checkpoint(), m2.checkpoint()) << to_string(kind);
  }
}

TEST(Bandit, CheckpointRestoresTrajectory) {
  auto m = make(PolicyKind::bootstrapped_ucb, {"a", "b", "c"}, 2, 9);
  const std::vector<std::string> all{"a", "b", "c"};
  for (int i = 0; i < 50; ++i) {
    const auto s = m.suggest(ctx({1, double(i % 2)}), all, 2);
    m.update(ctx({1, double(i % 2)}), s.arms, std::vector<std::string>{s.arms[1]}, all);
  }
  auto restored = BanditModel::from_checkpoint(m.checkpoint());
  for (int i = 0; i < 20; ++i) {
    const auto a = m.suggest(ctx({0, 1}), all, 3);
    const auto b = restored.suggest(ctx({0, 1}), all, 3);
    ASSERT_EQ(a.arms, b.arms);
  }
  EXPECT_THROW(BanditModel::from_checkpoint(nlohmann::json{{"format", "nope"}}), Error);
}

TEST(Bandit, SuggestStaysWithinEligible) {
  for (auto kind : all_policy_kinds()) {
    auto m = make(kind, {"a", "b", "c", "d", "e"}, 2, 8);
    const std::vector<std::string> el{"b", "d", "e"};
    for (int i = 0; i < 50; ++i) {
      const auto s = m.suggest(ctx({1, 0}), el, 3);
      ASSERT_EQ(s.arms.size(), 3u);
      for (const auto& a : s.arms) ASSERT_NE(std::find(el.begin(), el.end(), a), el.end());
      ASSERT_EQ(std::set<std::string>(s.arms.begin(), s.arms.end()).size(), 3u);
      m.update(ctx({1, 0}), s.arms, std::vector<std::string>{s.arms[0]}, el);
    }
  }
}

TEST(Bandit, ProbabilitiesSumToOne) {
  for (auto kind : all_policy_kinds()) {
    auto m = make(kind, {"a", "b", "c"}, 2, 4);
    const std::vector<std::string> all{"a", "b", "c"};
    for (int i = 0; i < 30; ++i) m.update(ctx({1, 0}), std::vector<std::string>{"b"}, std::vector<std::string>{"b"}, all);
    double sum = 0;
    for (const auto& [arm, p] : m.action_probabilities(ctx({1, 0}), all)) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12) << to_string(kind);
  }
}

// Greedy choice follows the score argmax, which positive scaling preserves.
TEST(BanditProperty, GreedyFollowsArgmaxUnderScaling) {
  PolicyConfig cfg;
  cfg.epsilon = 0.0;
  auto m = make(PolicyKind::epsilon_greedy, {"a", "b", "c", "d"}, 3, 2, cfg);
  const std::vector<std::string> all{"a", "b", "c", "d"};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x{double(rng() % 2), double(rng() % 2), 1};
    const auto& arm = all[rng() % 4];
    std::vector<std::string> sel;
    if ((arm == "c") == (x[0] > 0)) sel.push_back(arm);
    m.update(ctx(x), std::vector<std::string>{arm}, sel, all);
  }
  for (double scale : {0.01, 1.0, 250.0}) {
    for (const auto& x : {std::vector<double>{1, 0, 1}, std::vector<double>{0, 1, 1}}) {
      auto s = m.scores(ctx(x), all);
      for (auto& v : s) v *= scale;
      const auto best = all[static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin())];
      const auto probs = m.action_probabilities(ctx(x), all);
      EXPECT_DOUBLE_EQ(probs.at(best), 1.0);
      std::mt19937_64 r(1);
      EXPECT_EQ(m.choose(ctx(x), all, r), best);
    }
  }
}

TEST(Bandit, PopularityBaselineIgnoresContext) {
  auto m = make(PolicyKind::popularity_baseline, {"a", "b", "c"}, 2, 1);
  const std::vector<std::string> all{"a", "b", "c"};
  m.update(ctx({1, 0}), std::vector<std::string>{"c"}, std::vector<std::string>{"c"}, all);
  m.update(ctx({1, 0}), std::vector<std::string>{"b"}, std::vector<std::string>{"b"}, all);
  m.update(ctx({0, 1}), std::vector<std::string>{"c"}, std::vector<std::string>{"c"}, all);
  EXPECT_EQ(m.suggest(ctx({1, 0}), all, 3).arms, m.suggest(ctx({0, 1}), all, 3).arms);
  EXPECT_EQ(m.suggest(ctx({0, 0}), all, 1).arms[0], "c");
}

TEST(Bandit, PopularitySuggestExamples) {
  const auto o = testing_support::small_ontology({"a", "b", "c"});
  IntentProfile p(o);
  p.set_count(kHike, "a", 5);
  p.set_count(kHike, "b", 3);
  p.set_count(kHike, "c", 2);
  EXPECT_EQ(popularity_suggest(p, kHike, {}, 2), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(popularity_suggest(p, kHike, {}, 10), (std::vector<std::string>{"a", "b", "c"}));
  const std::vector<std::string> ex{"a"};
  EXPECT_EQ(popularity_suggest(p, kHike, ex, 2), (std::vector<std::string>{"b", "c"}));
  IntentProfile ties(o);
  EXPECT_EQ(popularity_suggest(ties, kHike, {}, 3), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Bandit, PolicyConfigJsonAndNames) {
  PolicyConfig c;
  c.kind = PolicyKind::softmax_explorer;
  c.softmax_temperature = 0.5;
  const auto back = PolicyConfig::from_json(c.to_json());
  EXPECT_EQ(back.kind, c.kind);
  EXPECT_EQ(back.softmax_temperature, 0.5);
  for (auto k : all_policy_kinds()) EXPECT_EQ(policy_kind_from_string(to_string(k)), k);
  EXPECT_THROW(policy_kind_from_string("nope"), ValidationError);
}

TEST(Bandit, PolicyConfigFileSections) {
  testing_support::TempDir dir;
  write_text_file(dir / "p.json", R"({"defaults": {"epsilon": 0.2}, "epsilon_greedy": {"epsilon": 0.3}})");
  EXPECT_EQ(load_policy_config(dir / "p.json", PolicyKind::epsilon_greedy).epsilon, 0.3);
  EXPECT_EQ(load_policy_config(dir / "p.json", PolicyKind::softmax_explorer).epsilon, 0.2);
}

// Stationary contextual problem: 6 arms, 4 binary features; the best arm
// depends on the context. epsilon_greedy should beat uniform by >= 20%.
TEST(BanditProperty, EpsilonGreedyBeatsUniformOn50kSteps) {
  const std::vector<std::string> arms{"a0", "a1", "a2", "a3", "a4", "a5"};
  auto pr = [](std::size_t arm, const std::vector<double>& x) {
    const std::size_t best = static_cast<std::size_t>(x[0] + 2 * x[1]);
    return arm == best ? 0.7 : (arm == 4 + static_cast<std::size_t>(x[2]) ? 0.3 : 0.1);
  };
  auto run = [&](PolicyKind kind) {
    auto m = make(kind, arms, 4, 17);
    std::mt19937_64 env(99);
    std::uniform_real_distribution<double> u(0, 1);
    double total = 0;
    for (int t = 0; t < 50000; ++t) {
      std::vector<double> x{double(env() % 2), double(env() % 2), double(env() % 2), double(env() % 2)};
      const auto s = m.suggest(ctx(x), arms, 1);
      const std::size_t a = static_cast<std::size_t>(s.arms[0][1] - '0');
      const bool hit = u(env) < pr(a, x);
      total += hit;
      m.update(ctx(x), s.arms, hit ? s.arms : std::vector<std::string>{}, arms);
    }
    return total / 50000;
  };
  const double eg = run(PolicyKind::epsilon_greedy);
  const double un = run(PolicyKind::uniform_random);
  EXPECT_GE(eg, 1.2 * un) << eg << " vs " << un;
}

TEST(Registry, LazyModelsAndCheckpoint) {
  const auto o = testing_support::small_ontology();
  BanditRegistry reg(o, ContextScheme::method1, PolicyConfig{}, 32);
  EXPECT_EQ(reg.size(), 0u);
  auto m = reg.model(kHike);
  EXPECT_EQ(reg.size(), 1u);
  EXPECT_EQ(reg.context_dim(kHike), 4u);
  EXPECT_THROW(reg.model({"x", "y"}), ReferenceError);
  m->update(ctx({1, 0, 0, 0}), std::vector<std::string>{"dogs"}, std::vector<std::string>{"dogs"});
  BanditRegistry other(o, ContextScheme::method1, PolicyConfig{}, 32);
  other.load_checkpoint(reg.checkpoint());
  EXPECT_EQ(other.learned_state(), reg.learned_state());
}
