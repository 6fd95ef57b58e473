#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "intentloop/errors.hpp"
#include "intentloop/simulator.hpp"
#include "test_support.hpp"

using namespace intentloop;

namespace {

SimConfig small_config(std::uint64_t seed = 7) {
  SimConfig c;
  c.seed = seed;
  c.n_intents = 4;
  c.n_slots_per_intent = 8;
  c.n_requests = 60;
  return c;
}

std::string log_text(const SimulationResult& r) {
  std::ostringstream out;
  write_jsonl(out, r.logs);
  return out.str();
}

}  // namespace

TEST(Simulator, OntologyShapeAndDeterminism) {
  SimConfig c;
  const auto o = generate_ontology(c);
  EXPECT_EQ(o.intents().size(), 14u);
  for (const auto& k : o.intent_keys()) EXPECT_EQ(o.slot_ids(k).size(), 20u);
  EXPECT_EQ(o.topics().size(), 2u);
  EXPECT_EQ(generate_ontology(c), o);
  c.seed = 8;
  EXPECT_NE(generate_ontology(c), o);
}

TEST(Simulator, CoupledPreferencesHandComputed) {
  // prefs (0.5, 0.3, 0.2); a boosts c with affinity 1, strength ln 2
  std::vector<std::vector<double>> aff{{0, 0, 1}, {0, 0, 0}, {0, 0, 0}};
  SyntheticUser u({"a", "b", "c"}, {0.5, 0.3, 0.2}, aff, std::log(2.0), 0.1);
  const std::vector<std::string> active{"a"};
  const auto w = u.coupled(active);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[1], 0.3 / 0.7, 1e-12);
  EXPECT_NEAR(w[2], 0.4 / 0.7, 1e-12);
  EXPECT_NEAR(u.selection_probability("c", active), 0.9 * 0.4 / 0.7 + 0.05, 1e-12);
  EXPECT_EQ(u.partners("a"), (std::vector<std::string>{"c"}));
  EXPECT_THROW(u.selection_probability("zz", active), ReferenceError);
  const auto none = u.coupled({});
  EXPECT_NEAR(none[0], 0.5, 1e-12);
}

TEST(Simulator, ZeroCouplingIgnoresContext) {
  SimConfig c = small_config();
  c.coupling_strength = 0.0;
  std::mt19937_64 rng(1);
  std::vector<std::string> slots{"a", "b", "c", "d", "e"};
  const auto u = SyntheticUser::sample(slots, c, rng);
  const std::vector<std::string> act{"a"};
  const auto w = u.coupled(act);
  const double rest = 1.0 - u.preferences()[0];
  for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(w[i], u.preferences()[i] / rest, 1e-12);
  double sum = std::accumulate(u.preferences().begin(), u.preferences().end(), 0.0);
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Simulator, MentionsAreDistinctAndInRange) {
  Simulator sim(small_config());
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto r = sim.draw_request(rng);
    const auto ids = r.frame.mentioned_ids();
    EXPECT_GE(ids.size(), 1u);
    EXPECT_LE(ids.size(), 6u);
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), ids.size());
    EXPECT_FALSE(r.request.text.empty());
    ASSERT_TRUE(r.frame.location.has_value());
    EXPECT_NE(r.request.text.find(*r.frame.location), std::string::npos);
  }
}

TEST(Simulator, RunIsDeterministic) {
  const auto a = simulate_sessions(small_config(), PolicyKind::adaptive_active_greedy, ContextScheme::method1);
  const auto b = simulate_sessions(small_config(), PolicyKind::adaptive_active_greedy, ContextScheme::method1);
  EXPECT_EQ(log_text(a), log_text(b));
  EXPECT_FALSE(a.logs.empty());
  const auto c = simulate_sessions(small_config(8), PolicyKind::adaptive_active_greedy, ContextScheme::method1);
  EXPECT_NE(log_text(a), log_text(c));
}

TEST(Simulator, InteractionBudget) {
  SimConfig c = small_config();
  c.max_interactions = 150;
  const auto r = simulate_sessions(c, PolicyKind::epsilon_greedy, ContextScheme::method1, false);
  EXPECT_EQ(r.step_rewards.size(), 150u);
  EXPECT_TRUE(r.sessions.empty());
}

TEST(Simulator, SessionsAreWellFormed) {
  const auto r = simulate_sessions(small_config(), PolicyKind::softmax_explorer, ContextScheme::method2);
  for (const auto& s : r.sessions) {
    EXPECT_LE(s.step, s.max_steps);
    EXPECT_NE(s.state, SessionState::refining);
    std::set<std::string> seen;
    for (const auto& rec : s.log) {
      for (const auto& x : rec.shown) EXPECT_TRUE(seen.insert(x).second);
      EXPECT_EQ(rec.propensities.size(), rec.shown.size());
      EXPECT_GE(rec.ics_after, rec.ics_before);
    }
  }
  for (double x : r.step_rewards) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(Simulator, OracleIsBestInExpectation) {
  Simulator sim(small_config());
  SimulatorEnvironment env(sim, ContextScheme::method1);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto d = env.draw(rng);
    double best = 0;
    for (const auto& a : d.eligible) best = std::max(best, env.expected_reward(d, a));
    for (const auto& a : d.eligible) EXPECT_LE(env.expected_reward(d, a), best);
  }
  EXPECT_THROW(SimulatorEnvironment(sim, ContextScheme::method3), ValidationError);
}

TEST(Simulator, OracleOverrideBeatsRandomOnExpectedReward) {
  SimConfig c = small_config();
  c.n_requests = 200;
  Simulator sim(c);
  auto oracle_engine = sim.make_engine(PolicyKind::uniform_random, ContextScheme::method1);
  oracle_engine->set_suggestion_override(sim.oracle());
  auto random_engine = sim.make_engine(PolicyKind::uniform_random, ContextScheme::method1);
  EXPECT_GT(sim.run(*oracle_engine, false).mean_reward(), sim.run(*random_engine, false).mean_reward());
}

TEST(Simulator, RefinedPairs) {
  const auto r = simulate_sessions(small_config(), PolicyKind::adaptive_active_greedy, ContextScheme::method1);
  Simulator sim(small_config());
  const auto pairs = refine_request_corpus(r.sessions, sim.ontology());
  ASSERT_EQ(pairs.size(), r.sessions.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(pairs[i].refined.rfind(pairs[i].original, 0), 0u);
    EXPECT_EQ(pairs[i].selections, r.sessions[i].selected.size());
    EXPECT_EQ(pairs[i].breadth, classify_breadth(r.sessions[i].frame));
  }
}

TEST(Simulator, SyntheticSearch) {
  Simulator sim(small_config());
  SyntheticSearchProvider p(sim);
  const auto key = sim.ontology().intent_keys().front();
  const auto& slot = sim.ontology().slot(sim.ontology().slot_ids(key).front());
  const auto q = corpus_query(sim.ontology().intent(key).label, "Austin", slot.label);
  const auto docs = p.search(q, 5);
  ASSERT_EQ(docs.size(), 5u);
  EXPECT_EQ(docs, p.search(q, 5));
  for (const auto& d : docs) {
    EXPECT_NE(d.title.find(slot.label), std::string::npos);
    EXPECT_FALSE(d.url.empty());
  }
  EXPECT_TRUE(p.search("nothing like a query", 5).empty());
}

TEST(Simulator, ConfigJson) {
  SimConfig c = small_config();
  c.coupling_strength = 1.5;
  const auto back = SimConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  testing_support::TempDir dir;
  write_text_file(dir / "s.json", R"({"coupling_strength": 0.0, "n_requests": 5})");
  const auto loaded = load_sim_config(dir / "s.json");
  EXPECT_EQ(loaded.coupling_strength, 0.0);
  EXPECT_EQ(loaded.n_requests, 5u);
  EXPECT_EQ(loaded.n_intents, 14u);
  const auto shipped = load_sim_config(testing_support::data_dir() / "simulation.json");
  EXPECT_EQ(shipped.coupling_strength, kHighCoupling);
}
