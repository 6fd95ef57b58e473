#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "intentloop/errors.hpp"
#include "intentloop/session.hpp"
#include "test_support.hpp"

using namespace intentloop;
using testing_support::kHike;
using testing_support::TempDir;

namespace {

std::vector<std::string> many_slots(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("slot" + std::to_string(i));
  return v;
}

struct Rig {
  explicit Rig(IntentOntology o, EngineConfig cfg = {}) : embedding(16, 3) {
    cfg.session_id_seed = 1;
    engine = std::make_unique<Engine>(std::move(o), cfg, EngineProviders{&embedding});
    engine->set_clock([this] { return std::chrono::system_clock::time_point{} + std::chrono::seconds(tick++); });
  }
  HashEmbeddingProvider embedding;
  std::unique_ptr<Engine> engine;
  long tick = 1620518400;
};

SemanticFrame hike_frame(std::vector<std::string> mentioned) {
  SemanticFrame f;
  f.topic_id = "activity";
  f.intent_id = "hike";
  for (auto& m : mentioned) f.mentioned_slots.push_back({m, std::nullopt});
  return f;
}

}  // namespace

TEST(Session, StartRefiningWithSuggestions) {
  Rig rig(testing_support::small_ontology(many_slots(8)));
  auto s = rig.engine->start_session({"hike with slot1"});
  EXPECT_EQ(s.state, SessionState::refining);
  EXPECT_EQ(s.frame.intent_id, "hike");
  EXPECT_EQ(s.last_shown.size(), 3u);
  EXPECT_EQ(s.last_propensities.size(), 3u);
  for (const auto& x : s.last_shown) EXPECT_NE(x, "slot1");
  EXPECT_EQ(s.step, 0);
}

TEST(Session, ToddlerHikeRequestRefines) {
  const auto dir = testing_support::data_dir();
  auto o = load_ontology(dir / "ontology.json");
  HashEmbeddingProvider emb(HashEmbeddingProvider::kDefaultDim);
  auto completions = FixtureCompletionProvider::load(dir / "completions.json");
  EngineProviders prov{&emb, &completions};
  prov.few_shot = load_few_shot_examples(dir / "few_shot.json");
  Engine engine(o, {}, prov);
  engine.profile() = load_profile(dir / "profile.json", engine.ontology());
  auto s = engine.start_session(
      {"Find hiking trails around San Francisco from May 9th to May 29th, 2021 that are accessible with toddlers "
       "and have beautiful scenery"});
  EXPECT_EQ(s.state, SessionState::refining);
  EXPECT_FALSE(s.last_shown.empty());
}

TEST(Session, SingleSlotIntentIsReadyImmediately) {
  IntentOntology o({{"service", "service"}}, {{"locksmith", "service", "locksmith"}},
                   {{"lockout", "service", "locksmith", "lockout"}});
  Rig rig(o);
  auto s = rig.engine->start_session({"locksmith for a lockout"});
  EXPECT_DOUBLE_EQ(s.ics(), 1.0);
  EXPECT_EQ(s.state, SessionState::ready);
  EXPECT_EQ(s.step, 0);
  EXPECT_TRUE(s.last_shown.empty());
}

TEST(Session, EmptyRequestRejected) {
  Rig rig(testing_support::small_ontology());
  EXPECT_THROW(rig.engine->start_session({"  "}), ValidationError);
}

TEST(Session, SelectionAddsProbability) {
  // P = {a:0.3, b:0.4, c:0.3}
  Rig rig(testing_support::small_ontology({"a", "b", "c"}));
  auto& p = rig.engine->profile();
  p.set_count(kHike, "a", 3);
  p.set_count(kHike, "b", 4);
  p.set_count(kHike, "c", 3);
  rig.engine->set_suggestion_override([](const Session&, std::span<const std::string> el, std::size_t) {
    return Slate{{el.begin(), el.end()}, std::vector<double>(el.size(), 1.0)};
  });
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({"a"}));
  ASSERT_EQ(s.state, SessionState::refining);
  EXPECT_NEAR(s.ics(), 0.3, 1e-12);
  rig.engine->apply_feedback(s, std::vector<std::string>{"b"}, {});
  EXPECT_NEAR(s.ics(), 0.7, 1e-12);
  EXPECT_EQ(s.state, SessionState::ready);
}

TEST(Session, RejectAllKeepsIcsAndExcludesRejected) {
  Rig rig(testing_support::small_ontology(many_slots(12)));
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({"slot0"}));
  const double before = s.ics();
  const auto shown = s.last_shown;
  rig.engine->apply_feedback(s, {}, shown);
  EXPECT_EQ(s.ics(), before);
  EXPECT_EQ(s.step, 1);
  ASSERT_EQ(s.state, SessionState::refining);
  for (const auto& x : s.last_shown) EXPECT_EQ(std::find(shown.begin(), shown.end(), x), shown.end());
}

TEST(Session, FeedbackAfterStepCapIsStateError) {
  EngineConfig cfg;
  cfg.max_steps = 2;
  Rig rig(testing_support::small_ontology(many_slots(20)), cfg);
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({}));
  rig.engine->apply_feedback(s, {}, s.last_shown);
  rig.engine->apply_feedback(s, {}, s.last_shown);
  EXPECT_EQ(s.step, 2);
  EXPECT_EQ(s.state, SessionState::ready);
  EXPECT_THROW(rig.engine->apply_feedback(s, {}, {}), StateError);
}

TEST(Session, FeedbackMustReferToShownSlots) {
  Rig rig(testing_support::small_ontology(many_slots(10)));
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({}));
  std::string other;
  for (const auto& id : many_slots(10))
    if (std::find(s.last_shown.begin(), s.last_shown.end(), id) == s.last_shown.end()) other = id;
  EXPECT_THROW(rig.engine->apply_feedback(s, std::vector<std::string>{other}, {}), ValidationError);
  const std::vector<std::string> twice{s.last_shown[0]};
  EXPECT_THROW(rig.engine->apply_feedback(s, twice, twice), ValidationError);
}

TEST(Session, IdleSessionsAreAbandoned) {
  EngineConfig cfg;
  cfg.idle_ttl = std::chrono::seconds(10);
  Rig rig(testing_support::small_ontology(many_slots(10)), cfg);
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({}));
  EXPECT_FALSE(rig.engine->abandon_if_idle(s));
  rig.tick += 100;
  EXPECT_TRUE(rig.engine->abandon_if_idle(s));
  EXPECT_EQ(s.state, SessionState::abandoned);
  EXPECT_THROW(rig.engine->apply_feedback(s, {}, {}), StateError);
}

TEST(Session, RetrieveUsesSubqueries) {
  Rig rig(testing_support::small_ontology({"parking"}));
  FixtureSearchProvider search;
  search.add("hike with parking in Boston", {{"Blue Hills", "https://x/1", "big parking lot"},
                                             {"Dry Creek", "https://x/2", "no amenities"}});
  EngineConfig cfg;
  cfg.session_id_seed = 1;
  EngineProviders prov{&rig.embedding};
  prov.search = &search;
  Engine engine(testing_support::small_ontology({"parking"}), cfg, prov);
  ComplexRequest req{"hike with parking"};
  req.location = "Boston";
  auto s = engine.start_session(req);
  ASSERT_EQ(s.state, SessionState::ready);
  const auto res = engine.retrieve(s);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].document.url, "https://x/1");
  EXPECT_EQ(s.state, SessionState::retrieved);
  EXPECT_THROW(engine.retrieve(s), StateError);
}

TEST(Session, JsonRoundTrip) {
  Rig rig(testing_support::small_ontology(many_slots(10)));
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({"slot2"}));
  rig.engine->apply_feedback(s, std::vector<std::string>{s.last_shown[0]}, {});
  const auto back = session_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_EQ(back.log, s.log);
}

TEST(Session, ExportLog) {
  TempDir dir;
  export_log({}, dir / "empty.jsonl");
  EXPECT_TRUE(read_text_file(dir / "empty.jsonl").empty());

  EngineConfig cfg;
  cfg.max_steps = 3;
  Rig rig(testing_support::small_ontology(many_slots(20)), cfg);
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({}));
  for (int i = 0; i < 3; ++i) rig.engine->apply_feedback(s, {}, s.last_shown);
  std::vector<Session> all{s};
  export_log(all, dir / "s.jsonl");
  const auto back = read_jsonl_file(dir / "s.jsonl");
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back, s.log);
}

TEST(Session, LogDirectoryLayout) {
  TempDir dir;
  EngineConfig cfg;
  cfg.log_dir = dir.path();
  Rig rig(testing_support::small_ontology(many_slots(10)), cfg);
  auto s = rig.engine->start_session_from_frame({"hike"}, hike_frame({}));
  rig.engine->apply_feedback(s, {}, s.last_shown);
  const auto path = session_log_path(dir.path(), s.id, s.created_at);
  EXPECT_EQ(path.parent_path().filename().string(), "2021-05-09");
  ASSERT_TRUE(std::filesystem::exists(path));
  EXPECT_EQ(read_jsonl_file(path), s.log);
}

// Random sessions under random feedback: every session ends within
// max_steps, ICS never drops, no slot is shown twice, and replaying the
// exported log reproduces the learned bandit state.
TEST(SessionProperty, TerminationMonotonicityReplay) {
  for (auto kind : {PolicyKind::adaptive_active_greedy, PolicyKind::epsilon_greedy, PolicyKind::bootstrapped_ts}) {
    EngineConfig cfg;
    cfg.policy.kind = kind;
    cfg.policy.seed = 3;
    Rig rig(testing_support::small_ontology(many_slots(15)), cfg);
    std::mt19937_64 rng(77);
    std::vector<InteractionRecord> logs;
    for (int n = 0; n < 200; ++n) {
      std::vector<std::string> mentioned;
      for (const auto& id : many_slots(15))
        if (rng() % 6 == 0) mentioned.push_back(id);
      auto s = rig.engine->start_session_from_frame({"hike request " + std::to_string(n)}, hike_frame(mentioned));
      double prev = s.ics();
      std::set<std::string> seen;
      int guard = 0;
      while (s.state == SessionState::refining) {
        ASSERT_LT(++guard, 100);
        for (const auto& x : s.last_shown) ASSERT_TRUE(seen.insert(x).second) << x;
        for (const auto& x : s.last_shown)
          ASSERT_EQ(std::find(mentioned.begin(), mentioned.end(), x), mentioned.end());
        std::vector<std::string> sel, rej;
        for (const auto& x : s.last_shown) (rng() % 4 == 0 ? sel : rej).push_back(x);
        rig.engine->apply_feedback(s, sel, rej);
        ASSERT_GE(s.ics(), prev);
        prev = s.ics();
      }
      ASSERT_LE(s.step, s.max_steps);
      logs.insert(logs.end(), s.log.begin(), s.log.end());
    }
    BanditRegistry fresh(rig.engine->ontology(), cfg.scheme, cfg.policy, 16);
    replay_log(logs, fresh, rig.engine->ontology(), &rig.embedding, nullptr);
    EXPECT_EQ(fresh.learned_state(), rig.engine->registry().learned_state()) << to_string(kind);
  }
}
