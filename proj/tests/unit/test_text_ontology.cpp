#include <gtest/gtest.h>

#include "intentloop/errors.hpp"
#include "intentloop/ontology.hpp"
#include "intentloop/text.hpp"
#include "test_support.hpp"

using namespace intentloop;
using testing_support::kHike;
using testing_support::small_ontology;
using testing_support::TempDir;

TEST(Text, TokenizeLowercasesAndSplits) {
  EXPECT_EQ(tokenize("Find HIKING trails, near S.F.!"),
            (std::vector<std::string>{"find", "hiking", "trails", "near", "s", "f"}));
  EXPECT_TRUE(tokenize("  ,,, ").empty());
  EXPECT_EQ(tokenize("café-au-lait"), (std::vector<std::string>{"café", "au", "lait"}));
}

TEST(Text, TrimJoinLower) {
  EXPECT_EQ(trim("  a b \n"), "a b");
  EXPECT_EQ(join({"a", "b", "c"}, ", "), "a, b, c");
  EXPECT_EQ(join({}, ","), "");
  EXPECT_EQ(to_lower("AbC1"), "abc1");
}

TEST(Text, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Text, Splitmix64MatchesReference) {
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(s), 0x6e789e6aa1b965f4ULL);
}

TEST(Text, Stopwords) {
  EXPECT_TRUE(is_stopword("the"));
  EXPECT_TRUE(is_stopword("with"));
  EXPECT_FALSE(is_stopword("hike"));
}

TEST(Ontology, LookupsAndOrder) {
  const auto o = small_ontology();
  EXPECT_EQ(o.slot_ids(kHike), (std::vector<std::string>{"parking", "scenery", "dogs", "shade"}));
  EXPECT_EQ(o.slot("leak").label, "leak repair");
  EXPECT_THROW(o.slot("nope"), ReferenceError);
  EXPECT_THROW(o.intent({"activity", "nope"}), ReferenceError);
  EXPECT_EQ(o.find_topic("zzz"), nullptr);
  EXPECT_EQ(o.intent_keys().size(), 2u);
}

TEST(Ontology, RejectsBadStructure) {
  EXPECT_THROW(IntentOntology({{"t", "t"}}, {{"i", "missing", "i"}}, {}), ReferenceError);
  EXPECT_THROW(IntentOntology({{"t", "t"}, {"t", "u"}}, {}, {}), ValidationError);
  EXPECT_THROW(IntentOntology({{"t", "t"}}, {{"i", "t", "i"}}, {{"a", "t", "i", "x"}, {"b", "t", "i", "X "}}),
               ValidationError);
}

TEST(Ontology, SaveLoadRoundTrip) {
  TempDir dir;
  const auto o = small_ontology();
  save_ontology(o, dir / "o.json");
  EXPECT_EQ(load_ontology(dir / "o.json"), o);
}

TEST(Ontology, MalformedFileIsParseErrorWithLine) {
  TempDir dir;
  write_text_file(dir / "bad.json", "{\n  \"topics\": [\n  oops\n]}");
  try {
    load_ontology(dir / "bad.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text_file(dir / "schema.json", R"({"topics":[{"label":"x"}]})");
  EXPECT_THROW(load_ontology(dir / "schema.json"), ParseError);
}

TEST(Ontology, EmptyIsValid) {
  TempDir dir;
  write_text_file(dir / "e.json", "{}");
  const auto o = load_ontology(dir / "e.json");
  EXPECT_TRUE(o.empty());
  EXPECT_TRUE(o.topics().empty());
}

TEST(Ontology, WithSlotBumpsVersion) {
  const auto o = small_ontology();
  const auto o2 = o.with_slot({"mud", "activity", "hike", "mud", false});
  EXPECT_EQ(o2.version(), o.version() + 1);
  EXPECT_EQ(o2.slot_ids(kHike).size(), 5u);
  EXPECT_EQ(o.slot_ids(kHike).size(), 4u);
}

TEST(Ontology, ShippedFixtureLoads) {
  const auto o = load_ontology(testing_support::data_dir() / "ontology.json");
  EXPECT_GE(o.intents().size(), 10u);
  EXPECT_NE(o.find_intent({"activity", "hike"}), nullptr);
}
