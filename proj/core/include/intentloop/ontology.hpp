#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace intentloop {

struct Topic {
  std::string id;
  std::string label;

  bool operator==(const Topic&) const = default;
};

struct Intent {
  std::string id;
  std::string topic_id;
  std::string label;

  bool operator==(const Intent&) const = default;
};

struct Slot {
  std::string id;
  std::string topic_id;
  std::string intent_id;
  std::string label;
  bool curated = false;

  bool operator==(const Slot&) const = default;
};

// A concrete restriction on a slot as written by the user ("May 9th to May 29th").
struct AspectValue {
  std::string slot_id;
  std::string raw_span;
  std::string normalized;

  bool operator==(const AspectValue&) const = default;
};

struct IntentKey {
  std::string topic;
  std::string intent;

  auto operator<=>(const IntentKey&) const = default;
  std::string str() const { return topic + "/" + intent; }
};

/// Three-level topic -> intent -> slot graph. Immutable once built; mutation
/// goes through with_slot(), which returns a new ontology with a bumped
/// version.
class IntentOntology {
 public:
  IntentOntology() = default;
  IntentOntology(std::vector<Topic> topics, std::vector<Intent> intents, std::vector<Slot> slots,
                 std::uint64_t version = 1);

  const std::vector<Topic>& topics() const noexcept { return topics_; }
  const std::vector<Intent>& intents() const noexcept { return intents_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  std::uint64_t version() const noexcept { return version_; }
  bool empty() const noexcept { return topics_.empty(); }

  const Topic* find_topic(std::string_view id) const;
  const Intent* find_intent(const IntentKey& key) const;
  const Slot* find_slot(std::string_view id) const;

  // Throwing lookups (ReferenceError).
  const Intent& intent(const IntentKey& key) const;
  const Slot& slot(std::string_view id) const;

  std::vector<IntentKey> intent_keys() const;

  /// Slot ids of one (topic, intent) in ontology order.
  const std::vector<std::string>& slot_ids(const IntentKey& key) const;

  IntentOntology with_slot(Slot slot) const;

  bool operator==(const IntentOntology& other) const;

 private:
  void build_index();

  std::vector<Topic> topics_;
  std::vector<Intent> intents_;
  std::vector<Slot> slots_;
  std::uint64_t version_ = 1;

  std::unordered_map<std::string, std::size_t> topic_index_;
  std::map<IntentKey, std::size_t> intent_index_;
  std::unordered_map<std::string, std::size_t> slot_index_;
  std::map<IntentKey, std::vector<std::string>> slots_by_intent_;
};

nlohmann::ordered_json to_json(const IntentOntology& ontology);
IntentOntology ontology_from_json(const nlohmann::json& doc);

/// Reads the JSON ontology file (`topics`, `intents`, `slots`). Parse errors
/// carry the line number; schema errors name the offending element.
IntentOntology load_ontology(const std::filesystem::path& path);
void save_ontology(const IntentOntology& ontology, const std::filesystem::path& path);

/// Parses JSON text, rethrowing syntax errors as ParseError with a line number.
nlohmann::json parse_json_text(std::string_view text, std::string_view what);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace intentloop
