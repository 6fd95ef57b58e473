#include "intentloop/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

namespace {

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& value = require(obj, key, where);
  if (!value.is_string()) throw ParseError(where + "." + key + ": expected string");
  return value.get<std::string>();
}

}  // namespace

IntentOntology::IntentOntology(std::vector<Topic> topics, std::vector<Intent> intents,
                               std::vector<Slot> slots, std::uint64_t version)
    : topics_(std::move(topics)),
      intents_(std::move(intents)),
      slots_(std::move(slots)),
      version_(version) {
  build_index();
}

void IntentOntology::build_index() {
  for (std::size_t i = 0; i < topics_.size(); ++i) {
    const auto& topic = topics_[i];
    if (topic.id.empty()) throw ValidationError("topic with empty id");
    if (!topic_index_.emplace(topic.id, i).second) {
      throw ValidationError("duplicate topic id '" + topic.id + "'");
    }
  }
  for (std::size_t i = 0; i < intents_.size(); ++i) {
    const auto& intent = intents_[i];
    if (intent.id.empty()) throw ValidationError("intent with empty id");
    if (!topic_index_.contains(intent.topic_id)) {
      throw ReferenceError("intent '" + intent.id + "' references unknown topic '" + intent.topic_id + "'");
    }
    IntentKey key{intent.topic_id, intent.id};
    if (!intent_index_.emplace(key, i).second) {
      throw ValidationError("duplicate intent '" + key.str() + "'");
    }
    slots_by_intent_[key];
  }
  std::map<IntentKey, std::set<std::string>> labels;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& slot = slots_[i];
    if (slot.id.empty()) throw ValidationError("slot with empty id");
    IntentKey key{slot.topic_id, slot.intent_id};
    if (!intent_index_.contains(key)) {
      throw ReferenceError("slot '" + slot.id + "' references unknown intent '" + key.str() + "'");
    }
    const std::string canonical = to_lower(trim(slot.label));
    if (canonical.empty()) throw ValidationError("slot '" + slot.id + "' has an empty label");
    if (!labels[key].insert(canonical).second) {
      throw ValidationError("duplicate slot label '" + slot.label + "' under '" + key.str() + "'");
    }
    if (!slot_index_.emplace(slot.id, i).second) {
      throw ValidationError("duplicate slot id '" + slot.id + "'");
    }
    slots_by_intent_[key].push_back(slot.id);
  }
}

const Topic* IntentOntology::find_topic(std::string_view id) const {
  auto it = topic_index_.find(std::string(id));
  return it == topic_index_.end() ? nullptr : &topics_[it->second];
}

const Intent* IntentOntology::find_intent(const IntentKey& key) const {
  auto it = intent_index_.find(key);
  return it == intent_index_.end() ? nullptr : &intents_[it->second];
}

const Slot* IntentOntology::find_slot(std::string_view id) const {
  auto it = slot_index_.find(std::string(id));
  return it == slot_index_.end() ? nullptr : &slots_[it->second];
}

const Intent& IntentOntology::intent(const IntentKey& key) const {
  const Intent* found = find_intent(key);
  if (found == nullptr) throw ReferenceError("unknown intent '" + key.str() + "'");
  return *found;
}

const Slot& IntentOntology::slot(std::string_view id) const {
  const Slot* found = find_slot(id);
  if (found == nullptr) throw ReferenceError("unknown slot '" + std::string(id) + "'");
  return *found;
}

std::vector<IntentKey> IntentOntology::intent_keys() const {
  std::vector<IntentKey> keys;
  keys.reserve(intents_.size());
  for (const auto& intent : intents_) keys.push_back({intent.topic_id, intent.id});
  return keys;
}

const std::vector<std::string>& IntentOntology::slot_ids(const IntentKey& key) const {
  auto it = slots_by_intent_.find(key);
  if (it == slots_by_intent_.end()) throw ReferenceError("unknown intent '" + key.str() + "'");
  return it->second;
}

IntentOntology IntentOntology::with_slot(Slot slot) const {
  auto slots = slots_;
  slots.push_back(std::move(slot));
  return IntentOntology(topics_, intents_, std::move(slots), version_ + 1);
}

bool IntentOntology::operator==(const IntentOntology& other) const {
  return topics_ == other.topics_ && intents_ == other.intents_ && slots_ == other.slots_;
}

nlohmann::ordered_json to_json(const IntentOntology& ontology) {
  nlohmann::ordered_json doc;
  doc["version"] = ontology.version();
  auto& topics = doc["topics"] = nlohmann::ordered_json::array();
  for (const auto& t : ontology.topics()) topics.push_back({{"id", t.id}, {"label", t.label}});
  auto& intents = doc["intents"] = nlohmann::ordered_json::array();
  for (const auto& i : ontology.intents()) {
    intents.push_back({{"id", i.id}, {"topic", i.topic_id}, {"label", i.label}});
  }
  auto& slots = doc["slots"] = nlohmann::ordered_json::array();
  for (const auto& s : ontology.slots()) {
    slots.push_back({{"id", s.id},
                     {"topic", s.topic_id},
                     {"intent", s.intent_id},
                     {"label", s.label},
                     {"curated", s.curated}});
  }
  return doc;
}

IntentOntology ontology_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("ontology: expected a JSON object");
  std::vector<Topic> topics;
  std::vector<Intent> intents;
  std::vector<Slot> slots;
  auto array_of = [&](const char* key) -> const nlohmann::json& {
    static const nlohmann::json kEmpty = nlohmann::json::array();
    if (!doc.contains(key)) return kEmpty;
    const auto& value = doc.at(key);
    if (!value.is_array()) throw ParseError(std::string("ontology.") + key + ": expected array");
    return value;
  };
  const auto& topic_arr = array_of("topics");
  for (std::size_t i = 0; i < topic_arr.size(); ++i) {
    const std::string where = "topics[" + std::to_string(i) + "]";
    const auto& t = topic_arr[i];
    topics.push_back({require_string(t, "id", where),
                      t.contains("label") ? require_string(t, "label", where) : require_string(t, "id", where)});
  }
  const auto& intent_arr = array_of("intents");
  for (std::size_t i = 0; i < intent_arr.size(); ++i) {
    const std::string where = "intents[" + std::to_string(i) + "]";
    const auto& it = intent_arr[i];
    intents.push_back({require_string(it, "id", where), require_string(it, "topic", where),
                       it.contains("label") ? require_string(it, "label", where) : require_string(it, "id", where)});
  }
  const auto& slot_arr = array_of("slots");
  for (std::size_t i = 0; i < slot_arr.size(); ++i) {
    const std::string where = "slots[" + std::to_string(i) + "]";
    const auto& s = slot_arr[i];
    Slot slot{require_string(s, "id", where), require_string(s, "topic", where),
              require_string(s, "intent", where), require_string(s, "label", where), false};
    if (s.contains("curated")) {
      if (!s.at("curated").is_boolean()) throw ParseError(where + ".curated: expected boolean");
      slot.curated = s.at("curated").get<bool>();
    }
    slots.push_back(std::move(slot));
  }
  std::uint64_t version = 1;
  if (doc.contains("version") && doc.at("version").is_number_unsigned()) {
    version = doc.at("version").get<std::uint64_t>();
  }
  return IntentOntology(std::move(topics), std::move(intents), std::move(slots), version);
}

nlohmann::json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what(), line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

IntentOntology load_ontology(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return ontology_from_json(parse_json_text(text, path.string()));
}

void save_ontology(const IntentOntology& ontology, const std::filesystem::path& path) {
  write_text_file(path, to_json(ontology).dump(2) + "\n");
}

}  // namespace intentloop
