#include "intentloop/profile.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "intentloop/errors.hpp"

namespace intentloop {

double SlotDistribution::probability(std::string_view slot_id) const {
  for (std::size_t i = 0; i < slot_ids.size(); ++i) {
    if (slot_ids[i] == slot_id) return probabilities[i];
  }
  throw ReferenceError("slot '" + std::string(slot_id) + "' is not part of '" + key.str() + "'");
}

bool SlotDistribution::contains(std::string_view slot_id) const {
  return std::find(slot_ids.begin(), slot_ids.end(), slot_id) != slot_ids.end();
}

double SlotDistribution::threshold() const {
  if (probabilities.empty()) throw ReferenceError("intent '" + key.str() + "' has no slots");
  const auto [lo, hi] = std::minmax_element(probabilities.begin(), probabilities.end());
  if (*lo == *hi) return *lo;
  const double n = static_cast<double>(probabilities.size());
  const double mean = std::accumulate(probabilities.begin(), probabilities.end(), 0.0) / n;
  double sq = 0.0;
  for (const double p : probabilities) sq += (p - mean) * (p - mean);
  return mean + std::sqrt(sq / n);
}

nlohmann::json SlotDistribution::to_json() const {
  nlohmann::json doc;
  doc["topic"] = key.topic;
  doc["intent"] = key.intent;
  doc["slots"] = slot_ids;
  doc["probabilities"] = probabilities;
  doc["smoothed"] = smoothed;
  return doc;
}

SlotDistribution SlotDistribution::from_json(const nlohmann::json& doc) {
  SlotDistribution d;
  d.key = {doc.at("topic").get<std::string>(), doc.at("intent").get<std::string>()};
  d.slot_ids = doc.at("slots").get<std::vector<std::string>>();
  d.probabilities = doc.at("probabilities").get<std::vector<double>>();
  d.smoothed = doc.value("smoothed", false);
  if (d.slot_ids.size() != d.probabilities.size()) {
    throw ParseError("slot distribution: slots and probabilities differ in length");
  }
  return d;
}

IntentProfile::IntentProfile(const IntentOntology& ontology, double laplace_alpha)
    : alpha_(laplace_alpha) {
  if (!(laplace_alpha > 0.0)) throw ValidationError("Laplace alpha must be positive");
  for (const auto& key : ontology.intent_keys()) {
    auto e = std::make_unique<Entry>();
    e->slot_ids = ontology.slot_ids(key);
    for (std::size_t i = 0; i < e->slot_ids.size(); ++i) e->position.emplace(e->slot_ids[i], i);
    e->counts.assign(e->slot_ids.size(), 0);
    entries_.emplace(key, std::move(e));
  }
}

IntentProfile::Entry& IntentProfile::entry(const IntentKey& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ReferenceError("unknown intent '" + key.str() + "'");
  return *it->second;
}

const IntentProfile::Entry& IntentProfile::entry(const IntentKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ReferenceError("unknown intent '" + key.str() + "'");
  return *it->second;
}

void IntentProfile::record(const IntentKey& key, std::span<const std::string> slot_ids) {
  auto& e = entry(key);
  std::vector<std::size_t> positions;
  positions.reserve(slot_ids.size());
  for (const auto& id : slot_ids) {
    auto it = e.position.find(id);
    if (it == e.position.end()) {
      throw ReferenceError("slot '" + id + "' is not part of '" + key.str() + "'");
    }
    positions.push_back(it->second);
  }
  std::unique_lock lock(e.mutex);
  for (const auto pos : positions) ++e.counts[pos];
}

std::uint64_t IntentProfile::count(const IntentKey& key, std::string_view slot_id) const {
  const auto& e = entry(key);
  auto it = e.position.find(slot_id);
  if (it == e.position.end()) {
    throw ReferenceError("slot '" + std::string(slot_id) + "' is not part of '" + key.str() + "'");
  }
  std::shared_lock lock(e.mutex);
  return e.counts[it->second];
}

std::uint64_t IntentProfile::total(const IntentKey& key) const {
  const auto& e = entry(key);
  std::shared_lock lock(e.mutex);
  return std::accumulate(e.counts.begin(), e.counts.end(), std::uint64_t{0});
}

SlotDistribution IntentProfile::distribution(const IntentKey& key) const {
  const auto& e = entry(key);
  SlotDistribution d;
  d.key = key;
  d.slot_ids = e.slot_ids;
  std::vector<std::uint64_t> counts;
  {
    std::shared_lock lock(e.mutex);
    counts = e.counts;
  }
  const bool any_zero = std::any_of(counts.begin(), counts.end(), [](auto c) { return c == 0; });
  const double n = static_cast<double>(counts.size());
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  d.smoothed = any_zero;
  d.probabilities.reserve(counts.size());
  for (const auto c : counts) {
    d.probabilities.push_back(any_zero ? (static_cast<double>(c) + alpha_) / (total + alpha_ * n)
                                       : static_cast<double>(c) / total);
  }
  return d;
}

const std::vector<std::string>& IntentProfile::slot_ids(const IntentKey& key) const {
  return entry(key).slot_ids;
}

std::vector<IntentKey> IntentProfile::keys() const {
  std::vector<IntentKey> out;
  out.reserve(entries_.size());
  for (const auto& [key, _] : entries_) out.push_back(key);
  return out;
}

void IntentProfile::reset(const IntentKey& key) {
  auto& e = entry(key);
  std::unique_lock lock(e.mutex);
  std::fill(e.counts.begin(), e.counts.end(), 0);
}

void IntentProfile::set_count(const IntentKey& key, std::string_view slot_id, std::uint64_t count) {
  auto& e = entry(key);
  auto it = e.position.find(slot_id);
  if (it == e.position.end()) {
    throw ReferenceError("slot '" + std::string(slot_id) + "' is not part of '" + key.str() + "'");
  }
  std::unique_lock lock(e.mutex);
  e.counts[it->second] = count;
}

nlohmann::ordered_json IntentProfile::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [key, e] : entries_) {
    std::shared_lock lock(e->mutex);
    for (std::size_t i = 0; i < e->slot_ids.size(); ++i) {
      if (e->counts[i] > 0) doc[key.str() + "/" + e->slot_ids[i]] = e->counts[i];
    }
  }
  return doc;
}

void IntentProfile::load_counts(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("profile: expected a JSON object");
  for (const auto& [path, value] : doc.items()) {
    const auto first = path.find('/');
    const auto second = first == std::string::npos ? std::string::npos : path.find('/', first + 1);
    if (second == std::string::npos) {
      throw ParseError("profile: key '" + path + "' is not '<topic>/<intent>/<slot>'");
    }
    if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0)) {
      throw ParseError("profile: count for '" + path + "' must be a non-negative integer");
    }
    set_count({path.substr(0, first), path.substr(first + 1, second - first - 1)}, path.substr(second + 1),
              value.get<std::uint64_t>());
  }
}

IntentProfile load_profile(const std::filesystem::path& path, const IntentOntology& ontology) {
  IntentProfile profile(ontology);
  profile.load_counts(parse_json_text(read_text_file(path), path.string()));
  return profile;
}

void save_profile(const IntentProfile& profile, const std::filesystem::path& path) {
  write_text_file(path, profile.to_json().dump(2) + "\n");
}

std::vector<std::string> SemanticFrame::mentioned_ids() const {
  std::vector<std::string> ids;
  for (const auto& m : mentioned_slots) {
    if (std::find(ids.begin(), ids.end(), m.slot_id) == ids.end()) ids.push_back(m.slot_id);
  }
  return ids;
}

nlohmann::ordered_json to_json(const SemanticFrame& frame) {
  nlohmann::ordered_json doc;
  doc["topic"] = frame.topic_id;
  doc["intent"] = frame.intent_id;
  auto& slots = doc["slots"] = nlohmann::ordered_json::array();
  for (const auto& m : frame.mentioned_slots) {
    nlohmann::ordered_json s;
    s["slot_id"] = m.slot_id;
    if (m.aspect) {
      s["aspect"] = {{"raw_span", m.aspect->raw_span}, {"normalized", m.aspect->normalized}};
    }
    slots.push_back(std::move(s));
  }
  doc["ics"] = frame.ics;
  if (frame.location) doc["location"] = *frame.location;
  doc["provenance"] = frame.provenance;
  if (!frame.new_candidates.empty()) doc["new_candidates"] = frame.new_candidates;
  return doc;
}

SemanticFrame frame_from_json(const nlohmann::json& doc) {
  SemanticFrame frame;
  frame.topic_id = doc.at("topic").get<std::string>();
  frame.intent_id = doc.at("intent").get<std::string>();
  for (const auto& s : doc.at("slots")) {
    MentionedSlot m;
    m.slot_id = s.at("slot_id").get<std::string>();
    if (s.contains("aspect")) {
      m.aspect = AspectValue{m.slot_id, s.at("aspect").at("raw_span").get<std::string>(),
                             s.at("aspect").at("normalized").get<std::string>()};
    }
    frame.mentioned_slots.push_back(std::move(m));
  }
  frame.ics = doc.value("ics", 0.0);
  if (doc.contains("location")) frame.location = doc.at("location").get<std::string>();
  frame.provenance = doc.value("provenance", std::string{});
  frame.new_candidates = doc.value("new_candidates", std::vector<std::string>{});
  return frame;
}

void record_interaction(IntentProfile& profile, const IntentKey& key, std::span<const std::string> slot_ids) {
  profile.record(key, slot_ids);
}

double slot_probability(const IntentProfile& profile, const IntentKey& key, std::string_view slot_id) {
  return profile.distribution(key).probability(slot_id);
}

double intent_completion_score(const SlotDistribution& distribution, std::span<const std::string> mentioned,
                               std::span<const std::string> selected) {
  const std::set<std::string> mentioned_set(mentioned.begin(), mentioned.end());
  const std::set<std::string> selected_set(selected.begin(), selected.end());
  for (const auto& id : selected_set) {
    if (mentioned_set.contains(id)) {
      throw ValidationError("slot '" + id + "' is both mentioned and selected");
    }
  }
  double ics = 0.0;
  for (const auto& id : mentioned_set) ics += distribution.probability(id);
  for (const auto& id : selected_set) ics += distribution.probability(id);
  if (ics > 1.0 || ics < 0.0) {
    if (ics > 1.0 + 1e-9) {
      spdlog::warn("ICS {:.6f} for '{}' clamped to [0, 1]", ics, distribution.key.str());
    }
    ics = std::clamp(ics, 0.0, 1.0);
  }
  return ics;
}

double intent_completion_score(const IntentProfile& profile, const SemanticFrame& frame,
                               std::span<const std::string> selected) {
  const auto mentioned = frame.mentioned_ids();
  return intent_completion_score(profile.distribution(frame.key()), mentioned, selected);
}

double stopping_threshold(const IntentProfile& profile, const IntentKey& key) {
  return profile.distribution(key).threshold();
}

bool should_continue(double ics, double threshold, int step, int max_steps) {
  return ics <= threshold && step < max_steps;
}

}  // namespace intentloop
