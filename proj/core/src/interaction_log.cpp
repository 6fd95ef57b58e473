#include "intentloop/interaction_log.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

nlohmann::ordered_json to_json(const InteractionRecord& r) {
  nlohmann::ordered_json doc;
  doc["session_id"] = r.session_id;
  doc["step"] = r.step;
  doc["topic"] = r.topic;
  doc["intent"] = r.intent;
  doc["context_scheme"] = r.context_scheme;
  doc["request_text"] = r.request_text;
  doc["context_slots"] = r.context_slots;
  doc["shown"] = r.shown;
  doc["propensities"] = r.propensities;
  doc["selected"] = r.selected;
  doc["rejected"] = r.rejected;
  doc["ics_before"] = r.ics_before;
  doc["ics_after"] = r.ics_after;
  doc["timestamp"] = r.timestamp;
  return doc;
}

InteractionRecord record_from_json(const nlohmann::json& doc) {
  InteractionRecord r;
  r.session_id = doc.at("session_id").get<std::string>();
  r.step = doc.at("step").get<int>();
  r.topic = doc.at("topic").get<std::string>();
  r.intent = doc.at("intent").get<std::string>();
  r.context_scheme = doc.value("context_scheme", std::string{"method1"});
  r.request_text = doc.value("request_text", std::string{});
  r.context_slots = doc.value("context_slots", std::vector<std::string>{});
  r.shown = doc.at("shown").get<std::vector<std::string>>();
  r.propensities = doc.value("propensities", std::vector<double>{});
  r.selected = doc.at("selected").get<std::vector<std::string>>();
  r.rejected = doc.value("rejected", std::vector<std::string>{});
  r.ics_before = doc.value("ics_before", 0.0);
  r.ics_after = doc.value("ics_after", 0.0);
  r.timestamp = doc.value("timestamp", std::string{});
  return r;
}

void validate_record(const InteractionRecord& r) {
  auto in_shown = [&](const std::string& id) { return std::find(r.shown.begin(), r.shown.end(), id) != r.shown.end(); };
  for (const auto& id : r.selected) {
    if (!in_shown(id)) throw ValidationError("selected slot '" + id + "' was not shown");
  }
  for (const auto& id : r.rejected) {
    if (!in_shown(id)) throw ValidationError("rejected slot '" + id + "' was not shown");
  }
  if (!r.propensities.empty() && r.propensities.size() != r.shown.size()) {
    throw ValidationError("propensities do not align with shown slots");
  }
  if (r.ics_after + 1e-12 < r.ics_before) throw ValidationError("ICS decreased within a step");
}

void write_jsonl(std::ostream& out, std::span<const InteractionRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<InteractionRecord> read_jsonl(std::istream& in, const std::string& source) {
  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source + ": " + e.what(), line_no);
    }
  }
  return records;
}

void write_jsonl_file(const std::filesystem::path& path, std::span<const InteractionRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_jsonl(out, records);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::vector<InteractionRecord> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return read_jsonl(in, path.string());
}

std::string format_timestamp(std::chrono::system_clock::time_point tp) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000 - (ms % 1000 < 0 ? 1 : 0));
  const long long millis = ((ms % 1000) + 1000) % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << millis << 'Z';
  return os.str();
}

std::chrono::system_clock::time_point parse_timestamp(const std::string& text) {
  std::tm tm{};
  std::istringstream is(text);
  is >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
  if (is.fail()) throw ParseError("bad timestamp '" + text + "'");
  long long millis = 0;
  if (is.peek() == '.') {
    is.get();
    is >> millis;
  }
  const auto secs = timegm(&tm);
  return std::chrono::system_clock::time_point(std::chrono::seconds(secs)) + std::chrono::milliseconds(millis);
}

}  // namespace intentloop
