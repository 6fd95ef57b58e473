#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace intentloop {

/// One refinement step: what was shown, what the user picked, and the ICS
/// before and after. `context_slots` are the slots active when the slate was
/// drawn (mentioned plus earlier selections) and `propensities` the logging
/// policy's probability for each shown slot, aligned with `shown`.
struct InteractionRecord {
  std::string session_id;
  int step = 0;
  std::string topic;
  std::string intent;
  std::string context_scheme;
  std::string request_text;
  std::vector<std::string> context_slots;
  std::vector<std::string> shown;
  std::vector<double> propensities;
  std::vector<std::string> selected;
  std::vector<std::string> rejected;
  double ics_before = 0.0;
  double ics_after = 0.0;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const InteractionRecord&) const = default;
};

nlohmann::ordered_json to_json(const InteractionRecord& record);
InteractionRecord record_from_json(const nlohmann::json& doc);

/// Checks selected/rejected are within shown and ICS did not decrease.
void validate_record(const InteractionRecord& record);

void write_jsonl(std::ostream& out, std::span<const InteractionRecord> records);
std::vector<InteractionRecord> read_jsonl(std::istream& in, const std::string& source = "<stream>");

void write_jsonl_file(const std::filesystem::path& path, std::span<const InteractionRecord> records);
std::vector<InteractionRecord> read_jsonl_file(const std::filesystem::path& path);

std::string format_timestamp(std::chrono::system_clock::time_point tp);
std::chrono::system_clock::time_point parse_timestamp(const std::string& text);

}  // namespace intentloop
