#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "intentloop/ontology.hpp"

namespace testing_support {

inline std::filesystem::path source_dir() { return INTENTLOOP_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::filesystem::path qpp_dir() { return source_dir() / "tests" / "data" / "qpp"; }

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("intentloop-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// activity/hike with the given slot labels (ids are the labels), plus
// service/plumber with two slots.
inline intentloop::IntentOntology small_ontology(const std::vector<std::string>& hike_slots = {"parking", "scenery",
                                                                                               "dogs", "shade"}) {
  using namespace intentloop;
  std::vector<Topic> topics{{"activity", "activity"}, {"service", "service"}};
  std::vector<Intent> intents{{"hike", "activity", "hike"}, {"plumber", "service", "plumber"}};
  std::vector<Slot> slots;
  for (const auto& s : hike_slots) slots.push_back({s, "activity", "hike", s, true});
  slots.push_back({"leak", "service", "plumber", "leak repair", true});
  slots.push_back({"emergency", "service", "plumber", "emergency visit", true});
  return IntentOntology(topics, intents, slots);
}

inline const intentloop::IntentKey kHike{"activity", "hike"};

}  // namespace testing_support
