#include "intentloop/service.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "intentloop/errors.hpp"
#include "intentloop/text.hpp"

namespace intentloop {

std::optional<Session> MemorySessionStore::load(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = docs_.find(id);
  if (it == docs_.end()) return std::nullopt;
  return session_from_json(it->second);
}

void MemorySessionStore::save(const Session& session) {
  std::lock_guard lock(mutex_);
  docs_[session.id] = to_json(session);
}

DirectorySessionStore::DirectorySessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

namespace {

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

}  // namespace

std::optional<Session> DirectorySessionStore::load(const std::string& id) const {
  if (!valid_session_id(id)) return std::nullopt;
  const auto path = dir_ / (id + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  return session_from_json(parse_json_text(read_text_file(path), path.string()));
}

void DirectorySessionStore::save(const Session& session) {
  if (!valid_session_id(session.id)) throw ValidationError("session id '" + session.id + "' is not storable");
  const auto path = dir_ / (session.id + ".json");
  const auto tmp = dir_ / (session.id + ".json.tmp");
  write_text_file(tmp, to_json(session).dump());
  std::filesystem::rename(tmp, path);
}

nlohmann::ordered_json api_session_view(const Session& s, const IntentOntology& ontology) {
  nlohmann::ordered_json suggestions = nlohmann::ordered_json::array();
  if (s.state == SessionState::refining) {
    for (const auto& id : s.last_shown) {
      const auto* slot = ontology.find_slot(id);
      suggestions.push_back({{"slot_id", id}, {"label", slot ? slot->label : id}});
    }
  }
  nlohmann::ordered_json view{{"id", s.id},
                              {"frame", to_json(s.frame)},
                              {"ics", s.ics()},
                              {"threshold", s.threshold},
                              {"step", s.step},
                              {"max_steps", s.max_steps},
                              {"state", std::string(to_string(s.state))},
                              {"suggestions", suggestions}};
  if (!s.diagnostic.empty()) view["diagnostic"] = s.diagnostic;
  return view;
}

ApiResponse api_error(int status, std::string error, std::string detail) {
  return {status, {{"error", std::move(error)}, {"detail", std::move(detail)}}};
}

ApiRouter::ApiRouter(Engine& engine, SessionStore& store) : engine_(&engine), store_(&store) {}

std::shared_ptr<std::mutex> ApiRouter::session_lock(const std::string& id) {
  std::lock_guard lock(locks_mutex_);
  auto& m = locks_[id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

namespace {

nlohmann::json parse_body(const std::string& body) {
  if (trim(body).empty()) return nlohmann::json::object();
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw ParseError("request body is not valid JSON");
  if (!doc.is_object()) throw ParseError("request body must be a JSON object");
  return doc;
}

std::vector<std::string> string_list(const nlohmann::json& doc, const char* field) {
  if (!doc.contains(field)) return {};
  const auto& v = doc.at(field);
  if (!v.is_array()) throw ValidationError(std::string(field) + " must be an array of slot ids");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) throw ValidationError(std::string(field) + " must be an array of slot ids");
    out.push_back(x.get<std::string>());
  }
  return out;
}

}  // namespace

ApiResponse ApiRouter::dispatch(const std::string& method, const std::string& path, const std::string& body) {
  static const std::regex session_re(R"(^/sessions/([^/]+)$)");
  static const std::regex action_re(R"(^/sessions/([^/]+)/(feedback|retrieve)$)");
  static const std::regex profile_re(R"(^/profile/([^/]+)/([^/]+)$)");
  std::string p = path.substr(0, path.find('?'));
  if (p.size() > 1 && p.back() == '/') p.pop_back();
  std::smatch m;
  try {
    if (method == "OPTIONS") return {204, nullptr};
    if (p == "/sessions") {
      if (method != "POST") return api_error(405, "method_not_allowed", method + " " + p);
      return create_session(body);
    }
    if (std::regex_match(p, m, action_re)) {
      if (method != "POST") return api_error(405, "method_not_allowed", method + " " + p);
      return m[2] == "feedback" ? feedback(m[1], body) : retrieve(m[1]);
    }
    if (std::regex_match(p, m, session_re)) {
      if (method != "GET") return api_error(405, "method_not_allowed", method + " " + p);
      return get_session(m[1]);
    }
    if (p == "/ontology") {
      if (method != "GET") return api_error(405, "method_not_allowed", method + " " + p);
      return {200, to_json(engine_->ontology())};
    }
    if (std::regex_match(p, m, profile_re)) {
      if (method != "GET") return api_error(405, "method_not_allowed", method + " " + p);
      return profile(m[1], m[2]);
    }
    return api_error(404, "not_found", "no route for " + method + " " + p);
  } catch (const ParseError& e) {
    return api_error(400, "bad_request", e.what());
  } catch (const ValidationError& e) {
    return api_error(400, "validation_error", e.what());
  } catch (const ReferenceError& e) {
    return api_error(404, "not_found", e.what());
  } catch (const StateError& e) {
    return api_error(409, "conflict", e.what());
  } catch (const ProviderError& e) {
    return api_error(502, "provider_error", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{} {} failed: {}", method, p, e.what());
    return api_error(500, "internal_error", "request failed");
  }
}

ApiResponse ApiRouter::create_session(const std::string& body) {
  const auto doc = parse_body(body);
  if (!doc.contains("text") || !doc["text"].is_string()) throw ValidationError("text is required");
  ComplexRequest req;
  req.text = doc["text"].get<std::string>();
  if (trim(req.text).empty()) throw ValidationError("request text is empty");
  if (doc.contains("location")) {
    if (!doc["location"].is_string()) throw ValidationError("location must be a string");
    req.location = doc["location"].get<std::string>();
  }
  req.received_at = std::chrono::system_clock::now();
  auto s = engine_->start_session(req);
  if (s.state == SessionState::abandoned && s.frame.intent_id.empty())
    return api_error(422, "unknown_intent", s.diagnostic.empty() ? "request intent not recognized" : s.diagnostic);
  auto lock = session_lock(s.id);
  std::lock_guard guard(*lock);
  store_->save(s);
  return {201, api_session_view(s, engine_->ontology())};
}

ApiResponse ApiRouter::feedback(const std::string& id, const std::string& body) {
  const auto doc = parse_body(body);
  const auto selected = string_list(doc, "selected");
  const auto rejected = string_list(doc, "rejected");
  auto lock = session_lock(id);
  std::lock_guard guard(*lock);
  auto s = store_->load(id);
  if (!s) return api_error(404, "not_found", "unknown session " + id);
  engine_->apply_feedback(*s, selected, rejected);
  store_->save(*s);
  return {200, api_session_view(*s, engine_->ontology())};
}

ApiResponse ApiRouter::retrieve(const std::string& id) {
  auto lock = session_lock(id);
  std::lock_guard guard(*lock);
  auto s = store_->load(id);
  if (!s) return api_error(404, "not_found", "unknown session " + id);
  const auto results = engine_->retrieve(*s);
  store_->save(*s);
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : results) out.push_back(to_json(r));
  return {200, {{"session_id", s->id}, {"suggestions", out}}};
}

ApiResponse ApiRouter::get_session(const std::string& id) {
  auto lock = session_lock(id);
  std::lock_guard guard(*lock);
  auto s = store_->load(id);
  if (!s) return api_error(404, "not_found", "unknown session " + id);
  return {200, api_session_view(*s, engine_->ontology())};
}

ApiResponse ApiRouter::profile(const std::string& topic, const std::string& intent) {
  const IntentKey key{topic, intent};
  if (!engine_->ontology().find_intent(key)) return api_error(404, "not_found", "unknown intent " + key.str());
  const auto d = engine_->profile().distribution(key);
  nlohmann::ordered_json probs = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < d.slot_ids.size(); ++i) probs[d.slot_ids[i]] = d.probabilities[i];
  return {200,
          {{"topic", topic},
           {"intent", intent},
           {"smoothed", d.smoothed},
           {"threshold", d.threshold()},
           {"total", engine_->profile().total(key)},
           {"probabilities", probs}}};
}

ServerOptions server_options_from_env(ServerOptions base) {
  if (const char* port = std::getenv("INTENTLOOP_PORT"); port && *port) {
    try {
      base.port = std::stoi(port);
    } catch (const std::exception&) {
      throw ValidationError(std::string("INTENTLOOP_PORT is not a port number: ") + port);
    }
  }
  if (base.port <= 0 || base.port > 65535) throw ValidationError("port out of range");
  return base;
}

void serve(ApiRouter& router, const ServerOptions& options) {
  httplib::Server server;
  auto handle = [&](const httplib::Request& req, httplib::Response& res) {
    const auto r = router.dispatch(req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", options.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    if (r.status != 204) res.set_content(r.body.dump(), "application/json");
  };
  const char* pattern = R"(/.*)";
  server.Get(pattern, handle);
  server.Post(pattern, handle);
  server.Options(pattern, handle);
  spdlog::info("listening on {}:{}", options.host, options.port);
  if (!server.listen(options.host, options.port))
    throw ProviderError("cannot listen on " + options.host + ":" + std::to_string(options.port));
}

}  // namespace intentloop
