#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "intentloop/session.hpp"

namespace intentloop {

class SessionStore {
 public:
  virtual ~SessionStore() = default;
  virtual std::optional<Session> load(const std::string& id) const = 0;
  virtual void save(const Session& session) = 0;
};

class MemorySessionStore final : public SessionStore {
 public:
  std::optional<Session> load(const std::string& id) const override;
  void save(const Session& session) override;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, nlohmann::json> docs_;
};

/// One `<id>.json` file per session.
class DirectorySessionStore final : public SessionStore {
 public:
  explicit DirectorySessionStore(std::filesystem::path dir);

  std::optional<Session> load(const std::string& id) const override;
  void save(const Session& session) override;
  const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// Wire form of a session; never carries model state.
nlohmann::ordered_json api_session_view(const Session& session, const IntentOntology& ontology);

struct ApiResponse {
  int status = 200;
  nlohmann::ordered_json body;
};

/// Socket-free request handling. Requests on different sessions run
/// concurrently; requests on one session are serialized.
class ApiRouter {
 public:
  ApiRouter(Engine& engine, SessionStore& store);

  ApiResponse dispatch(const std::string& method, const std::string& path, const std::string& body);

 private:
  ApiResponse create_session(const std::string& body);
  ApiResponse feedback(const std::string& id, const std::string& body);
  ApiResponse retrieve(const std::string& id);
  ApiResponse get_session(const std::string& id);
  ApiResponse profile(const std::string& topic, const std::string& intent);
  std::shared_ptr<std::mutex> session_lock(const std::string& id);

  Engine* engine_;
  SessionStore* store_;
  std::mutex locks_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> locks_;
};

ApiResponse api_error(int status, std::string error, std::string detail);

struct ServerOptions {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string cors_origin = "*";
};

/// Port from INTENTLOOP_PORT when set.
ServerOptions server_options_from_env(ServerOptions base);

/// Blocks until the server stops.
void serve(ApiRouter& router, const ServerOptions& options);

}  // namespace intentloop
