#include "http_client.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "intentloop/errors.hpp"

namespace intentloop::detail {

namespace {

template <typename Send>
nlohmann::json with_retries(const HttpRequestOptions& options, Send&& send) {
  httplib::Client client(options.base_url);
  client.set_connection_timeout(options.timeout_s, 0);
  client.set_read_timeout(options.timeout_s, 0);
  client.set_write_timeout(options.timeout_s, 0);

  httplib::Headers headers;
  for (const auto& [k, v] : options.headers) headers.emplace(k, v);

  int last_status = 0;
  std::string last_error;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto result = send(client, headers);
    bool retryable = true;
    if (!result) {
      last_error = httplib::to_string(result.error());
    } else {
      last_status = result->status;
      if (last_status >= 200 && last_status < 300) {
        try {
          return nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::parse_error& e) {
          throw ProviderError(options.base_url + options.path + ": response is not JSON: " + e.what(), attempt,
                              last_status, false);
        }
      }
      last_error = "HTTP " + std::to_string(last_status);
      retryable = last_status == 429 || last_status >= 500;
    }
    if (!retryable) {
      throw ProviderError(options.base_url + options.path + ": " + last_error, attempt, last_status, false);
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(options.backoff_ms << (attempt - 1)));
    }
  }
  throw ProviderError(options.base_url + options.path + ": " + last_error + " after " + std::to_string(attempts) +
                          " attempts",
                      attempts, last_status, true);
}

}  // namespace

nlohmann::json post_json(const HttpRequestOptions& options, const nlohmann::json& body) {
  const std::string payload = body.dump();
  return with_retries(options, [&](httplib::Client& client, const httplib::Headers& headers) {
    return client.Post(options.path, headers, payload, "application/json");
  });
}

nlohmann::json get_json(const HttpRequestOptions& options,
                        const std::vector<std::pair<std::string, std::string>>& params) {
  httplib::Params query;
  for (const auto& [k, v] : params) query.emplace(k, v);
  return with_retries(options, [&](httplib::Client& client, const httplib::Headers& headers) {
    return client.Get(options.path, query, headers);
  });
}

}  // namespace intentloop::detail
