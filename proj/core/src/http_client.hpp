#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace intentloop::detail {

struct HttpRequestOptions {
  std::string base_url;
  std::string path;
  int max_attempts = 3;
  int backoff_ms = 200;
  int timeout_s = 30;
  std::vector<std::pair<std::string, std::string>> headers;
};

// Both helpers retry connection failures, 429 and 5xx with exponential
// backoff, then throw ProviderError carrying the attempt count and last status.
nlohmann::json post_json(const HttpRequestOptions& options, const nlohmann::json& body);
nlohmann::json get_json(const HttpRequestOptions& options,
                        const std::vector<std::pair<std::string, std::string>>& params);

}  // namespace intentloop::detail
