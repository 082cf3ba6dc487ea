#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

namespace mhtc {

struct HttpEndpoint {
  /// e.g. "https://api.openai.com/v1"; the path part is prefixed to every request.
  std::string base_url;
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
};

struct RetryPolicy {
  int max_attempts = 3;
  /// Delay before retry k (1-based) is base_delay * 2^(k-1).
  std::chrono::milliseconds base_delay{1000};
};

/// POSTs a JSON body and returns the parsed JSON response. Transport failures,
/// HTTP 429 and 5xx responses are retried per `retry`; anything else, or
/// exhausting the attempts, throws ProviderUnavailable.
nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body, const RetryPolicy& retry);

/// Reads an environment variable, empty when unset.
std::string env_or_empty(const char* name);

}  // namespace mhtc
