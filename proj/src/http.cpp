#include "mhtc/http.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "mhtc/error.hpp"

namespace mhtc {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // leading path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "base URL '" + url + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path = url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body, const RetryPolicy& retry) {
  const auto url = split_url(endpoint.base_url);
  const std::string payload = body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout -
                                                                            seconds);

  std::string last_error;
  const int attempts = std::max(1, retry.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(retry.base_delay * (1 << (attempt - 2)));

    httplib::Client client(url.origin);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + endpoint.api_key);
    }
    auto res = client.Post(url.path + path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::ProviderUnavailable,
                  "HTTP " + std::to_string(res->status) + " from " + endpoint.base_url + path +
                      ": " + res->body.substr(0, 200));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ProviderUnavailable, std::string("malformed JSON response: ") +
                                                      e.what());
    }
  }
  throw Error(ErrorCode::ProviderUnavailable, endpoint.base_url + path + " failed after " +
                                                  std::to_string(attempts) +
                                                  " attempts: " + last_error);
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string{};
}

}  // namespace mhtc
