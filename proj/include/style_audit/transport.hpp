#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "style_audit/error.hpp"

namespace style_audit {

inline constexpr const char* kApiKeyEnv = "STYLE_AUDIT_API_KEY";

/// Minimal JSON-over-POST interface shared by the chat and embedding
/// clients. Implementations throw EndpointError on transport failure or a
/// non-2xx reply. Must be safe to call from several threads at once.
class JsonTransport {
 public:
  virtual ~JsonTransport() = default;
  virtual nlohmann::json post(const std::string& path, const nlohmann::json& body) = 0;
};

/// Adapts a callable; used by tests and offline stubs.
class FunctionTransport final : public JsonTransport {
 public:
  using Fn = std::function<nlohmann::json(const std::string&, const nlohmann::json&)>;
  explicit FunctionTransport(Fn fn) : fn_(std::move(fn)) {}
  nlohmann::json post(const std::string& path, const nlohmann::json& body) override {
    return fn_(path, body);
  }

 private:
  Fn fn_;
};

/// Parsed `scheme://host[:port][/prefix]`.
struct BaseUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash, may be empty
};

inline BaseUrl parse_base_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0) {
    throw ConfigError("endpoint URL must start with http:// or https://: " + std::string(url));
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported URL scheme: " + std::string(url));
  }
  const auto host_begin = scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  BaseUrl out;
  out.origin = std::string(url.substr(0, path_begin));
  if (out.origin.size() == host_begin) throw ConfigError("endpoint URL has no host: " + std::string(url));
  if (path_begin != std::string_view::npos) {
    out.prefix = std::string(url.substr(path_begin));
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

inline std::string api_key_from_env() {
  const char* v = std::getenv(kApiKeyEnv);
  return v ? std::string(v) : std::string();
}

/// Calls `fn` up to `1 + max_retries` times, sleeping with linear backoff
/// between attempts. Rethrows the last EndpointError.
template <typename Fn>
auto with_retries(int max_retries, std::chrono::milliseconds backoff, Fn&& fn)
    -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const EndpointError&) {
      if (attempt >= max_retries) throw;
      if (backoff.count() > 0) std::this_thread::sleep_for(backoff * (attempt + 1));
    }
  }
}

}  // namespace style_audit
