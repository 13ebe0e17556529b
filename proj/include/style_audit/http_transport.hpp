#pragma once

// Requires linking OpenSSL when CPPHTTPLIB_OPENSSL_SUPPORT is defined.
#include <httplib.h>

#include "style_audit/transport.hpp"

namespace style_audit {

/// POSTs JSON to `{base_url}{path}` with an optional bearer token. A fresh
/// client per request keeps the transport safe for concurrent callers.
class HttpJsonTransport final : public JsonTransport {
 public:
  HttpJsonTransport(const std::string& base_url, std::string api_key,
                    std::chrono::seconds timeout)
      : url_(parse_base_url(base_url)), api_key_(std::move(api_key)), timeout_(timeout) {}

  nlohmann::json post(const std::string& path, const nlohmann::json& body) override {
    httplib::Client client(url_.origin);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const auto full_path = url_.prefix + path;
    auto res = client.Post(full_path, headers, body.dump(), "application/json");
    if (!res) {
      throw EndpointError("POST " + url_.origin + full_path + " failed: " +
                          httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw EndpointError("POST " + url_.origin + full_path + " returned HTTP " +
                          std::to_string(res->status) + ": " + res->body.substr(0, 300));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw EndpointError("POST " + url_.origin + full_path + " returned non-JSON body: " +
                          e.what());
    }
  }

 private:
  BaseUrl url_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

inline std::unique_ptr<JsonTransport> make_http_transport(const std::string& base_url,
                                                          std::string api_key,
                                                          std::chrono::seconds timeout = std::chrono::seconds(120)) {
  return std::make_unique<HttpJsonTransport>(base_url, std::move(api_key), timeout);
}

}  // namespace style_audit
