#pragma once

// External-http embedding provider.
//   request:  POST {"texts": [string, ...]}
//   response: 2xx {"vectors": [[number, ...], ...]}

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semverd/embedding.hpp"

namespace semverd {

inline constexpr int kDefaultHttpTimeoutMs = 10000;

/// Explicit value, else SEMVERD_HTTP_TIMEOUT_MS, else 10 s.
inline int resolve_http_timeout_ms(std::optional<int> explicit_ms) {
  if (explicit_ms) return *explicit_ms;
  if (const char* env = std::getenv("SEMVERD_HTTP_TIMEOUT_MS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return kDefaultHttpTimeoutMs;
}

struct HttpEndpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline HttpEndpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
    throw Error(Errc::BadParams, "endpoint must be an http:// URL, got '" + url + "'");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class HttpProvider final : public EmbeddingProvider {
 public:
  explicit HttpProvider(EmbeddingProviderSpec spec)
      : spec_(std::move(spec)),
        endpoint_(parse_endpoint(spec_.location)),
        timeout_ms_(resolve_http_timeout_ms(spec_.timeout_ms)) {}

  [[nodiscard]] const EmbeddingProviderSpec& spec() const noexcept override { return spec_; }
  [[nodiscard]] int timeout_ms() const noexcept { return timeout_ms_; }

  [[nodiscard]] EmbeddingVector embed_text(std::string_view text) const override {
    std::string one(text);
    return std::move(embed_texts(std::span(&one, 1)).front());
  }

  [[nodiscard]] std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) const override {
    const std::string body =
        nlohmann::json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= spec_.retries; ++attempt) {
      httplib::Client client(endpoint_.origin);
      const auto timeout = std::chrono::milliseconds(timeout_ms_);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto res = client.Post(endpoint_.path, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      // A well-formed but wrong reply will not improve on retry.
      return decode(res->body, texts.size());
    }
    throw Error(Errc::ProviderUnavailable, endpoint_.origin + endpoint_.path + ": " + last_error);
  }

 private:
  [[nodiscard]] std::vector<EmbeddingVector> decode(const std::string& body,
                                                    std::size_t expected) const {
    auto fail = [](const std::string& why) { return Error(Errc::ProviderUnavailable, why); };
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw fail(std::string("malformed reply: ") + e.what());
    }
    if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array()) {
      throw fail("reply lacks a 'vectors' array");
    }
    const auto& rows = reply["vectors"];
    if (rows.size() != expected) {
      throw fail("reply has " + std::to_string(rows.size()) + " vectors for " +
                 std::to_string(expected) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(expected);
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != spec_.dimension) {
        throw fail("reply vector has wrong shape, expected dimension " +
                   std::to_string(spec_.dimension));
      }
      std::vector<double> values;
      values.reserve(row.size());
      for (const auto& x : row) {
        if (!x.is_number()) throw fail("non-numeric vector component");
        values.push_back(x.get<double>());
      }
      try {
        out.push_back(l2_normalize(std::move(values)));
      } catch (const Error&) {
        throw fail("reply contains a zero vector");
      }
    }
    return out;
  }

  EmbeddingProviderSpec spec_;
  HttpEndpoint endpoint_;
  int timeout_ms_;
};

}  // namespace semverd
