#pragma once

// Minimal chat-completion client: POSTs {"model", "messages", "temperature"}
// and returns choices[0].message.content. Retries network failures, 5xx and
// 429 with exponential backoff; auth failures are not retried.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace dreamer {

enum class RemoteErrc { network, auth, rate_limited, http, parse_failure, config };

inline const char* to_string(RemoteErrc c) {
  switch (c) {
    case RemoteErrc::network: return "NetworkError";
    case RemoteErrc::auth: return "AuthError";
    case RemoteErrc::rate_limited: return "RateLimited";
    case RemoteErrc::http: return "HttpError";
    case RemoteErrc::parse_failure: return "ParseFailure";
    case RemoteErrc::config: return "ConfigError";
  }
  return "?";
}

class RemoteError : public std::runtime_error {
 public:
  RemoteError(RemoteErrc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  RemoteErrc code() const noexcept { return code_; }

 private:
  RemoteErrc code_;
};

struct RemoteModelConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "textual-sketch-wm";
  std::string api_key_env = "DREAMER_API_KEY";
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.0;
  int max_in_flight = 8;
  int backoff_base_ms = 500;
  int max_backoff_ms = 30000;

  void validate() const {
    if (!(timeout_seconds > 0.0)) throw RemoteError(RemoteErrc::config, "timeout must be > 0");
    if (max_retries < 0) throw RemoteError(RemoteErrc::config, "max_retries must be >= 0");
    if (max_in_flight < 1) throw RemoteError(RemoteErrc::config, "max_in_flight must be >= 1");
  }
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct Endpoint {
  std::string scheme_host_port;  // e.g. http://localhost:8080
  std::string path;              // e.g. /v1/chat/completions
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw RemoteError(RemoteErrc::config, "endpoint needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class ChatClient {
 public:
  explicit ChatClient(RemoteModelConfig cfg)
      : cfg_(std::move(cfg)), slots_(std::make_shared<std::counting_semaphore<1024>>(std::min(cfg_.max_in_flight, 1024))) {
    cfg_.validate();
    endpoint_ = split_endpoint(cfg_.endpoint);
  }

  const RemoteModelConfig& config() const noexcept { return cfg_; }

  static nlohmann::json request_body(const RemoteModelConfig& cfg, const std::vector<ChatMessage>& messages) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", cfg.model}, {"messages", std::move(msgs)}, {"temperature", cfg.temperature}};
  }

  // Thread-safe; at most max_in_flight requests run concurrently.
  std::string complete(const std::vector<ChatMessage>& messages) const {
    const std::string body = request_body(cfg_, messages).dump();
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr && *key != '\0')
      headers.emplace("Authorization", std::string("Bearer ") + key);

    slots_->acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{*slots_};

    for (int attempt = 0;; ++attempt) {
      httplib::Client client(endpoint_.scheme_host_port);
      const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

      auto res = client.Post(endpoint_.path, headers, body, "application/json");
      const bool can_retry = attempt < cfg_.max_retries;
      if (!res) {
        if (!can_retry) throw RemoteError(RemoteErrc::network, httplib::to_string(res.error()));
        sleep_ms(backoff_ms(attempt));
        continue;
      }
      const int status = res->status;
      if (status == 401 || status == 403) throw RemoteError(RemoteErrc::auth, "HTTP " + std::to_string(status));
      if (status == 429) {
        if (!can_retry) throw RemoteError(RemoteErrc::rate_limited, "retries exhausted");
        int wait = backoff_ms(attempt);
        if (res->has_header("Retry-After")) {
          try {
            wait = std::min(cfg_.max_backoff_ms, static_cast<int>(std::stod(res->get_header_value("Retry-After")) * 1000.0));
          } catch (const std::exception&) {
            // HTTP-date form; fall back to backoff
          }
        }
        sleep_ms(wait);
        continue;
      }
      if (status >= 500) {
        if (!can_retry) throw RemoteError(RemoteErrc::network, "HTTP " + std::to_string(status));
        sleep_ms(backoff_ms(attempt));
        continue;
      }
      if (status != 200) throw RemoteError(RemoteErrc::http, "HTTP " + std::to_string(status));
      return extract_content(res->body);
    }
  }

  static std::string extract_content(const std::string& body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw RemoteError(RemoteErrc::parse_failure, "response is not JSON");
    const auto* choices = j.is_object() && j.contains("choices") ? &j["choices"] : nullptr;
    if (choices == nullptr || !choices->is_array() || choices->empty())
      throw RemoteError(RemoteErrc::parse_failure, "response has no choices");
    const auto& first = (*choices)[0];
    if (first.contains("message") && first["message"].is_object() && first["message"].contains("content") &&
        first["message"]["content"].is_string())
      return first["message"]["content"].get<std::string>();
    if (first.contains("text") && first["text"].is_string()) return first["text"].get<std::string>();
    throw RemoteError(RemoteErrc::parse_failure, "choice has no message content");
  }

 private:
  int backoff_ms(int attempt) const {
    const long long ms = static_cast<long long>(cfg_.backoff_base_ms) << std::min(attempt, 20);
    return static_cast<int>(std::min<long long>(ms, cfg_.max_backoff_ms));
  }

  static void sleep_ms(int ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }

  RemoteModelConfig cfg_;
  Endpoint endpoint_;
  std::shared_ptr<std::counting_semaphore<1024>> slots_;
};

}  // namespace dreamer
