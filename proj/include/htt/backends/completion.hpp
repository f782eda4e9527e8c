#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "htt/common/error.hpp"
#include "htt/common/text.hpp"

namespace htt::backend {

struct GenerationParams {
  std::string model = "gpt-4";
  double temperature = 1.0;
  int max_tokens = 2048;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";

  void validate() const {
    if (model.empty()) throw ConfigurationError("model name is empty");
    if (!std::isfinite(temperature) || temperature < 0) throw ConfigurationError("temperature must be finite and >= 0");
    if (max_tokens <= 0) throw ConfigurationError("max_tokens must be positive");
    if (!text::starts_with(endpoint, "http://") && !text::starts_with(endpoint, "https://")) {
      throw ConfigurationError("endpoint must be an http(s) URL: " + endpoint);
    }
  }
};

inline constexpr std::string_view kDefaultCredentialVariable = "OPENAI_API_KEY";

struct ClientOptions {
  std::string credential_variable = std::string(kDefaultCredentialVariable);
  std::string cache_dir;  // empty disables the cache
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  double requests_per_minute = 60;
  std::chrono::seconds timeout{120};
};

/// status 0 means the request never produced an HTTP response.
struct HttpReply {
  int status = 0;
  std::string body;
  std::string error;
};

using Transport =
    std::function<HttpReply(const std::string& endpoint, const std::string& body, const std::string& token)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw BackendError("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline Transport httplib_transport(std::chrono::seconds timeout = std::chrono::seconds{120}) {
  return [timeout](const std::string& endpoint, const std::string& body, const std::string& token) {
    const auto scheme_end = endpoint.find("://");
    const auto path_start = endpoint.find('/', scheme_end + 3);
    const std::string origin = endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
    httplib::Client cli(origin);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers = {{"Authorization", "Bearer " + token}};
    HttpReply reply;
    if (auto res = cli.Post(path, headers, body, "application/json")) {
      reply.status = res->status;
      reply.body = res->body;
    } else {
      reply.error = httplib::to_string(res.error());
    }
    return reply;
  };
}

/// Chat-completions client with retry, rate limiting and a disk cache.
///
/// Every request is keyed by the SHA-256 of its JSON body; a cache hit
/// replays the stored text without touching the network or the credential.
class CompletionClient {
 public:
  CompletionClient(GenerationParams params, ClientOptions opt = {}, Transport transport = {}, Sleeper sleeper = {})
      : params_(std::move(params)),
        opt_(std::move(opt)),
        transport_(transport ? std::move(transport) : httplib_transport(opt_.timeout)),
        sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {
    params_.validate();
    if (opt_.max_attempts < 1) throw ConfigurationError("max_attempts must be >= 1");
    if (!(opt_.requests_per_minute > 0)) throw ConfigurationError("requests_per_minute must be positive");
  }

  const GenerationParams& params() const { return params_; }
  std::size_t network_requests() const { return requests_; }

  std::string request_body(const std::string& prompt) const {
    nlohmann::ordered_json j;
    j["model"] = params_.model;
    j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
    j["temperature"] = params_.temperature;
    j["max_tokens"] = params_.max_tokens;
    return j.dump();
  }

  // `sample` distinguishes repeated draws for the same prompt; it is part of
  // the cache key but not of the request.
  std::string complete(const std::string& prompt, std::uint64_t sample = 0) {
    const std::string body = request_body(prompt);
    const std::string key = sha256_hex(params_.endpoint + "\n" + std::to_string(sample) + "\n" + body);
    if (auto hit = cache_get(key)) return *hit;
    const std::string token = credential();
    std::string last_error;
    bool rate_limited = false;
    for (int attempt = 0; attempt < opt_.max_attempts; ++attempt) {
      if (attempt > 0) sleeper_(opt_.base_delay * (1LL << std::min(attempt - 1, 16)));
      throttle();
      ++requests_;
      const HttpReply reply = transport_(params_.endpoint, body, token);
      if (reply.status == 200) {
        std::string text = extract_content(reply.body);
        cache_put(key, body, text);
        return text;
      }
      if (reply.status == 401 || reply.status == 403) {
        throw AuthError("endpoint rejected the credential in " + opt_.credential_variable + " (HTTP " +
                        std::to_string(reply.status) + ")");
      }
      rate_limited = reply.status == 429;
      last_error = reply.status == 0 ? reply.error : "HTTP " + std::to_string(reply.status) + ": " + reply.body.substr(0, 200);
      const bool transient = reply.status == 0 || reply.status == 429 || reply.status >= 500;
      if (!transient) throw TransportError("request failed: " + last_error);
    }
    if (rate_limited) throw RateLimitError("rate limit persisted after " + std::to_string(opt_.max_attempts) + " attempts");
    throw TransportError("request failed after " + std::to_string(opt_.max_attempts) + " attempts: " + last_error);
  }

 private:
  std::string credential() const {
    const char* v = std::getenv(opt_.credential_variable.c_str());
    if (!v || !*v) throw ConfigurationError("environment variable " + opt_.credential_variable + " is not set");
    return v;
  }

  static std::string extract_content(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw MalformedResponseError("message content is not a string");
      return content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponseError(std::string("unexpected completion response: ") + e.what());
    }
  }

  void throttle() {
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(60.0 / opt_.requests_per_minute));
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_slot_);
      next_slot_ = slot + interval;
    }
    const auto wait = slot - std::chrono::steady_clock::now();
    if (wait > std::chrono::steady_clock::duration::zero()) {
      std::this_thread::sleep_for(wait);
    }
  }

  std::optional<std::string> cache_get(const std::string& key) const {
    if (opt_.cache_dir.empty()) return std::nullopt;
    const auto path = std::filesystem::path(opt_.cache_dir) / (key + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
      return nlohmann::json::parse(text::read_file(path.string())).at("response").get<std::string>();
    } catch (const std::exception&) {
      return std::nullopt;  // unreadable entries are refetched and overwritten
    }
  }

  void cache_put(const std::string& key, const std::string& body, const std::string& text) const {
    if (opt_.cache_dir.empty()) return;
    std::filesystem::create_directories(opt_.cache_dir);
    nlohmann::ordered_json j;
    j["endpoint"] = params_.endpoint;
    j["request"] = nlohmann::ordered_json::parse(body);
    j["response"] = text;
    const auto dir = std::filesystem::path(opt_.cache_dir);
    const auto tmp = dir / (key + ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    text::write_file(tmp.string(), j.dump(2) + "\n");
    std::filesystem::rename(tmp, dir / (key + ".json"));
  }

  GenerationParams params_;
  ClientOptions opt_;
  Transport transport_;
  Sleeper sleeper_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::atomic<std::size_t> requests_{0};
};

}  // namespace htt::backend
