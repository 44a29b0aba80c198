#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hazard::eval {

// Network or protocol failure; callers retry these.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChatRequest {
    std::string system;
    std::string user;
    double temperature = 0.0;
    std::vector<std::uint8_t> image_png;  // optional attachment
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Returns the assistant text; throws TransportError on failure.
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string model_id() const = 0;
};

// Deterministic stand-in driven by a callback; counts calls and keeps every request.
class ScriptedClient : public ChatClient {
public:
    using Script = std::function<std::string(const ChatRequest&, int call_index)>;

    ScriptedClient(std::string model, Script script);
    std::string complete(const ChatRequest& request) override;
    std::string model_id() const override { return model_; }

    int calls() const { return calls_.load(); }
    std::vector<ChatRequest> requests() const;

private:
    std::string model_;
    Script script_;
    std::atomic<int> calls_{0};
    mutable std::mutex mu_;
    std::vector<ChatRequest> requests_;
};

struct HttpClientConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::seconds timeout{120};
};

// OpenAI-compatible chat-completions client. The key is read from the
// environment at construction; throws std::runtime_error when it is unset.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(HttpClientConfig config);
    std::string complete(const ChatRequest& request) override;
    std::string model_id() const override { return config_.model; }

    static nlohmann::json request_body(const ChatRequest& request, const std::string& model);

private:
    HttpClientConfig config_;
    std::string api_key_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    double multiplier = 2.0;
};

// Calls `fn` until it succeeds or attempts run out. Only exception types that
// `retryable` accepts are retried; the last one is rethrown.
std::string with_retries(const RetryPolicy& policy, const std::function<std::string()>& fn,
                         const std::function<bool(const std::exception&)>& retryable);

// Spaces out calls so that no two start closer than `min_interval`.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds min_interval) : min_interval_(min_interval) {}
    void acquire();

private:
    std::chrono::milliseconds min_interval_;
    std::mutex mu_;
    std::optional<std::chrono::steady_clock::time_point> last_;
};

// One JSON file per key under `dir`; writes are atomic renames, so concurrent
// readers see either nothing or a complete entry.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);
    std::optional<nlohmann::json> get(const std::string& key) const;
    void put(const std::string& key, const nlohmann::json& value) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace hazard::eval
