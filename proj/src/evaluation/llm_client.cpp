#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "hazard/evaluation/llm_client.hpp"

#include "hazard/common/io.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <cstdlib>
#include <thread>

namespace hazard::eval {

using nlohmann::json;

ScriptedClient::ScriptedClient(std::string model, Script script) : model_(std::move(model)), script_(std::move(script)) {}

std::string ScriptedClient::complete(const ChatRequest& request) {
    const int index = calls_.fetch_add(1);
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
    }
    return script_(request, index);
}

std::vector<ChatRequest> ScriptedClient::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw std::runtime_error("environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
}

json HttpChatClient::request_body(const ChatRequest& request, const std::string& model) {
    json user_content = json::array({{{"type", "text"}, {"text", request.user}}});
    if (!request.image_png.empty()) {
        user_content.push_back(
            {{"type", "image_url"},
             {"image_url", {{"url", "data:image/png;base64," + base64_encode(request.image_png)}}}});
    }
    json messages = json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", user_content}});
    return {{"model", model}, {"temperature", request.temperature}, {"messages", messages}};
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    httplib::Client cli(config_.base_url);
    cli.set_read_timeout(config_.timeout);
    cli.set_bearer_token_auth(api_key_);
    const auto res = cli.Post(config_.path, request_body(request, config_.model).dump(), "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
        return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed completion response: ") + e.what());
    }
}

std::string with_retries(const RetryPolicy& policy, const std::function<std::string()>& fn,
                         const std::function<bool(const std::exception&)>& retryable) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const std::exception& e) {
            if (attempt >= policy.max_attempts || !retryable(e)) throw;
        }
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(static_cast<long>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
}

void RateLimiter::acquire() {
    if (min_interval_.count() <= 0) return;
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    if (last_ && now - *last_ < min_interval_) std::this_thread::sleep_for(min_interval_ - (now - *last_));
    last_ = std::chrono::steady_clock::now();
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::optional<json> ResponseCache::get(const std::string& key) const {
    const auto path = dir_ / (key + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
        return json::parse(read_file(path));
    } catch (const json::exception&) {
        return std::nullopt;  // treat a corrupt entry as a miss
    }
}

void ResponseCache::put(const std::string& key, const json& value) const {
    write_file_atomic(dir_ / (key + ".json"), value.dump(2) + "\n");
}

}  // namespace hazard::eval
