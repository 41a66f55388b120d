#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "arqa/providers.hpp"

namespace arqa {

namespace {

nlohmann::json to_wire_body(const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    for (const Message& m : request.messages) {
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    nlohmann::json body = {
        {"model", request.model_id},
        {"messages", std::move(messages)},
        {"temperature", request.temperature},
    };
    if (request.seed) {
        body["seed"] = *request.seed;
    }
    return body;
}

ChatResponse parse_wire_response(const std::string& payload) {
    nlohmann::json doc = nlohmann::json::parse(payload, nullptr, false);
    if (doc.is_discarded()) {
        throw ProviderError("chat endpoint returned unparseable JSON");
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
        throw ProviderError("chat endpoint response has no choices");
    }
    const nlohmann::json& choice = doc["choices"][0];
    ChatResponse out;
    out.text = choice.at("message").at("content").get<std::string>();
    std::string reason = choice.value("finish_reason", "stop");
    out.finish_reason = (reason == "length") ? FinishReason::truncated : FinishReason::complete;
    if (doc.contains("usage") && doc["usage"].is_object()) {
        TokenUsage usage;
        usage.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
        usage.completion_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
        out.usage = usage;
    }
    out.provenance = Provenance::live;
    return out;
}

}  // namespace

struct HttpBackend::Impl {
    HttpBackendConfig config;
    std::string api_key;
};

HttpBackend::HttpBackend(HttpBackendConfig config) : impl_(std::make_unique<Impl>()) {
    if (config.base_url.empty()) {
        throw ConfigError("HttpBackend: base_url is empty");
    }
    if (!config.api_key_env.empty()) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("environment variable " + config.api_key_env +
                              " is not set (required by the chat provider)");
        }
        impl_->api_key = key;
    }
    impl_->config = std::move(config);
}

HttpBackend::~HttpBackend() = default;

ChatResponse HttpBackend::complete(const ChatRequest& request) {
    request.validate();
    const HttpBackendConfig& cfg = impl_->config;

    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    httplib::Headers headers;
    if (!impl_->api_key.empty()) {
        headers.emplace(cfg.auth_header, cfg.auth_scheme + impl_->api_key);
    }

    std::string body = to_wire_body(request).dump();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.retry.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(cfg.retry.initial_backoff_ms << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        detail::note_transport_attempt();
        httplib::Result result = client.Post(cfg.path, headers, body, "application/json");
        if (!result) {
            last_error = "transport failure: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status >= 500) {
            last_error = "server error: HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status < 200 || result->status >= 300) {
            // Client errors are never transient; do not retry.
            throw ProviderError("chat endpoint rejected request: HTTP " +
                                std::to_string(result->status));
        }
        return parse_wire_response(result->body);
    }
    throw ProviderError("chat endpoint unreachable after " +
                        std::to_string(cfg.retry.max_retries + 1) + " attempts (" + last_error + ")");
}

}  // namespace arqa
