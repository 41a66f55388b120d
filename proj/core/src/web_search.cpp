#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "arqa/retrieval.hpp"

namespace arqa {

struct WebSearchRetriever::Impl {
    WebSearchConfig config;
    std::string api_key;
};

WebSearchRetriever::WebSearchRetriever(WebSearchConfig config)
    : impl_(std::make_unique<Impl>()) {
    if (config.base_url.empty()) {
        throw ConfigError("WebSearchRetriever: base_url is empty");
    }
    if (!config.api_key_env.empty()) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("environment variable " + config.api_key_env +
                              " is not set (required by the search provider)");
        }
        impl_->api_key = key;
    }
    impl_->config = std::move(config);
}

WebSearchRetriever::~WebSearchRetriever() = default;

std::vector<EvidenceSnippet> WebSearchRetriever::fetch(const SearchQuery& query, int m) {
    const WebSearchConfig& cfg = impl_->config;

    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    httplib::Headers headers;
    if (!impl_->api_key.empty()) {
        headers.emplace(cfg.api_key_header, impl_->api_key);
    }

    std::string body = nlohmann::json{{"q", query.text}}.dump();
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
            throw RetrieverUnavailable("search endpoint rejected request: HTTP " +
                                       std::to_string(result->status));
        }

        nlohmann::json doc = nlohmann::json::parse(result->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("organic_results") ||
            !doc["organic_results"].is_array()) {
            throw RetrieverUnavailable("search endpoint returned no organic_results array");
        }
        std::vector<EvidenceSnippet> out;
        for (const auto& item : doc["organic_results"]) {
            if (static_cast<int>(out.size()) >= m) break;
            std::string title = item.value("title", "");
            std::string snippet_text = item.value("snippet", "");
            if (snippet_text.empty() && title.empty()) continue;
            EvidenceSnippet snippet;
            snippet.text = title.empty() ? snippet_text
                                         : (snippet_text.empty() ? title
                                                                 : title + ": " + snippet_text);
            snippet.source = item.value("link", "");
            snippet.rank = static_cast<int>(out.size()) + 1;
            snippet.query_index = query.origin_variant_index;
            out.push_back(std::move(snippet));
        }
        return out;
    }
    throw RetrieverUnavailable("search endpoint unreachable after " +
                               std::to_string(cfg.retry.max_retries + 1) + " attempts (" +
                               last_error + ")");
}

}  // namespace arqa
