#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "arqa/chat.hpp"
#include "arqa/errors.hpp"
#include "arqa/providers.hpp"

using namespace arqa;
using nlohmann::json;

namespace {

// Minimal local chat endpoint recording every request body and header.
class ChatServer {
public:
    ChatServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
            {
                std::lock_guard<std::mutex> lock(mutex_);
                bodies_.push_back(req.body);
                auth_headers_.push_back(req.get_header_value("Authorization"));
            }
            int n = ++hits_;
            if (n <= fail_first_n_) {
                res.status = 500;
                res.set_content("overloaded", "text/plain");
                return;
            }
            res.status = status_;
            res.set_content(reply_, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~ChatServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    void set_reply(std::string reply, int status = 200) {
        reply_ = std::move(reply);
        status_ = status;
    }
    void fail_first(int n) { fail_first_n_ = n; }

    int hits() const { return hits_.load(); }
    std::vector<std::string> bodies() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return bodies_;
    }
    std::vector<std::string> auth_headers() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return auth_headers_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    int fail_first_n_ = 0;
    int status_ = 200;
    std::string reply_ = R"({"choices":[{"message":{"content":"ok"},"finish_reason":"stop"}]})";
    mutable std::mutex mutex_;
    std::vector<std::string> bodies_;
    std::vector<std::string> auth_headers_;
};

ChatRequest sample_request() {
    ChatRequest r;
    r.model_id = "answerer";
    r.messages = {{Role::system, "Answer briefly."}, {Role::user, "What is 2+2?"}};
    r.temperature = 0.5;
    return r;
}

HttpBackendConfig fast_config(const std::string& url) {
    HttpBackendConfig cfg;
    cfg.base_url = url;
    cfg.retry.max_retries = 3;
    cfg.retry.initial_backoff_ms = 20;
    cfg.timeout_ms = 5000;
    return cfg;
}

}  // namespace

TEST_SUITE("http_backend") {

TEST_CASE("wire format carries model messages temperature and optional seed") {
    ChatServer server;
    HttpBackend backend(fast_config(server.url()));

    ChatRequest request = sample_request();
    request.sample_index = 7;  // cache-key only, must stay off the wire
    ChatResponse response = backend.complete(request);
    CHECK(response.text == "ok");
    CHECK(response.provenance == Provenance::live);
    CHECK(response.finish_reason == FinishReason::complete);

    ChatRequest seeded = sample_request();
    seeded.seed = 1234;
    backend.complete(seeded);

    auto bodies = server.bodies();
    REQUIRE(bodies.size() == 2);

    json first = json::parse(bodies[0]);
    CHECK(first.at("model") == "answerer");
    CHECK(first.at("temperature").get<double>() == doctest::Approx(0.5));
    REQUIRE(first.at("messages").size() == 2);
    CHECK(first["messages"][0].at("role") == "system");
    CHECK(first["messages"][0].at("content") == "Answer briefly.");
    CHECK(first["messages"][1].at("role") == "user");
    CHECK_FALSE(first.contains("seed"));
    CHECK_FALSE(first.contains("sample_index"));

    json second = json::parse(bodies[1]);
    CHECK(second.at("seed").get<std::uint64_t>() == 1234);
}

TEST_CASE("api key is read from the environment and sent as a bearer header") {
    ChatServer server;
    setenv("ARQA_TEST_CHAT_KEY", "sk-test-123", 1);
    HttpBackendConfig cfg = fast_config(server.url());
    cfg.api_key_env = "ARQA_TEST_CHAT_KEY";
    HttpBackend backend(cfg);
    backend.complete(sample_request());
    unsetenv("ARQA_TEST_CHAT_KEY");

    auto headers = server.auth_headers();
    REQUIRE(headers.size() == 1);
    CHECK(headers[0] == "Bearer sk-test-123");
}

TEST_CASE("a configured but unset key variable is a config error naming it") {
    unsetenv("ARQA_TEST_MISSING_KEY");
    HttpBackendConfig cfg = fast_config("http://127.0.0.1:1");
    cfg.api_key_env = "ARQA_TEST_MISSING_KEY";
    try {
        HttpBackend backend(cfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("ARQA_TEST_MISSING_KEY") != std::string::npos);
    }
}

TEST_CASE("server errors are retried with exponential backoff until success") {
    ChatServer server;
    server.fail_first(2);
    HttpBackendConfig cfg = fast_config(server.url());
    cfg.retry.initial_backoff_ms = 30;

    std::uint64_t attempts_before = transport_attempts();
    auto start = std::chrono::steady_clock::now();
    HttpBackend backend(cfg);
    ChatResponse response = backend.complete(sample_request());
    auto elapsed = std::chrono::steady_clock::now() - start;

    CHECK(response.text == "ok");
    CHECK(server.hits() == 3);
    CHECK(transport_attempts() - attempts_before == 3);
    // Two retries: 30 ms then 60 ms of backoff before them.
    CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() >= 90);
}

TEST_CASE("retries exhaust into a provider error") {
    ChatServer server;
    server.fail_first(1000);
    HttpBackendConfig cfg = fast_config(server.url());
    cfg.retry.max_retries = 1;
    cfg.retry.initial_backoff_ms = 5;

    std::uint64_t attempts_before = transport_attempts();
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete(sample_request()), ProviderError);
    CHECK(transport_attempts() - attempts_before == 2);  // initial try + 1 retry
}

TEST_CASE("client errors are terminal and never retried") {
    ChatServer server;
    server.set_reply("forbidden", 403);
    std::uint64_t attempts_before = transport_attempts();
    HttpBackend backend(fast_config(server.url()));
    CHECK_THROWS_AS(backend.complete(sample_request()), ProviderError);
    CHECK(transport_attempts() - attempts_before == 1);
}

TEST_CASE("length finish reason maps to truncated") {
    ChatServer server;
    server.set_reply(
        R"({"choices":[{"message":{"content":"cut off"},"finish_reason":"length"}]})");
    HttpBackend backend(fast_config(server.url()));
    ChatResponse response = backend.complete(sample_request());
    CHECK(response.text == "cut off");
    CHECK(response.finish_reason == FinishReason::truncated);
}

TEST_CASE("token usage is surfaced when the endpoint reports it") {
    ChatServer server;
    server.set_reply(R"({"choices":[{"message":{"content":"ok"}}],)"
                     R"("usage":{"prompt_tokens":11,"completion_tokens":3}})");
    HttpBackend backend(fast_config(server.url()));
    ChatResponse response = backend.complete(sample_request());
    REQUIRE(response.usage.has_value());
    CHECK(response.usage->prompt_tokens == 11);
    CHECK(response.usage->completion_tokens == 3);
    CHECK(response.finish_reason == FinishReason::complete);  // missing reason defaults
}

TEST_CASE("malformed success payloads are provider errors without retries") {
    ChatServer server;
    server.set_reply("{}");
    std::uint64_t attempts_before = transport_attempts();
    HttpBackend backend(fast_config(server.url()));
    CHECK_THROWS_AS(backend.complete(sample_request()), ProviderError);
    CHECK(transport_attempts() - attempts_before == 1);
}

TEST_CASE("an unreachable endpoint exhausts retries into a provider error") {
    HttpBackendConfig cfg = fast_config("http://127.0.0.1:1");
    cfg.retry.max_retries = 1;
    cfg.retry.initial_backoff_ms = 1;
    cfg.timeout_ms = 200;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete(sample_request()), ProviderError);
}

TEST_CASE("invalid requests are rejected before any transport attempt") {
    std::uint64_t attempts_before = transport_attempts();
    HttpBackend backend(fast_config("http://127.0.0.1:1"));
    ChatRequest bad;
    bad.model_id = "answerer";  // no messages
    CHECK_THROWS_AS(backend.complete(bad), ConfigError);
    CHECK(transport_attempts() == attempts_before);
}

}  // TEST_SUITE
