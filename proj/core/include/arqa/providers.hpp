#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "arqa/cache.hpp"
#include "arqa/chat.hpp"

namespace arqa {

// Uniform chat-model abstraction.  Implementations must be safely callable
// from concurrent pipeline tasks.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Process-wide count of network attempts made by any live backend (chat or
// search).  Closed-world tests assert this never moves.
std::uint64_t transport_attempts();

namespace detail {
void note_transport_attempt();
}

// Deterministic offline backend.  Requests are matched by exact cache-key
// digest first; if no entry exists, regex fallback rules are tried in order
// against the concatenated message contents.  A request nothing matches
// raises ScriptMiss — tests must never paper over an incomplete script.
class ScriptedBackend : public ChatBackend {
public:
    ScriptedBackend() = default;

    ChatResponse complete(const ChatRequest& request) override;

    // Registers the reply for this exact request (keyed by digest).
    void add_exact(const ChatRequest& request, const std::string& reply);
    void add_exact_digest(const std::string& digest, const std::string& reply);

    // Fallback rule: ECMAScript regex searched against the requests'
    // messages joined by newlines.  First matching rule wins.
    void add_rule(const std::string& pattern, const std::string& reply);

    std::size_t entry_count() const;

    // Digests in the order they were served (both exact and rule hits).
    std::vector<std::string> served() const;
    void clear_served();

    // Script file round-trip: {"entries": {digest: reply}, "rules":
    // [{"pattern":…, "reply":…}]}.  Entries may carry a "note" alongside
    // the reply for human readers; notes are ignored on load.
    void save(const std::filesystem::path& path) const;
    static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& path);

    // Debug notes for save(): digest → short description of the request.
    void annotate(const std::string& digest, const std::string& note);

    // Removes one exact entry; used by closure-violation tests.
    bool remove_entry(const std::string& digest);

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> entries_;
    std::map<std::string, std::string> notes_;
    std::vector<std::pair<std::string, std::string>> rules_;
    std::vector<std::string> served_;
};

// Decorator that consults a ResponseCache before the wrapped backend and
// stores every fresh response before returning it.
class CachedBackend : public ChatBackend {
public:
    CachedBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache);
    ChatResponse complete(const ChatRequest& request) override;

private:
    std::shared_ptr<ChatBackend> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

// Call accounting, safe under concurrency.
struct CallMeter {
    std::atomic<std::uint64_t> total{0};
    std::atomic<std::uint64_t> live{0};
    std::atomic<std::uint64_t> cache_hits{0};
    std::atomic<std::uint64_t> script{0};
    std::atomic<std::uint64_t> errors{0};

    void record(const ChatResponse& response);
};

// Decorator that counts calls into an external meter.
class MeteredBackend : public ChatBackend {
public:
    MeteredBackend(std::shared_ptr<ChatBackend> inner, CallMeter& meter);
    ChatResponse complete(const ChatRequest& request) override;

private:
    std::shared_ptr<ChatBackend> inner_;
    CallMeter& meter_;
};

// Per-slot result of a batch: either a response or the error that slot hit.
struct CompletionOutcome {
    std::optional<ChatResponse> response;
    std::string error;

    bool ok() const { return response.has_value(); }
    const std::string& text() const;
};

// Dispatches independent requests concurrently (bounded by parallelism;
// 0 means one task per request) and returns outcomes in request order.
// One failed slot never aborts its siblings.
std::vector<CompletionOutcome> complete_batch(ChatBackend& backend,
                                              const std::vector<ChatRequest>& requests,
                                              std::size_t parallelism = 0);

// Retry schedule for live backends: after a transport or 5xx failure the
// call is retried up to max_retries times, sleeping
// initial_backoff_ms * 2^i before retry i.  Defaults give 1s/2s/4s.
struct RetryPolicy {
    int max_retries = 3;
    int initial_backoff_ms = 1000;
};

struct HttpBackendConfig {
    std::string base_url;                       // e.g. http://localhost:8089
    std::string path = "/v1/chat/completions";  // POST target
    std::string api_key_env;                    // env var holding the key; empty = no auth
    std::string auth_header = "Authorization";
    std::string auth_scheme = "Bearer ";        // prefixed to the key
    int timeout_ms = 30000;
    RetryPolicy retry;
};

// Generic JSON chat-completion client: POST {model, messages, temperature,
// seed?}, parse {choices:[{message:{content}, finish_reason}]}.
class HttpBackend : public ChatBackend {
public:
    // Throws ConfigError (naming the variable) when api_key_env is set but
    // absent from the environment.
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    ChatResponse complete(const ChatRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace arqa
