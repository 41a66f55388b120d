#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace arqa {

enum class Role { system, user, assistant };

const char* role_name(Role role);

struct Message {
    Role role = Role::user;
    std::string content;
};

// One chat-completion request.  sample_index distinguishes repeated
// high-temperature draws of the same prompt; it participates in the cache
// key but is never sent over the wire.
struct ChatRequest {
    std::string model_id;
    std::vector<Message> messages;
    double temperature = 0.0;
    std::optional<std::uint64_t> seed;
    std::uint32_t sample_index = 0;

    // Throws ConfigError on violation: empty model_id, no messages, first
    // message not system/user, temperature outside [0, 2] or non-finite.
    void validate() const;
};

enum class FinishReason { complete, truncated, error };
enum class Provenance { live, cache, script };

const char* finish_reason_name(FinishReason r);
const char* provenance_name(Provenance p);

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::complete;
    std::optional<TokenUsage> usage;
    Provenance provenance = Provenance::live;
};

// Unambiguous byte serialization of everything the cache key covers.
// Fields are length-prefixed or separated by control bytes so that no two
// distinct requests can collide textually.
std::string canonical_request_bytes(const ChatRequest& request);

// Lowercase hex SHA-256 of canonical_request_bytes.
std::string request_digest(const ChatRequest& request);

}  // namespace arqa
