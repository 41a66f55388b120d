#include "arqa/chat.hpp"

#include <cmath>

#include "arqa/errors.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

constexpr char kFieldSep = '\x1f';
constexpr char kRecordSep = '\x1e';

void append_length_prefixed(std::string& out, const std::string& s) {
    out += std::to_string(s.size());
    out += kFieldSep;
    out += s;
}

}  // namespace

const char* role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

const char* finish_reason_name(FinishReason r) {
    switch (r) {
        case FinishReason::complete: return "complete";
        case FinishReason::truncated: return "truncated";
        case FinishReason::error: return "error";
    }
    return "error";
}

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::live: return "live";
        case Provenance::cache: return "cache";
        case Provenance::script: return "script";
    }
    return "live";
}

void ChatRequest::validate() const {
    if (model_id.empty()) {
        throw ConfigError("ChatRequest: model_id is empty");
    }
    if (messages.empty()) {
        throw ConfigError("ChatRequest: messages list is empty");
    }
    Role first = messages.front().role;
    if (first != Role::system && first != Role::user) {
        throw ConfigError("ChatRequest: first message must be system or user");
    }
    if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0) {
        throw ConfigError("ChatRequest: temperature must lie in [0, 2]");
    }
}

std::string canonical_request_bytes(const ChatRequest& request) {
    std::string out = "arqa.chat.v1\n";
    append_length_prefixed(out, request.model_id);
    out += kRecordSep;
    for (const Message& m : request.messages) {
        out += role_name(m.role);
        out += kFieldSep;
        append_length_prefixed(out, m.content);
        out += kRecordSep;
    }
    out += text::format_double(request.temperature);
    out += kRecordSep;
    out += request.seed ? std::to_string(*request.seed) : std::string("none");
    out += kRecordSep;
    out += std::to_string(request.sample_index);
    return out;
}

std::string request_digest(const ChatRequest& request) {
    return text::sha256_hex(canonical_request_bytes(request));
}

}  // namespace arqa
