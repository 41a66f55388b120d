#include "arqa/cache.hpp"

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

FinishReason parse_finish_reason(const std::string& name) {
    if (name == "complete") return FinishReason::complete;
    if (name == "truncated") return FinishReason::truncated;
    return FinishReason::error;
}

bool is_hex_digest(const std::string& digest) {
    if (digest.size() != 64) return false;
    for (char c : digest) {
        bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!ok) return false;
    }
    return true;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path directory)
    : directory_(std::move(directory)) {
    std::error_code ec;
    std::filesystem::create_directories(directory_, ec);
    if (ec) {
        throw ConfigError("cannot create cache directory " + directory_.string() + ": " + ec.message());
    }
}

std::filesystem::path ResponseCache::entry_path(const std::string& digest) const {
    if (!is_hex_digest(digest)) {
        throw Error("malformed cache digest: " + digest);
    }
    return directory_ / (digest + ".json");
}

std::optional<ChatResponse> ResponseCache::get(const std::string& digest) const {
    std::filesystem::path path = entry_path(digest);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        return std::nullopt;
    }
    nlohmann::json entry = nlohmann::json::parse(text::read_text_file(path), nullptr, false);
    if (entry.is_discarded() || !entry.contains("text")) {
        throw Error("corrupt cache entry: " + path.string());
    }
    ChatResponse response;
    response.text = entry.at("text").get<std::string>();
    response.finish_reason = parse_finish_reason(entry.value("finish_reason", "complete"));
    response.provenance = Provenance::cache;
    return response;
}

void ResponseCache::put(const std::string& digest, const ChatResponse& response) {
    if (response.finish_reason == FinishReason::error) {
        return;
    }
    std::filesystem::path path = entry_path(digest);
    std::lock_guard<std::mutex> lock(write_mutex_);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
        return;
    }
    nlohmann::json entry = {
        {"request_digest", digest},
        {"text", response.text},
        {"finish_reason", finish_reason_name(response.finish_reason)},
        {"created_at", text::utc_now_iso8601()},
    };
    text::write_text_file_atomic(path, entry.dump(2) + "\n");
}

bool ResponseCache::contains(const std::string& digest) const {
    std::error_code ec;
    return std::filesystem::exists(entry_path(digest), ec);
}

std::size_t ResponseCache::entry_count() const {
    std::size_t n = 0;
    std::error_code ec;
    for (const auto& de : std::filesystem::directory_iterator(directory_, ec)) {
        if (de.path().extension() == ".json") ++n;
    }
    return n;
}

std::size_t ResponseCache::purge() {
    std::lock_guard<std::mutex> lock(write_mutex_);
    std::size_t n = 0;
    std::error_code ec;
    for (const auto& de : std::filesystem::directory_iterator(directory_, ec)) {
        if (de.path().extension() != ".json") continue;
        std::error_code rm_ec;
        if (std::filesystem::remove(de.path(), rm_ec)) ++n;
    }
    return n;
}

}  // namespace arqa
