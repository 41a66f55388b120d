#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "arqa/chat.hpp"

namespace arqa {

// Append-only on-disk store of chat responses keyed by request digest.
// One JSON file per entry; writes are atomic (temp file + rename) and
// first-write-wins, so concurrent writers cannot corrupt or flip an entry.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path directory);

    // Returns the stored response with provenance=cache, or nullopt.
    std::optional<ChatResponse> get(const std::string& digest) const;

    // Stores the response unless an entry already exists.  Error responses
    // are never cached: a transient failure must not poison future runs.
    void put(const std::string& digest, const ChatResponse& response);

    bool contains(const std::string& digest) const;
    std::size_t entry_count() const;

    // Deletes every entry.  Returns the number removed.
    std::size_t purge();

    const std::filesystem::path& directory() const { return directory_; }

private:
    std::filesystem::path entry_path(const std::string& digest) const;

    std::filesystem::path directory_;
    mutable std::mutex write_mutex_;
};

}  // namespace arqa
