#pragma once

// Internal helpers shared across the library.  Not installed.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace arqa::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Shortest round-trip decimal form of a double (std::to_chars).  Used
// everywhere a double participates in a digest or a serialized artifact so
// that the rendering never depends on locale or stream state.
std::string format_double(double value);

// Lowercased alphanumeric runs with the byte offset where each run starts.
// ASCII letters/digits only; everything else separates tokens.
std::vector<std::pair<std::string, std::size_t>> words_with_offsets(std::string_view s);

// Last sentence of a paragraph: the tail after the final '.', '!' or '?'
// that is followed by at least one non-space character; otherwise the tail
// after the final terminator; otherwise the whole trimmed string.
std::string last_sentence(std::string_view s);

// Strips leading list markers ("1.", "2)", "-", "*") and surrounding
// whitespace from one line of an enumerated reply.
std::string strip_enumeration(std::string_view line);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

std::string read_text_file(const std::filesystem::path& path);

// Writes via a sibling temp file and renames into place so that readers
// never observe a partial write.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string utc_now_iso8601();

}  // namespace arqa::text
