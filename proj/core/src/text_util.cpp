#include "text_util.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>

#include <openssl/evp.h>

#include "arqa/errors.hpp"

namespace arqa::text {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && is_space(s[begin])) ++begin;
    while (end > begin && is_space(s[end - 1])) --end;
    return std::string(s.substr(begin, end - begin));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw Error("format_double: to_chars failed");
    }
    return std::string(buf, ptr);
}

std::vector<std::pair<std::string, std::size_t>> words_with_offsets(std::string_view s) {
    std::vector<std::pair<std::string, std::size_t>> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_alnum(s[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < s.size() && is_alnum(s[i])) ++i;
        out.emplace_back(to_lower(s.substr(start, i - start)), start);
    }
    return out;
}

std::string last_sentence(std::string_view s) {
    std::string trimmed = trim(s);
    if (trimmed.empty()) return trimmed;

    // Find the last terminator that still has content after it.
    auto is_term = [](char c) { return c == '.' || c == '!' || c == '?'; };
    std::size_t cut = std::string::npos;
    for (std::size_t i = trimmed.size(); i-- > 0;) {
        if (!is_term(trimmed[i])) continue;
        std::string tail = trim(std::string_view(trimmed).substr(i + 1));
        if (!tail.empty()) {
            cut = i + 1;
            break;
        }
    }
    if (cut == std::string::npos) {
        // No terminator with trailing content; take the final sentence body
        // by cutting at the second-to-last terminator instead.
        std::size_t last_term = std::string::npos;
        for (std::size_t i = trimmed.size(); i-- > 0;) {
            if (is_term(trimmed[i])) {
                last_term = i;
                break;
            }
        }
        if (last_term == std::string::npos) return trimmed;
        std::size_t prev = std::string::npos;
        for (std::size_t i = last_term; i-- > 0;) {
            if (is_term(trimmed[i])) {
                prev = i;
                break;
            }
        }
        if (prev == std::string::npos) return trim(std::string_view(trimmed).substr(0, last_term + 1));
        return trim(std::string_view(trimmed).substr(prev + 1, last_term - prev));
    }
    return trim(std::string_view(trimmed).substr(cut));
}

std::string strip_enumeration(std::string_view line) {
    std::string s = trim(line);
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '-' || s[i] == '*')) {
        ++i;
    } else {
        std::size_t d = i;
        while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
        if (d > i && d < s.size() && (s[d] == '.' || s[d] == ')')) {
            i = d + 1;
        }
    }
    return trim(std::string_view(s).substr(i));
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int md_len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &md_len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256_hex: digest computation failed");
    }
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(md_len * 2);
    for (unsigned int i = 0; i < md_len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0x0f]);
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open file for reading: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open file for writing: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw Error("short write to: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
    }
}

std::string utc_now_iso8601() {
    using namespace std::chrono;
    auto now = time_point_cast<seconds>(system_clock::now());
    std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[72];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

}  // namespace arqa::text
