#include "arqa/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace arqa {

namespace {

constexpr double kZeroCountSmoothing = 1e-12;

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> curr(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens,
                                                  std::size_t n) {
    std::unordered_map<std::string, int> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            if (j > 0) key += '\x1f';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (c >= 0x80) {
            // Non-ASCII UTF-8 byte: part of a token, kept verbatim.
            current.push_back(static_cast<char>(c));
        } else if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double rouge_l(const std::string& candidate, const std::vector<std::string>& references) {
    std::vector<std::string> cand = tokenize(candidate);
    if (cand.empty()) return 0.0;

    double best = 0.0;
    for (const std::string& reference : references) {
        std::vector<std::string> ref = tokenize(reference);
        if (ref.empty()) continue;
        double lcs = static_cast<double>(lcs_length(cand, ref));
        if (lcs == 0.0) continue;
        double precision = lcs / static_cast<double>(cand.size());
        double recall = lcs / static_cast<double>(ref.size());
        double f = 2.0 * precision * recall / (precision + recall);
        best = std::max(best, f);
    }
    return best;
}

double bleu(const std::string& candidate, const std::vector<std::string>& references) {
    std::vector<std::string> cand = tokenize(candidate);
    if (cand.empty()) return 0.0;

    std::vector<std::vector<std::string>> refs;
    for (const std::string& reference : references) {
        std::vector<std::string> tokens = tokenize(reference);
        if (!tokens.empty()) refs.push_back(std::move(tokens));
    }
    if (refs.empty()) return 0.0;

    std::size_t max_order = std::min<std::size_t>(4, cand.size());
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_order; ++n) {
        std::unordered_map<std::string, int> cand_counts = ngram_counts(cand, n);
        std::unordered_map<std::string, int> max_ref_counts;
        for (const auto& ref : refs) {
            for (const auto& [gram, count] : ngram_counts(ref, n)) {
                int& slot = max_ref_counts[gram];
                slot = std::max(slot, count);
            }
        }
        long matches = 0;
        long total = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            auto it = max_ref_counts.find(gram);
            if (it != max_ref_counts.end()) {
                matches += std::min(count, it->second);
            }
        }
        double p = matches > 0 ? static_cast<double>(matches) / static_cast<double>(total)
                               : kZeroCountSmoothing;
        log_sum += std::log(p);
    }
    double geo_mean = std::exp(log_sum / static_cast<double>(max_order));

    // Brevity penalty against the reference length closest to the
    // candidate's, ties toward the shorter reference.
    std::size_t closest = refs.front().size();
    for (const auto& ref : refs) {
        std::size_t len = ref.size();
        auto dist = [&](std::size_t r) {
            return r > cand.size() ? r - cand.size() : cand.size() - r;
        };
        if (dist(len) < dist(closest) || (dist(len) == dist(closest) && len < closest)) {
            closest = len;
        }
    }
    double bp = cand.size() < closest
                    ? std::exp(1.0 - static_cast<double>(closest) / static_cast<double>(cand.size()))
                    : 1.0;
    return bp * geo_mean;
}

const char* yesno_name(YesNo value) {
    switch (value) {
        case YesNo::yes: return "yes";
        case YesNo::no: return "no";
        case YesNo::unparsed: return "unparsed";
    }
    return "unparsed";
}

YesNo extract_yesno(const std::string& answer) {
    std::vector<std::string> tokens = tokenize(answer);

    std::ptrdiff_t last_marker = -1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == "answer") last_marker = static_cast<std::ptrdiff_t>(i);
    }
    if (last_marker >= 0) {
        for (std::size_t i = static_cast<std::size_t>(last_marker) + 1; i < tokens.size(); ++i) {
            if (tokens[i] == "yes") return YesNo::yes;
            if (tokens[i] == "no") return YesNo::no;
        }
    }
    for (const std::string& token : tokens) {
        if (token == "yes") return YesNo::yes;
        if (token == "no") return YesNo::no;
    }
    return YesNo::unparsed;
}

}  // namespace arqa
