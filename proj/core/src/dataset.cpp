#include <algorithm>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "arqa/pipeline.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

// Unbiased draw in [0, bound) from a raw 64-bit generator; rejection keeps
// the result identical on every platform.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          (std::numeric_limits<std::uint64_t>::max() % bound);
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % bound;
}

}  // namespace

std::vector<DatasetRecord> load_dataset_jsonl(const std::filesystem::path& path) {
    std::string content = text::read_text_file(path);
    std::vector<DatasetRecord> records;
    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        std::string trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(trimmed, nullptr, false);
        std::string where = path.string() + ":" + std::to_string(line_no);
        if (obj.is_discarded() || !obj.is_object()) {
            throw ConfigError(where + ": not a JSON object");
        }
        DatasetRecord record;
        if (!obj.contains("id") || !obj.contains("question")) {
            throw ConfigError(where + ": record needs id and question");
        }
        record.id = obj.at("id").is_string() ? obj.at("id").get<std::string>()
                                             : obj.at("id").dump();
        record.question = obj.at("question").get<std::string>();
        if (obj.contains("gold_label")) {
            std::string label = obj.at("gold_label").get<std::string>();
            if (label != "yes" && label != "no") {
                throw ConfigError(where + ": gold_label must be \"yes\" or \"no\"");
            }
            record.gold_label = label;
        }
        if (obj.contains("gold_answers")) {
            for (const auto& answer : obj.at("gold_answers")) {
                record.gold_answers.push_back(answer.get<std::string>());
            }
        }
        if (record.gold_label.has_value() == !record.gold_answers.empty()) {
            throw ConfigError(where + ": exactly one of gold_label / gold_answers required");
        }
        record.category = obj.value("category", "");
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<DatasetRecord> sample_records(const std::vector<DatasetRecord>& records,
                                          std::size_t n, std::uint64_t seed) {
    if (n >= records.size()) {
        return records;
    }
    std::vector<std::size_t> indices(records.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

    // Partial Fisher-Yates: the first n slots end up holding the sample.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(
                                bounded_draw(rng, static_cast<std::uint64_t>(indices.size() - i)));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(n);
    std::sort(indices.begin(), indices.end());

    std::vector<DatasetRecord> out;
    out.reserve(n);
    for (std::size_t i : indices) {
        out.push_back(records[i]);
    }
    return out;
}

}  // namespace arqa
