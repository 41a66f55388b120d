#include "arqa/retrieval.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "arqa/prompt_factory.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",   "an",  "the",  "is",    "are",  "was",  "were", "of",   "for",
        "to",  "in",  "on",   "at",    "and",  "or",   "what", "who",  "whom",
        "when", "where", "which", "how", "why", "do",   "does", "did",  "it",
        "its", "this", "that", "be",   "by",   "with", "as",   "not",
    };
    return words;
}

std::vector<std::string> content_tokens(const std::string& s) {
    std::vector<std::string> tokens;
    for (const auto& [word, offset] : text::words_with_offsets(s)) {
        (void)offset;
        if (stopwords().count(word) == 0) {
            tokens.push_back(word);
        }
    }
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

std::string normalize_for_dedup(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

LocalCorpusRetriever::LocalCorpusRetriever(std::filesystem::path corpus_dir) {
    std::filesystem::path index_path = corpus_dir / "index.json";
    std::error_code ec;
    if (!std::filesystem::exists(index_path, ec)) {
        throw ConfigError("local corpus has no index manifest: " + index_path.string());
    }
    nlohmann::json index = nlohmann::json::parse(text::read_text_file(index_path), nullptr, false);
    if (index.is_discarded() || !index.contains("documents")) {
        throw ConfigError("malformed corpus index: " + index_path.string());
    }
    for (const auto& id_value : index.at("documents")) {
        std::string id = id_value.get<std::string>();
        std::filesystem::path doc_path = corpus_dir / (id + ".json");
        nlohmann::json doc = nlohmann::json::parse(text::read_text_file(doc_path), nullptr, false);
        if (doc.is_discarded() || !doc.contains("text")) {
            throw ConfigError("malformed corpus document: " + doc_path.string());
        }
        Doc entry;
        entry.id = doc.value("id", id);
        entry.title = doc.value("title", "");
        entry.text = doc.at("text").get<std::string>();
        entry.tokens = content_tokens(entry.title + " " + entry.text);
        docs_.push_back(std::move(entry));
    }
    std::sort(docs_.begin(), docs_.end(),
              [](const Doc& a, const Doc& b) { return a.id < b.id; });
}

std::vector<EvidenceSnippet> LocalCorpusRetriever::fetch(const SearchQuery& query, int m) {
    std::vector<std::string> query_tokens = content_tokens(query.text);
    if (query_tokens.empty() || m < 1) {
        return {};
    }

    // Distinct-token overlap; docs_ is id-sorted, and the stable sort below
    // keeps that order among equal scores, giving the lexicographic
    // tie-break for free.
    std::vector<std::pair<int, const Doc*>> scored;
    for (const Doc& doc : docs_) {
        int overlap = 0;
        for (const std::string& token : query_tokens) {
            if (std::binary_search(doc.tokens.begin(), doc.tokens.end(), token)) {
                ++overlap;
            }
        }
        if (overlap > 0) {
            scored.emplace_back(overlap, &doc);
        }
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    std::vector<EvidenceSnippet> out;
    for (const auto& [score, doc] : scored) {
        (void)score;
        if (static_cast<int>(out.size()) >= m) break;
        EvidenceSnippet snippet;
        snippet.text = doc->text;
        snippet.source = doc->id;
        snippet.rank = static_cast<int>(out.size()) + 1;
        snippet.query_index = query.origin_variant_index;
        out.push_back(std::move(snippet));
    }
    return out;
}

std::vector<SearchQuery> reformulate(const std::vector<std::string>& variants,
                                     ChatBackend& provider, const PromptFactory& prompts,
                                     std::size_t parallelism) {
    if (variants.empty()) {
        throw LengthMismatch("reformulate: empty variant list");
    }
    std::vector<ChatRequest> requests;
    requests.reserve(variants.size());
    for (const std::string& v : variants) {
        requests.push_back(prompts.reformulate(v));
    }
    std::vector<CompletionOutcome> outcomes = complete_batch(provider, requests, parallelism);

    std::vector<SearchQuery> queries(variants.size());
    for (std::size_t j = 0; j < variants.size(); ++j) {
        queries[j].origin_variant_index = static_cast<int>(j);
        std::string reformulated =
            outcomes[j].ok() ? text::trim(outcomes[j].text()) : std::string();
        // Fallback rule: a query must always exist.
        queries[j].text = reformulated.empty() ? variants[j] : reformulated;
    }
    return queries;
}

EvidenceBundle search(const std::vector<SearchQuery>& queries, Retriever& retriever, int m,
                      int budget_chars, std::size_t parallelism) {
    std::vector<std::vector<EvidenceSnippet>> per_query(queries.size());

    std::size_t wave = parallelism == 0 ? queries.size() : parallelism;
    for (std::size_t begin = 0; begin < queries.size(); begin += wave) {
        std::size_t end = std::min(begin + wave, queries.size());
        std::vector<std::future<std::vector<EvidenceSnippet>>> futures;
        for (std::size_t i = begin; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, [&retriever, &queries, i, m] {
                return retriever.fetch(queries[i], m);
            }));
        }
        for (std::size_t i = begin; i < end; ++i) {
            per_query[i] = futures[i - begin].get();
        }
    }

    // Merge in (query_index, rank) order — per_query is already indexed by
    // query and each fetch returns rank order.
    EvidenceBundle bundle;
    std::set<std::string> seen;
    bool budget_hit = false;
    for (const auto& snippets : per_query) {
        if (budget_hit) break;
        for (const EvidenceSnippet& snippet : snippets) {
            std::string key = normalize_for_dedup(snippet.text);
            if (key.empty() || seen.count(key) > 0) {
                continue;
            }
            int length = static_cast<int>(snippet.text.size());
            if (bundle.total_chars + length > budget_chars) {
                // Whole-snippet truncation: never split a snippet, and stop
                // here rather than back-filling smaller ones out of order.
                budget_hit = true;
                break;
            }
            seen.insert(std::move(key));
            bundle.snippets.push_back(snippet);
            bundle.total_chars += length;
        }
    }
    return bundle;
}

std::string evidence_to_prompt_text(const EvidenceBundle& bundle) {
    std::string out;
    for (std::size_t i = 0; i < bundle.snippets.size(); ++i) {
        const EvidenceSnippet& snippet = bundle.snippets[i];
        out += "[" + std::to_string(i + 1) + "] " + snippet.text +
               " (source: " + snippet.source + ")";
        if (i + 1 < bundle.snippets.size()) out += '\n';
    }
    return out;
}

}  // namespace arqa
