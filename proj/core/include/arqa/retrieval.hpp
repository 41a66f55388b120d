#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "arqa/providers.hpp"

namespace arqa {

class PromptFactory;

struct SearchQuery {
    std::string text;
    int origin_variant_index = 0;
};

struct EvidenceSnippet {
    std::string text;
    std::string source;  // URL or corpus document id
    int rank = 1;        // 1-based rank within its query
    int query_index = 0;
};

struct EvidenceBundle {
    std::vector<EvidenceSnippet> snippets;
    int total_chars = 0;

    bool empty() const { return snippets.empty(); }
};

// One evidence source.  fetch returns up to m ranked snippets for a query
// (possibly fewer, possibly none).  Implementations must tolerate
// concurrent fetch calls.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<EvidenceSnippet> fetch(const SearchQuery& query, int m) = 0;
};

// Deterministic offline retriever over a directory of JSON documents
// {id, title, text} listed in an index manifest.  Documents are ranked by
// distinct-token overlap with the query (case-folded, stopword-filtered);
// ties break toward the lexicographically smaller document id.  A query
// matching nothing yields an empty result, never an error.
class LocalCorpusRetriever : public Retriever {
public:
    explicit LocalCorpusRetriever(std::filesystem::path corpus_dir);

    std::vector<EvidenceSnippet> fetch(const SearchQuery& query, int m) override;
    std::size_t document_count() const { return docs_.size(); }

private:
    struct Doc {
        std::string id;
        std::string title;
        std::string text;
        std::vector<std::string> tokens;  // sorted, distinct
    };
    std::vector<Doc> docs_;  // sorted by id
};

struct WebSearchConfig {
    std::string base_url;
    std::string path = "/search";
    std::string api_key_env;  // env var holding the key; empty = no auth
    std::string api_key_header = "X-API-KEY";
    int timeout_ms = 30000;
    RetryPolicy retry;
};

// JSON web-search client: POST {q}, parse the organic_results array
// (title/snippet/link per result).  Throws RetrieverUnavailable once
// retries are exhausted.
class WebSearchRetriever : public Retriever {
public:
    explicit WebSearchRetriever(WebSearchConfig config);
    ~WebSearchRetriever() override;

    std::vector<EvidenceSnippet> fetch(const SearchQuery& query, int m) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One search query per variant via the reformulation prompt at temperature
// 0; an empty or failed reformulation falls back to the variant text
// itself, so a query always exists and indices stay aligned.
std::vector<SearchQuery> reformulate(const std::vector<std::string>& variants,
                                     ChatBackend& provider,
                                     const PromptFactory& prompts,
                                     std::size_t parallelism = 0);

// Fetches top-m snippets per query concurrently, merges in (query_index,
// rank) order, deduplicates by normalized text, and truncates to the
// character budget without splitting a snippet.
EvidenceBundle search(const std::vector<SearchQuery>& queries,
                      Retriever& retriever,
                      int m,
                      int budget_chars,
                      std::size_t parallelism = 0);

// Canonical rendering of a bundle for the repair prompt's evidence slot.
// Deterministic: both the pipeline and scripted-world generation rely on
// producing identical bytes for identical bundles.
std::string evidence_to_prompt_text(const EvidenceBundle& bundle);

}  // namespace arqa
