#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "arqa/providers.hpp"
#include "arqa/retrieval.hpp"

namespace arqa {

enum class PipelineMode { cl, cm, hybrid, always_retrieve, never_retrieve };

const char* mode_name(PipelineMode mode);
PipelineMode parse_mode(const std::string& name);  // throws ConfigError

struct ProviderBinding {
    enum class Kind { scripted, http };
    Kind kind = Kind::scripted;
    std::string arg;  // script path (scripted) or base URL (http)
    std::string model_id = "answerer";
    std::string api_key_env = "ARQA_CHAT_API_KEY";  // http only
};

struct RetrieverBinding {
    enum class Kind { local, web };
    Kind kind = Kind::local;
    std::string arg;  // corpus directory (local) or base URL (web)
    std::string api_key_env = "ARQA_SEARCH_API_KEY";  // web only
};

// "kind:arg" as accepted on the command line, e.g.
// "scripted:world/script.json" or "http:https://api.example.com".
ProviderBinding parse_provider_binding(const std::string& text);
RetrieverBinding parse_retriever_binding(const std::string& text);

struct Temperatures {
    double diversify = 1.0;
    double other = 0.0;
};

struct PipelineConfig {
    int k = 6;
    double alpha = 1.0;
    PipelineMode mode = PipelineMode::hybrid;
    double threshold_cl = 0.6;
    double threshold_cm = 0.8;
    double threshold_hybrid = 1.2;
    std::string source_language = "en";
    std::string target_language = "zh";
    Temperatures temperatures;
    int snippets_per_query = 3;      // m
    int snippet_budget_chars = 4000;
    RetryPolicy retry;
    int parallelism = 4;
    ProviderBinding answerer;
    ProviderBinding verifier{ProviderBinding::Kind::scripted, "", "verifier"};
    RetrieverBinding retriever;
    std::string cache_dir;     // empty = no cache layer
    std::string run_dir = "runs";
    std::string template_dir;  // empty = built-in prompt texts

    // Threshold the active mode gates on; never/always modes have none and
    // report the hybrid slot (unused).
    double threshold_for_mode() const;
    void set_threshold_for_mode(double value);

    void validate() const;  // throws ConfigError

    // Stable content digest over every tunable (not over secrets — key
    // environment variable *names* participate, values never do).  Used to
    // name run directories.
    std::string digest() const;
};

// JSON round-trip.  Unknown keys are rejected so config typos fail loudly.
PipelineConfig load_config_file(const std::filesystem::path& path);
PipelineConfig parse_config_json(const std::string& json_text);
std::string config_to_json(const PipelineConfig& config);
void save_config_file(const PipelineConfig& config, const std::filesystem::path& path);

// Instantiates the bound backend; wraps it in a CachedBackend when a cache
// is supplied.
std::shared_ptr<ChatBackend> make_backend(const ProviderBinding& binding,
                                          const RetryPolicy& retry,
                                          std::shared_ptr<ResponseCache> cache);

std::shared_ptr<Retriever> make_retriever(const RetrieverBinding& binding,
                                          const RetryPolicy& retry);

}  // namespace arqa
