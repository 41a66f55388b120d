#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arqa/config.hpp"
#include "arqa/detection.hpp"
#include "arqa/retrieval.hpp"

namespace arqa {

struct DatasetRecord {
    std::string id;
    std::string question;
    std::optional<std::string> gold_label;   // "yes" / "no"
    std::vector<std::string> gold_answers;   // long-form references
    std::string category;

    bool has_gold() const { return gold_label.has_value() || !gold_answers.empty(); }
};

// One JSON object per line: {id, question, gold_answers:[...]} or
// {id, question, gold_label:"yes"|"no"}, category optional.
std::vector<DatasetRecord> load_dataset_jsonl(const std::filesystem::path& path);

// Seeded Fisher-Yates subsample preserving dataset order of the chosen
// records; deterministic across platforms.
std::vector<DatasetRecord> sample_records(const std::vector<DatasetRecord>& records,
                                          std::size_t n, std::uint64_t seed);

struct TraceCounters {
    std::int64_t llm_calls = 0;
    std::int64_t llm_live_calls = 0;
    std::int64_t cache_hits = 0;
    std::int64_t script_calls = 0;
    std::int64_t retrieval_calls = 0;        // retrieval events (0 or 1)
    std::int64_t search_queries_issued = 0;  // individual search-API hits
};

enum class TraceStatus { ok, error };

// Full per-question audit record.
struct AnswerTrace {
    std::string id;
    std::string question;
    TraceStatus status = TraceStatus::ok;
    std::string error_message;

    std::string thought;
    std::string initial_answer;
    std::optional<DetectionOutcome> detection;
    Decision decision = Decision::accept_initial;
    std::optional<EvidenceBundle> evidence;
    std::optional<std::string> repaired_answer;
    std::string final_answer;
    std::vector<std::string> flags;  // e.g. "retrieval_empty"

    PipelineMode mode = PipelineMode::hybrid;
    TraceCounters counters;
    double wall_time_seconds = 0.0;  // volatile: excluded from replay comparison

    // Gold echoed from the dataset record so a run directory is
    // self-contained for reporting.
    std::optional<std::string> gold_label;
    std::vector<std::string> gold_answers;
    std::string category;
};

std::string trace_to_json(const AnswerTrace& trace);
AnswerTrace trace_from_json(const std::string& json_text);

class Pipeline {
public:
    // Builds backends, retriever, and cache from the config bindings.
    explicit Pipeline(PipelineConfig config);

    // Injection constructor for tests and scripted worlds.  cache may be
    // null (no cache layer); retriever may be null only for
    // never_retrieve runs.
    Pipeline(PipelineConfig config,
             std::shared_ptr<ChatBackend> answerer,
             std::shared_ptr<ChatBackend> verifier,
             std::shared_ptr<Retriever> retriever,
             std::shared_ptr<ResponseCache> cache);

    AnswerTrace run_question(const DatasetRecord& record);

    // Traces in input order; questions dispatch concurrently up to
    // config.parallelism.  Per-question failures become error traces,
    // never exceptions.  When run_dir is non-empty, traces and a manifest
    // are persisted there incrementally.
    std::vector<AnswerTrace> run_dataset(const std::vector<DatasetRecord>& records,
                                         const std::filesystem::path& run_dir = {});

    const PipelineConfig& config() const { return config_; }

private:
    AnswerTrace run_question_guarded(const DatasetRecord& record);

    PipelineConfig config_;
    std::shared_ptr<PromptLibrary> library_;
    std::unique_ptr<PromptFactory> prompts_;
    std::shared_ptr<ChatBackend> answerer_;
    std::shared_ptr<ChatBackend> verifier_;
    std::shared_ptr<Retriever> retriever_;
    std::shared_ptr<ResponseCache> cache_;
};

}  // namespace arqa
