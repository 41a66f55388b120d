#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "arqa/config.hpp"
#include "arqa/pipeline.hpp"
#include "arqa/providers.hpp"

namespace arqa {

// Parameters of a synthetic closed world.
struct WorldSpec {
    int n_questions = 100;
    double coverage = 0.8;             // P(answerer knows a question)
    double consistency_fidelity = 0.9; // P(equivalent verdict | known)
    double confusion_rate = 0.1;       // P(equivalent verdict | unknown)
    double retrieval_noise = 0.0;      // P(evidence is misleading)
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
};

// Per-question ground truth recorded at generation time, used to verify
// attribution labels against the world's actual causes.
struct QuestionGroundTruth {
    std::string id;
    bool known = false;
    std::string gold_label;     // "yes" or "no"
    std::vector<int> cl_bits;   // drawn equivalence verdicts, one per variant
    std::vector<int> cm_bits;
    bool noisy_evidence = false;
};

struct ScriptedWorld {
    std::filesystem::path root;
    std::filesystem::path dataset_path;   // dataset.jsonl
    std::filesystem::path corpus_dir;     // corpus/ with index.json
    std::filesystem::path script_path;    // script.json
    std::filesystem::path manifest_path;  // world.json (spec + ground truth)

    std::vector<DatasetRecord> records;
    std::shared_ptr<ScriptedBackend> backend;
    std::vector<QuestionGroundTruth> truth;
};

// Deterministically materializes dataset, corpus, and provider script for
// the given config (k, languages, models, retrieval settings) under
// out_dir.  The script covers every prompt any pipeline mode can issue for
// this config, including diversification at every k' <= config.k so
// smaller-k sweep runs stay closed.  Pure function of (spec, config).
ScriptedWorld generate_world(const WorldSpec& spec, const PipelineConfig& config,
                             const std::filesystem::path& out_dir,
                             bool include_notes = false);

// Loads the pieces of a previously generated world directory.
ScriptedWorld load_world(const std::filesystem::path& root);

// Pipeline wired to a world's script and corpus, mode and thresholds taken
// from config.  No cache unless config.cache_dir is set.
std::unique_ptr<Pipeline> make_world_pipeline(const ScriptedWorld& world,
                                              const PipelineConfig& config);

// Runs every question through the retrieve-everything and hybrid paths and
// throws ClosureViolation if any prompt escapes the script.
void verify_closure(const ScriptedWorld& world, const PipelineConfig& config);

// Closed-form expected accuracy of a CL-mode run over a world with this
// spec at the given gate threshold: known questions answer correctly when
// accepted; retrieval repairs correctly with probability
// 1 - retrieval_noise; gating follows Binom(k, p)/k < threshold with
// p = consistency_fidelity (known) or confusion_rate (unknown).
double expected_accuracy(const WorldSpec& spec, double threshold, int k = 6);

}  // namespace arqa
