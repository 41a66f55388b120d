#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "arqa/prompt_factory.hpp"
#include "arqa/providers.hpp"

namespace arqa {

struct PerturbationSet {
    std::string original;
    std::vector<std::string> variants;

    int k() const { return static_cast<int>(variants.size()); }
};

enum class VerdictValue { equivalent, inequivalent };

struct EquivalenceVerdict {
    VerdictValue value = VerdictValue::inequivalent;
    std::string raw_text;
    bool parsed_ok = false;

    double score() const { return value == VerdictValue::equivalent ? 1.0 : 0.0; }
};

enum class Decision { accept_initial, retrieve };
enum class CheckMode { cross_language, cross_model };

struct ConsistencyReport {
    std::optional<double> z_cl;
    std::optional<double> z_cm;
    double alpha = 1.0;
    std::optional<double> z_hybrid;
    std::vector<EquivalenceVerdict> verdicts_cl;
    std::vector<EquivalenceVerdict> verdicts_cm;
    Decision decision = Decision::accept_initial;
};

// --- Pure scoring functions -------------------------------------------------

// First standalone "true"/"false" word (case-insensitive); nullopt when
// neither occurs.
std::optional<bool> parse_true_false(const std::string& raw);

// Maps a checker reply onto a verdict: unparseable output counts as
// inequivalent with parsed_ok=false (conservative — can only cause more
// retrieval, never less).
EquivalenceVerdict verdict_from_raw(std::string raw);

// Fraction of equivalent verdicts; the consistency score of a branch.
double mean_equivalence(const std::vector<EquivalenceVerdict>& verdicts);

// z_cl + alpha * z_cm.  Inputs validated: scores in [0,1], alpha >= 0.
double score_hybrid(double z_cl, double z_cm, double alpha);

// retrieve iff z < threshold, strictly: ties keep the initial answer.
Decision decide(double z, double threshold);

// Splits a diversification reply into candidate variants: one per
// non-empty line, list markers stripped, order preserved.
std::vector<std::string> parse_variant_list(const std::string& reply);

// --- Engine -----------------------------------------------------------------

struct DetectionOutcome {
    PerturbationSet perturbations;
    std::vector<QAPair> pairs_source;
    std::vector<QAPair> pairs_target;
    std::vector<QAPair> pairs_verifier;
    ConsistencyReport report;
};

// Stage-2 orchestration: diversify the question, collect answers in the
// source language, the target language, and from the verifier model as the
// mode requires, check pairwise equivalence, and aggregate the scores.
class DetectionEngine {
public:
    DetectionEngine(std::shared_ptr<ChatBackend> answerer,
                    std::shared_ptr<ChatBackend> verifier,
                    const PromptFactory& prompts,
                    const PipelineConfig& config);

    PerturbationSet diversify(const std::string& question, int k);

    // One QAPair per variant.  language=target first translates each
    // variant and answers in the target language.  A failed slot yields an
    // empty response (forced inequivalent later), never an exception.
    std::vector<QAPair> answer_variants(const std::vector<std::string>& variants,
                                        PairLanguage language, PairProducer producer);

    EquivalenceVerdict check_equivalence(const QAPair& pair_a, const QAPair& pair_b,
                                         CheckMode mode);

    std::pair<double, std::vector<EquivalenceVerdict>> score_cross_language(
        const std::vector<QAPair>& pairs_src, const std::vector<QAPair>& pairs_tgt);
    std::pair<double, std::vector<EquivalenceVerdict>> score_cross_model(
        const std::vector<QAPair>& pairs_answerer, const std::vector<QAPair>& pairs_verifier);

    // Runs the branches the mode requires (concurrently for hybrid) and
    // gates the resulting score against the mode's threshold.
    DetectionOutcome detect(const std::string& question);

private:
    std::vector<EquivalenceVerdict> check_batch(const std::vector<QAPair>& a,
                                                const std::vector<QAPair>& b, CheckMode mode);

    std::shared_ptr<ChatBackend> answerer_;
    std::shared_ptr<ChatBackend> verifier_;
    const PromptFactory& prompts_;
    PipelineConfig config_;
};

}  // namespace arqa
