#include "arqa/detection.hpp"

#include <cmath>
#include <future>
#include <sstream>

#include "arqa/errors.hpp"
#include "text_util.hpp"

namespace arqa {

std::optional<bool> parse_true_false(const std::string& raw) {
    for (const auto& [word, offset] : text::words_with_offsets(raw)) {
        (void)offset;
        if (word == "true") return true;
        if (word == "false") return false;
    }
    return std::nullopt;
}

EquivalenceVerdict verdict_from_raw(std::string raw) {
    EquivalenceVerdict verdict;
    verdict.raw_text = std::move(raw);
    if (auto parsed = parse_true_false(verdict.raw_text)) {
        verdict.parsed_ok = true;
        verdict.value = *parsed ? VerdictValue::equivalent : VerdictValue::inequivalent;
    } else {
        verdict.parsed_ok = false;
        verdict.value = VerdictValue::inequivalent;
    }
    return verdict;
}

double mean_equivalence(const std::vector<EquivalenceVerdict>& verdicts) {
    if (verdicts.empty()) {
        throw LengthMismatch("mean_equivalence: empty verdict list");
    }
    std::size_t equivalent = 0;
    for (const EquivalenceVerdict& v : verdicts) {
        if (v.value == VerdictValue::equivalent) ++equivalent;
    }
    return static_cast<double>(equivalent) / static_cast<double>(verdicts.size());
}

double score_hybrid(double z_cl, double z_cm, double alpha) {
    if (!std::isfinite(z_cl) || z_cl < 0.0 || z_cl > 1.0) {
        throw ConfigError("score_hybrid: z_cl outside [0, 1]");
    }
    if (!std::isfinite(z_cm) || z_cm < 0.0 || z_cm > 1.0) {
        throw ConfigError("score_hybrid: z_cm outside [0, 1]");
    }
    if (!std::isfinite(alpha) || alpha < 0.0) {
        throw ConfigError("score_hybrid: alpha must be >= 0");
    }
    return z_cl + alpha * z_cm;
}

Decision decide(double z, double threshold) {
    if (threshold < 0.0) {
        throw ConfigError("decide: threshold must be >= 0");
    }
    return z < threshold ? Decision::retrieve : Decision::accept_initial;
}

std::vector<std::string> parse_variant_list(const std::string& reply) {
    std::vector<std::string> variants;
    std::istringstream lines(reply);
    std::string line;
    while (std::getline(lines, line)) {
        std::string cleaned = text::strip_enumeration(line);
        if (!cleaned.empty()) {
            variants.push_back(std::move(cleaned));
        }
    }
    return variants;
}

DetectionEngine::DetectionEngine(std::shared_ptr<ChatBackend> answerer,
                                 std::shared_ptr<ChatBackend> verifier,
                                 const PromptFactory& prompts, const PipelineConfig& config)
    : answerer_(std::move(answerer)),
      verifier_(std::move(verifier)),
      prompts_(prompts),
      config_(config) {
    if (!answerer_) {
        throw ConfigError("DetectionEngine requires an answerer backend");
    }
    bool needs_verifier =
        config_.mode == PipelineMode::cm || config_.mode == PipelineMode::hybrid;
    if (needs_verifier && !verifier_) {
        throw ConfigError("DetectionEngine: mode needs a verifier backend");
    }
}

PerturbationSet DetectionEngine::diversify(const std::string& question, int k) {
    if (k < 1) {
        throw ConfigError("diversify: k must be >= 1");
    }
    PerturbationSet set;
    set.original = question;

    std::vector<std::string> variants;
    for (std::uint32_t attempt = 0; attempt < 2; ++attempt) {
        ChatRequest request = prompts_.diversify(question, k, attempt);
        ChatResponse response = answerer_->complete(request);
        variants = parse_variant_list(response.text);
        if (static_cast<int>(variants.size()) >= k) break;
    }
    int minimum = (k + 1) / 2;
    if (static_cast<int>(variants.size()) < minimum) {
        throw DiversificationFailure("diversify: got " + std::to_string(variants.size()) +
                                     " variants, need at least " + std::to_string(minimum) +
                                     " of " + std::to_string(k));
    }
    if (static_cast<int>(variants.size()) > k) {
        variants.resize(static_cast<std::size_t>(k));
    }
    set.variants = std::move(variants);
    return set;
}

std::vector<QAPair> DetectionEngine::answer_variants(const std::vector<std::string>& variants,
                                                     PairLanguage language,
                                                     PairProducer producer) {
    if (variants.empty()) {
        throw LengthMismatch("answer_variants: empty variant list");
    }
    std::size_t parallelism = static_cast<std::size_t>(config_.parallelism);
    ChatBackend& backend = producer == PairProducer::verifier ? *verifier_ : *answerer_;

    std::vector<QAPair> pairs(variants.size());
    for (std::size_t j = 0; j < variants.size(); ++j) {
        pairs[j].language = language;
        pairs[j].producer = producer;
        pairs[j].question = variants[j];
    }

    if (language == PairLanguage::target) {
        // Translate first, then answer in the target language.  A failed
        // translation leaves the pair with the untranslated question and
        // an empty response; its answer call is skipped.
        std::vector<ChatRequest> translate_requests;
        translate_requests.reserve(variants.size());
        for (const std::string& v : variants) {
            translate_requests.push_back(prompts_.translate(v));
        }
        std::vector<CompletionOutcome> translated =
            complete_batch(*answerer_, translate_requests, parallelism);

        std::vector<std::size_t> live;
        std::vector<ChatRequest> answer_requests;
        for (std::size_t j = 0; j < variants.size(); ++j) {
            if (!translated[j].ok() || text::trim(translated[j].text()).empty()) {
                continue;
            }
            pairs[j].question = translated[j].text();
            live.push_back(j);
            answer_requests.push_back(prompts_.answer_in_language(pairs[j].question));
        }
        std::vector<CompletionOutcome> answers =
            complete_batch(backend, answer_requests, parallelism);
        for (std::size_t i = 0; i < live.size(); ++i) {
            if (answers[i].ok()) {
                pairs[live[i]].response = answers[i].text();
            }
        }
        return pairs;
    }

    std::vector<ChatRequest> requests;
    requests.reserve(variants.size());
    for (const std::string& v : variants) {
        requests.push_back(prompts_.answer(v, producer));
    }
    std::vector<CompletionOutcome> outcomes = complete_batch(backend, requests, parallelism);
    for (std::size_t j = 0; j < variants.size(); ++j) {
        if (outcomes[j].ok()) {
            pairs[j].response = outcomes[j].text();
        }
    }
    return pairs;
}

EquivalenceVerdict DetectionEngine::check_equivalence(const QAPair& pair_a, const QAPair& pair_b,
                                                      CheckMode mode) {
    if (text::trim(pair_a.response).empty() || text::trim(pair_b.response).empty()) {
        // Forced-verdict rule: a pair with an empty response is never
        // equivalent, and no checker call is spent on it.
        EquivalenceVerdict forced;
        forced.value = VerdictValue::inequivalent;
        forced.parsed_ok = false;
        forced.raw_text = "";
        return forced;
    }
    ChatRequest request = mode == CheckMode::cross_language
                              ? prompts_.check_cross_language(pair_a, pair_b)
                              : prompts_.check_cross_model(pair_a, pair_b);
    ChatResponse response = answerer_->complete(request);
    return verdict_from_raw(response.text);
}

std::vector<EquivalenceVerdict> DetectionEngine::check_batch(const std::vector<QAPair>& a,
                                                             const std::vector<QAPair>& b,
                                                             CheckMode mode) {
    std::vector<EquivalenceVerdict> verdicts(a.size());
    std::vector<std::size_t> live;
    std::vector<ChatRequest> requests;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (text::trim(a[j].response).empty() || text::trim(b[j].response).empty()) {
            verdicts[j].value = VerdictValue::inequivalent;
            verdicts[j].parsed_ok = false;
            continue;
        }
        live.push_back(j);
        requests.push_back(mode == CheckMode::cross_language
                               ? prompts_.check_cross_language(a[j], b[j])
                               : prompts_.check_cross_model(a[j], b[j]));
    }
    std::vector<CompletionOutcome> outcomes =
        complete_batch(*answerer_, requests, static_cast<std::size_t>(config_.parallelism));
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (outcomes[i].ok()) {
            verdicts[live[i]] = verdict_from_raw(outcomes[i].text());
        } else {
            verdicts[live[i]].value = VerdictValue::inequivalent;
            verdicts[live[i]].parsed_ok = false;
            verdicts[live[i]].raw_text = outcomes[i].error;
        }
    }
    return verdicts;
}

std::pair<double, std::vector<EquivalenceVerdict>> DetectionEngine::score_cross_language(
    const std::vector<QAPair>& pairs_src, const std::vector<QAPair>& pairs_tgt) {
    if (pairs_src.size() != pairs_tgt.size() || pairs_src.empty()) {
        throw LengthMismatch("score_cross_language: source/target lists unaligned");
    }
    std::vector<EquivalenceVerdict> verdicts =
        check_batch(pairs_src, pairs_tgt, CheckMode::cross_language);
    return {mean_equivalence(verdicts), std::move(verdicts)};
}

std::pair<double, std::vector<EquivalenceVerdict>> DetectionEngine::score_cross_model(
    const std::vector<QAPair>& pairs_answerer, const std::vector<QAPair>& pairs_verifier) {
    if (pairs_answerer.size() != pairs_verifier.size() || pairs_answerer.empty()) {
        throw LengthMismatch("score_cross_model: answerer/verifier lists unaligned");
    }
    std::vector<EquivalenceVerdict> verdicts =
        check_batch(pairs_answerer, pairs_verifier, CheckMode::cross_model);
    return {mean_equivalence(verdicts), std::move(verdicts)};
}

DetectionOutcome DetectionEngine::detect(const std::string& question) {
    DetectionOutcome outcome;
    outcome.perturbations = diversify(question, config_.k);
    const std::vector<std::string>& variants = outcome.perturbations.variants;

    bool want_cl = config_.mode == PipelineMode::cl || config_.mode == PipelineMode::hybrid;
    bool want_cm = config_.mode == PipelineMode::cm || config_.mode == PipelineMode::hybrid;

    // The source-language answers feed both branches; collect them once.
    outcome.pairs_source = answer_variants(variants, PairLanguage::source, PairProducer::answerer);

    auto run_cl = [&]() {
        std::vector<QAPair> tgt =
            answer_variants(variants, PairLanguage::target, PairProducer::answerer);
        auto [z, verdicts] = score_cross_language(outcome.pairs_source, tgt);
        return std::make_tuple(std::move(tgt), z, std::move(verdicts));
    };
    auto run_cm = [&]() {
        std::vector<QAPair> ver =
            answer_variants(variants, PairLanguage::source, PairProducer::verifier);
        auto [z, verdicts] = score_cross_model(outcome.pairs_source, ver);
        return std::make_tuple(std::move(ver), z, std::move(verdicts));
    };

    ConsistencyReport& report = outcome.report;
    report.alpha = config_.alpha;

    if (want_cl && want_cm) {
        auto cl_future = std::async(std::launch::async, run_cl);
        auto [ver, z_cm, verdicts_cm] = run_cm();
        auto [tgt, z_cl, verdicts_cl] = cl_future.get();
        outcome.pairs_target = std::move(tgt);
        outcome.pairs_verifier = std::move(ver);
        report.z_cl = z_cl;
        report.z_cm = z_cm;
        report.verdicts_cl = std::move(verdicts_cl);
        report.verdicts_cm = std::move(verdicts_cm);
        report.z_hybrid = score_hybrid(z_cl, z_cm, config_.alpha);
    } else if (want_cl) {
        auto [tgt, z_cl, verdicts_cl] = run_cl();
        outcome.pairs_target = std::move(tgt);
        report.z_cl = z_cl;
        report.verdicts_cl = std::move(verdicts_cl);
    } else if (want_cm) {
        auto [ver, z_cm, verdicts_cm] = run_cm();
        outcome.pairs_verifier = std::move(ver);
        report.z_cm = z_cm;
        report.verdicts_cm = std::move(verdicts_cm);
    } else {
        throw ConfigError("detect: mode has no detection branch");
    }

    double gate_score = 0.0;
    switch (config_.mode) {
        case PipelineMode::cl: gate_score = *report.z_cl; break;
        case PipelineMode::cm: gate_score = *report.z_cm; break;
        default: gate_score = *report.z_hybrid; break;
    }
    report.decision = decide(gate_score, config_.threshold_for_mode());
    return outcome;
}

}  // namespace arqa
