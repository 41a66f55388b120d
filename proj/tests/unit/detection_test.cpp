#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "arqa/config.hpp"
#include "arqa/detection.hpp"
#include "arqa/errors.hpp"
#include "arqa/prompt_factory.hpp"
#include "arqa/providers.hpp"

using namespace arqa;

namespace {

std::vector<EquivalenceVerdict> verdicts_from_bits(const std::vector<int>& bits) {
    std::vector<EquivalenceVerdict> out;
    for (int bit : bits) {
        EquivalenceVerdict v;
        v.value = bit ? VerdictValue::equivalent : VerdictValue::inequivalent;
        v.parsed_ok = true;
        out.push_back(v);
    }
    return out;
}

struct EngineFixture {
    PipelineConfig config;
    std::shared_ptr<ScriptedBackend> backend = std::make_shared<ScriptedBackend>();
    std::shared_ptr<PromptLibrary> library = std::make_shared<PromptLibrary>();
    std::unique_ptr<PromptFactory> prompts;

    explicit EngineFixture(PipelineMode mode, int k = 3) {
        config.mode = mode;
        config.k = k;
        config.parallelism = 2;
        prompts = std::make_unique<PromptFactory>(config, library);
    }

    DetectionEngine engine() {
        return DetectionEngine(backend, backend, *prompts, config);
    }
};

}  // namespace

TEST_SUITE("detection") {

TEST_CASE("true/false parsing finds the first standalone verdict word") {
    CHECK(parse_true_false("True.") == true);
    CHECK(parse_true_false("  false") == false);
    CHECK(parse_true_false("The answer is TRUE indeed") == true);
    CHECK(parse_true_false("False. Although some would say true.") == false);
    CHECK(parse_true_false("untrue") == std::nullopt);       // not a standalone word
    CHECK(parse_true_false("falsehood truthiness") == std::nullopt);
    CHECK(parse_true_false("I cannot determine this") == std::nullopt);
    CHECK(parse_true_false("") == std::nullopt);
}

TEST_CASE("unparseable checker output is conservatively inequivalent") {
    EquivalenceVerdict good = verdict_from_raw("True.");
    CHECK(good.value == VerdictValue::equivalent);
    CHECK(good.parsed_ok);
    CHECK(good.score() == 1.0);

    EquivalenceVerdict bad = verdict_from_raw("完全无法判断");
    CHECK(bad.value == VerdictValue::inequivalent);
    CHECK_FALSE(bad.parsed_ok);
    CHECK(bad.raw_text == "完全无法判断");
    CHECK(bad.score() == 0.0);
}

TEST_CASE("mean equivalence is an exact fraction on the k-grid") {
    CHECK(mean_equivalence(verdicts_from_bits({1, 1, 0})) == 2.0 / 3.0);
    CHECK(mean_equivalence(verdicts_from_bits({0, 0, 0, 0})) == 0.0);
    CHECK(mean_equivalence(verdicts_from_bits({1, 1})) == 1.0);
    CHECK_THROWS_AS(mean_equivalence({}), LengthMismatch);
}

TEST_CASE("hybrid score is the weighted sum with validated inputs") {
    CHECK(score_hybrid(0.5, 0.25, 2.0) == 0.5 + 2.0 * 0.25);
    CHECK(score_hybrid(0.0, 0.0, 0.0) == 0.0);
    CHECK(score_hybrid(1.0, 1.0, 1.0) == 2.0);
    CHECK_THROWS_AS(score_hybrid(1.5, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(score_hybrid(0.5, -0.1, 1.0), ConfigError);
    CHECK_THROWS_AS(score_hybrid(0.5, 0.5, -1.0), ConfigError);
}

TEST_CASE("the gate is strict: ties accept the initial answer") {
    CHECK(decide(0.59, 0.6) == Decision::retrieve);
    CHECK(decide(0.6, 0.6) == Decision::accept_initial);
    CHECK(decide(0.61, 0.6) == Decision::accept_initial);
    CHECK(decide(0.0, 0.0) == Decision::accept_initial);
    CHECK_THROWS_AS(decide(0.5, -0.01), ConfigError);
}

TEST_CASE("variant list parsing strips markers and skips blanks") {
    std::string reply =
        "1. What makes the sky blue?\n"
        "2) Why does the sky look blue?\n"
        "- How come the sky appears blue?\n"
        "* For what reason is the sky blue?\n"
        "\n"
        "  3.  What causes the blue color of the sky?  \n";
    auto variants = parse_variant_list(reply);
    REQUIRE(variants.size() == 5);
    CHECK(variants[0] == "What makes the sky blue?");
    CHECK(variants[1] == "Why does the sky look blue?");
    CHECK(variants[2] == "How come the sky appears blue?");
    CHECK(variants[3] == "For what reason is the sky blue?");
    CHECK(variants[4] == "What causes the blue color of the sky?");
    CHECK(parse_variant_list("").empty());
    CHECK(parse_variant_list("No markers here").front() == "No markers here");
}

TEST_CASE("scores equal brute-force recounts over random verdict matrices") {
    std::mt19937_64 rng(20260822);
    for (int trial = 0; trial < 300; ++trial) {
        int k = 1 + static_cast<int>(rng() % 8);
        std::vector<int> cl_bits(static_cast<std::size_t>(k));
        std::vector<int> cm_bits(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            cl_bits[static_cast<std::size_t>(j)] = static_cast<int>(rng() % 2);
            cm_bits[static_cast<std::size_t>(j)] = static_cast<int>(rng() % 2);
        }
        double alpha = static_cast<double>(rng() % 300) / 100.0;

        auto cl = verdicts_from_bits(cl_bits);
        auto cm = verdicts_from_bits(cm_bits);
        double z_cl = mean_equivalence(cl);
        double z_cm = mean_equivalence(cm);

        int count_cl = 0, count_cm = 0;
        for (int b : cl_bits) count_cl += b;
        for (int b : cm_bits) count_cm += b;

        CHECK(std::abs(z_cl - static_cast<double>(count_cl) / k) <= 1e-12);
        CHECK(std::abs(z_cm - static_cast<double>(count_cm) / k) <= 1e-12);
        CHECK(std::abs(score_hybrid(z_cl, z_cm, alpha) - (z_cl + alpha * z_cm)) <= 1e-12);

        // Permutation invariance.
        std::shuffle(cl.begin(), cl.end(), rng);
        CHECK(mean_equivalence(cl) == z_cl);

        // Flipping one verdict to equivalent never lowers the score.
        if (count_cl < k) {
            auto raised = cl_bits;
            for (auto& b : raised) {
                if (b == 0) {
                    b = 1;
                    break;
                }
            }
            CHECK(mean_equivalence(verdicts_from_bits(raised)) >= z_cl);
        }
    }
}

TEST_CASE("retrieval decisions are monotone in the threshold") {
    for (int count = 0; count <= 6; ++count) {
        double z = count / 6.0;
        bool seen_retrieve = false;
        for (double threshold : {0.0, 0.2, 0.5, 0.8, 1.0, 1.5}) {
            bool retrieve = decide(z, threshold) == Decision::retrieve;
            // Once a threshold is high enough to trigger retrieval, every
            // higher threshold must trigger it too.
            if (seen_retrieve) CHECK(retrieve);
            seen_retrieve = seen_retrieve || retrieve;
        }
    }
}

TEST_CASE("engine runs the cross-language branch end to end") {
    EngineFixture fixture(PipelineMode::cl, 3);
    fixture.config.threshold_cl = 0.9;
    const std::string question = "Is water wet?";

    std::vector<std::string> variants = {"Would you say water is wet?",
                                         "Is it true that water is wet?",
                                         "Does water count as wet?"};
    fixture.backend->add_exact(fixture.prompts->diversify(question, 3, 0),
                               "1. " + variants[0] + "\n2. " + variants[1] + "\n3. " + variants[2]);

    std::vector<QAPair> src(3), tgt(3);
    for (int j = 0; j < 3; ++j) {
        const std::string& v = variants[static_cast<std::size_t>(j)];
        std::string translated = "[target] " + v;
        std::string src_answer = "Yes, water is wet (" + std::to_string(j) + ")";
        std::string tgt_answer = "[target] yes";
        fixture.backend->add_exact(fixture.prompts->answer(v, PairProducer::answerer), src_answer);
        fixture.backend->add_exact(fixture.prompts->translate(v), translated);
        fixture.backend->add_exact(fixture.prompts->answer_in_language(translated), tgt_answer);
        src[static_cast<std::size_t>(j)] = {v, src_answer, PairLanguage::source,
                                            PairProducer::answerer};
        tgt[static_cast<std::size_t>(j)] = {translated, tgt_answer, PairLanguage::target,
                                            PairProducer::answerer};
    }
    // Verdicts: True, False, True -> z_cl = 2/3 < 0.9 -> retrieve.
    const char* verdicts[3] = {"True.", "False.", "True."};
    for (int j = 0; j < 3; ++j) {
        fixture.backend->add_exact(
            fixture.prompts->check_cross_language(src[static_cast<std::size_t>(j)],
                                                  tgt[static_cast<std::size_t>(j)]),
            verdicts[j]);
    }

    DetectionEngine engine = fixture.engine();
    DetectionOutcome outcome = engine.detect(question);

    CHECK(outcome.perturbations.original == question);
    REQUIRE(outcome.perturbations.variants.size() == 3);
    REQUIRE(outcome.report.z_cl.has_value());
    CHECK(*outcome.report.z_cl == 2.0 / 3.0);
    CHECK_FALSE(outcome.report.z_cm.has_value());
    CHECK_FALSE(outcome.report.z_hybrid.has_value());
    CHECK(outcome.report.decision == Decision::retrieve);
    CHECK(outcome.pairs_target.size() == 3);
    CHECK(outcome.pairs_verifier.empty());
}

TEST_CASE("hybrid mode combines both branches against its own threshold") {
    EngineFixture fixture(PipelineMode::hybrid, 2);
    fixture.config.alpha = 1.0;
    fixture.config.threshold_hybrid = 1.2;
    const std::string question = "Is the sky blue?";
    std::vector<std::string> variants = {"Would you call the sky blue?",
                                         "Does the sky appear blue?"};
    fixture.backend->add_exact(fixture.prompts->diversify(question, 2, 0),
                               "1. " + variants[0] + "\n2. " + variants[1]);

    std::vector<QAPair> src(2), tgt(2), ver(2);
    for (int j = 0; j < 2; ++j) {
        const std::string& v = variants[static_cast<std::size_t>(j)];
        std::string translated = "[t] " + v;
        fixture.backend->add_exact(fixture.prompts->answer(v, PairProducer::answerer), "yes");
        fixture.backend->add_exact(fixture.prompts->translate(v), translated);
        fixture.backend->add_exact(fixture.prompts->answer_in_language(translated), "[t] yes");
        fixture.backend->add_exact(fixture.prompts->answer(v, PairProducer::verifier),
                                   "verifier says yes");
        src[static_cast<std::size_t>(j)] = {v, "yes", PairLanguage::source,
                                            PairProducer::answerer};
        tgt[static_cast<std::size_t>(j)] = {translated, "[t] yes", PairLanguage::target,
                                            PairProducer::answerer};
        ver[static_cast<std::size_t>(j)] = {v, "verifier says yes", PairLanguage::source,
                                            PairProducer::verifier};
    }
    // CL: True, True -> 1.0.  CM: True, False -> 0.5.  Hybrid 1.5 >= 1.2.
    fixture.backend->add_exact(fixture.prompts->check_cross_language(src[0], tgt[0]), "True.");
    fixture.backend->add_exact(fixture.prompts->check_cross_language(src[1], tgt[1]), "True.");
    fixture.backend->add_exact(fixture.prompts->check_cross_model(src[0], ver[0]), "True.");
    fixture.backend->add_exact(fixture.prompts->check_cross_model(src[1], ver[1]), "False.");

    DetectionEngine engine = fixture.engine();
    DetectionOutcome outcome = engine.detect(question);

    REQUIRE(outcome.report.z_cl.has_value());
    REQUIRE(outcome.report.z_cm.has_value());
    REQUIRE(outcome.report.z_hybrid.has_value());
    CHECK(*outcome.report.z_cl == 1.0);
    CHECK(*outcome.report.z_cm == 0.5);
    CHECK(*outcome.report.z_hybrid == 1.5);
    CHECK(outcome.report.alpha == 1.0);
    CHECK(outcome.report.decision == Decision::accept_initial);
    CHECK(outcome.report.verdicts_cl.size() == 2);
    CHECK(outcome.report.verdicts_cm.size() == 2);
}

TEST_CASE("an empty-response pair is forced inequivalent without a checker call") {
    EngineFixture fixture(PipelineMode::cl, 2);
    fixture.config.threshold_cl = 0.6;
    const std::string question = "Who wrote Hamlet?";
    std::vector<std::string> variants = {"Which author wrote Hamlet?",
                                         "Hamlet was written by whom?"};
    fixture.backend->add_exact(fixture.prompts->diversify(question, 2, 0),
                               "1. " + variants[0] + "\n2. " + variants[1]);

    // Variant 0 has a full pair; variant 1's translation fails (no entry
    // for the translate call would raise, so script an empty reply).
    std::string translated0 = "[t] " + variants[0];
    fixture.backend->add_exact(fixture.prompts->answer(variants[0], PairProducer::answerer),
                               "Shakespeare");
    fixture.backend->add_exact(fixture.prompts->translate(variants[0]), translated0);
    fixture.backend->add_exact(fixture.prompts->answer_in_language(translated0),
                               "[t] Shakespeare");
    fixture.backend->add_exact(fixture.prompts->answer(variants[1], PairProducer::answerer),
                               "Shakespeare");
    fixture.backend->add_exact(fixture.prompts->translate(variants[1]), "");

    QAPair src0{variants[0], "Shakespeare", PairLanguage::source, PairProducer::answerer};
    QAPair tgt0{translated0, "[t] Shakespeare", PairLanguage::target, PairProducer::answerer};
    fixture.backend->add_exact(fixture.prompts->check_cross_language(src0, tgt0), "True.");
    // Deliberately no checker entry for variant 1: if the engine tried to
    // check the empty pair it would raise ScriptMiss and fail this test.

    DetectionEngine engine = fixture.engine();
    DetectionOutcome outcome = engine.detect(question);

    REQUIRE(outcome.report.verdicts_cl.size() == 2);
    CHECK(outcome.report.verdicts_cl[0].value == VerdictValue::equivalent);
    CHECK(outcome.report.verdicts_cl[1].value == VerdictValue::inequivalent);
    CHECK_FALSE(outcome.report.verdicts_cl[1].parsed_ok);
    CHECK(*outcome.report.z_cl == 0.5);
    CHECK(outcome.report.decision == Decision::retrieve);  // 0.5 < 0.6
    CHECK(outcome.pairs_target[1].response.empty());
}

TEST_CASE("diversification retries once and then fails closed") {
    EngineFixture fixture(PipelineMode::cl, 6);
    const std::string question = "Short on variants?";
    // Attempt 0 yields 2 variants, attempt 1 also 2: below ceil(6/2)=3.
    fixture.backend->add_exact(fixture.prompts->diversify(question, 6, 0), "1. a\n2. b");
    fixture.backend->add_exact(fixture.prompts->diversify(question, 6, 1), "1. c\n2. d");
    DetectionEngine engine = fixture.engine();
    CHECK_THROWS_AS(engine.diversify(question, 6), DiversificationFailure);

    // A second attempt that reaches the floor proceeds with what it got.
    EngineFixture fixture2(PipelineMode::cl, 6);
    fixture2.backend->add_exact(fixture2.prompts->diversify(question, 6, 0), "1. a");
    fixture2.backend->add_exact(fixture2.prompts->diversify(question, 6, 1),
                                "1. c\n2. d\n3. e\n4. f");
    DetectionEngine engine2 = fixture2.engine();
    PerturbationSet set = engine2.diversify(question, 6);
    CHECK(set.variants.size() == 4);
    CHECK(set.variants[0] == "c");
}

TEST_CASE("surplus variants are truncated to k without a retry") {
    EngineFixture fixture(PipelineMode::cl, 2);
    const std::string question = "Too many variants?";
    fixture.backend->add_exact(fixture.prompts->diversify(question, 2, 0),
                               "1. a\n2. b\n3. c\n4. d");
    DetectionEngine engine = fixture.engine();
    PerturbationSet set = engine.diversify(question, 2);
    CHECK(set.variants == std::vector<std::string>{"a", "b"});
    CHECK(fixture.backend->served().size() == 1);  // no second attempt
}

TEST_CASE("cm and hybrid modes require a verifier backend") {
    PipelineConfig config;
    config.mode = PipelineMode::cm;
    auto library = std::make_shared<PromptLibrary>();
    PromptFactory prompts(config, library);
    auto backend = std::make_shared<ScriptedBackend>();
    CHECK_THROWS_AS(DetectionEngine(backend, nullptr, prompts, config), ConfigError);

    config.mode = PipelineMode::cl;
    CHECK_NOTHROW(DetectionEngine(backend, nullptr, prompts, config));
}

}  // TEST_SUITE
