#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "arqa/config.hpp"
#include "arqa/detection.hpp"
#include "arqa/errors.hpp"
#include "arqa/eval.hpp"
#include "arqa/pipeline.hpp"
#include "arqa/simlab.hpp"
#include "test_helpers.hpp"

using namespace arqa;
using arqa_test::TempDir;

namespace {

AnswerTrace labeled_trace(const std::string& id, const std::string& gold,
                          const std::string& final_answer,
                          Decision decision = Decision::accept_initial) {
    AnswerTrace trace;
    trace.id = id;
    trace.question = "Q?";
    trace.gold_label = gold;
    trace.final_answer = final_answer;
    trace.decision = decision;
    return trace;
}

AnswerTrace scored_trace(const std::string& id, std::optional<double> z_cl,
                         std::optional<double> z_cm, std::optional<double> z_hybrid) {
    AnswerTrace trace;
    trace.id = id;
    trace.gold_label = "yes";
    trace.final_answer = "Yes.";
    DetectionOutcome outcome;
    outcome.report.z_cl = z_cl;
    outcome.report.z_cm = z_cm;
    outcome.report.z_hybrid = z_hybrid;
    trace.detection = outcome;
    return trace;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("trace_correct on labeled data compares extracted yes/no") {
    CHECK(trace_correct(labeled_trace("a", "yes", "The answer is yes.")));
    CHECK(trace_correct(labeled_trace("b", "no", "No, definitely not.")));
    CHECK_FALSE(trace_correct(labeled_trace("c", "yes", "No.")));
    CHECK_FALSE(trace_correct(labeled_trace("d", "yes", "Perhaps; hard to say.")));

    AnswerTrace errored = labeled_trace("e", "yes", "Yes.");
    errored.status = TraceStatus::error;
    CHECK_FALSE(trace_correct(errored));

    AnswerTrace no_gold;
    no_gold.id = "f";
    no_gold.final_answer = "Yes.";
    CHECK_FALSE(trace_correct(no_gold));
}

TEST_CASE("trace_correct on reference data uses normalized containment") {
    AnswerTrace trace;
    trace.id = "r";
    trace.gold_answers = {"Eiffel Tower", "Tour Eiffel"};
    trace.final_answer = "It is the   Eiffel\n\ntower, in Paris.";
    CHECK(trace_correct(trace));  // case and whitespace are normalized away

    trace.final_answer = "It is the Leaning Tower of Pisa.";
    CHECK_FALSE(trace_correct(trace));

    // Punctuation is NOT normalized: a gold with a period must appear with it.
    trace.gold_answers = {"Eiffel Tower."};
    trace.final_answer = "The Eiffel Tower is in Paris";
    CHECK_FALSE(trace_correct(trace));

    trace.gold_answers = {""};
    trace.final_answer = "anything";
    CHECK_FALSE(trace_correct(trace));  // empty gold never matches
}

TEST_CASE("attribution partitions traces by cause") {
    AnswerTrace correct = labeled_trace("a", "yes", "Yes.");
    AnswerTrace internal = labeled_trace("b", "yes", "No.", Decision::accept_initial);
    AnswerTrace external = labeled_trace("c", "yes", "No.", Decision::retrieve);
    AnswerTrace errored = labeled_trace("d", "yes", "Yes.");
    errored.status = TraceStatus::error;
    AnswerTrace goldless;
    goldless.id = "e";
    goldless.final_answer = "Yes.";

    CHECK(attribute(correct) == AttributionLabel::correct);
    CHECK(attribute(internal) == AttributionLabel::internal);
    CHECK(attribute(external) == AttributionLabel::external);
    CHECK(attribute(errored) == AttributionLabel::undetermined);
    CHECK(attribute(goldless) == AttributionLabel::undetermined);

    AttributionSummary summary =
        attribute_all({correct, internal, external, errored, goldless});
    CHECK(summary.correct == 1);
    CHECK(summary.internal == 1);
    CHECK(summary.external == 1);
    CHECK(summary.undetermined == 2);
    CHECK(summary.total() == 5);
    REQUIRE(summary.per_question.size() == 5);
    CHECK(summary.per_question[0] ==
          std::pair<std::string, AttributionLabel>("a", AttributionLabel::correct));
    CHECK(summary.per_question[4].second == AttributionLabel::undetermined);
    CHECK(summary.percent(summary.correct) == doctest::Approx(20.0));
    CHECK(AttributionSummary{}.percent(0) == 0.0);
    CHECK(std::string(attribution_name(AttributionLabel::external)) == "external");
}

TEST_CASE("compute_metrics reports exactly what the traces support") {
    AnswerTrace yes_right = labeled_trace("a", "yes", "Yes.");
    yes_right.counters.llm_calls = 4;
    AnswerTrace yes_wrong = labeled_trace("b", "no", "Yes.", Decision::retrieve);
    yes_wrong.counters.llm_calls = 8;
    yes_wrong.counters.retrieval_calls = 1;

    MetricReport labeled = compute_metrics({yes_right, yes_wrong});
    REQUIRE(labeled.accuracy.has_value());
    CHECK(*labeled.accuracy == 0.5);
    CHECK_FALSE(labeled.bleu.has_value());
    CHECK_FALSE(labeled.rouge_l.has_value());
    CHECK(labeled.correct_fraction == 0.5);
    CHECK(labeled.retrieval_rate == 0.5);
    CHECK(labeled.avg_retrieval_calls == 0.5);
    CHECK(labeled.avg_llm_calls == 6.0);
    CHECK(labeled.n == 2);

    AnswerTrace with_refs;
    with_refs.id = "c";
    with_refs.gold_answers = {"the cat sat"};
    with_refs.final_answer = "the cat sat";
    MetricReport mixed = compute_metrics({yes_right, with_refs});
    CHECK_FALSE(mixed.accuracy.has_value());  // not every trace is labeled
    REQUIRE(mixed.bleu.has_value());
    REQUIRE(mixed.rouge_l.has_value());
    CHECK(*mixed.rouge_l == 1.0);
    CHECK(*mixed.bleu == 1.0);

    MetricReport empty = compute_metrics({});
    CHECK(empty.n == 0);
    CHECK_FALSE(empty.accuracy.has_value());
    CHECK(empty.retrieval_rate == 0.0);
}

TEST_CASE("score csv uses the pinned header and empty fields") {
    AnswerTrace full = scored_trace("q-1", 0.5, 0.25, 0.75);
    AnswerTrace cl_only = scored_trace("q,2", 0.5, std::nullopt, std::nullopt);
    cl_only.final_answer = "No.";  // wrong vs gold yes
    AnswerTrace bare;
    bare.id = "q-3";
    bare.gold_label = "yes";
    bare.final_answer = "Yes.";

    std::string csv = export_score_labels_csv({full, cl_only, bare});
    CHECK(csv ==
          "id,z_cl,z_cm,z_hybrid,correct\n"
          "q-1,0.5,0.25,0.75,true\n"
          "\"q,2\",0.5,,,false\n"
          "q-3,,,,true\n");
}

TEST_CASE("sweep axes parse and apply") {
    for (auto axis : {SweepAxis::threshold, SweepAxis::k, SweepAxis::alpha,
                      SweepAxis::language_pair, SweepAxis::verifier}) {
        CHECK(parse_sweep_axis(sweep_axis_name(axis)) == axis);
    }
    CHECK_THROWS_AS(parse_sweep_axis("temperature"), ConfigError);

    PipelineConfig base;
    base.mode = PipelineMode::cl;
    PipelineConfig thresholded = apply_axis_value(base, SweepAxis::threshold, "0.45");
    CHECK(thresholded.threshold_cl == 0.45);
    CHECK(thresholded.threshold_cm == base.threshold_cm);

    base.mode = PipelineMode::hybrid;
    CHECK(apply_axis_value(base, SweepAxis::threshold, "1.5").threshold_hybrid == 1.5);
    CHECK(apply_axis_value(base, SweepAxis::k, "3").k == 3);
    CHECK(apply_axis_value(base, SweepAxis::alpha, "0.5").alpha == 0.5);

    PipelineConfig langs = apply_axis_value(base, SweepAxis::language_pair, "en-fr");
    CHECK(langs.source_language == "en");
    CHECK(langs.target_language == "fr");
    CHECK(apply_axis_value(base, SweepAxis::verifier, "model-x").verifier.model_id == "model-x");

    CHECK_THROWS_AS(apply_axis_value(base, SweepAxis::threshold, "warm"), ConfigError);
    CHECK_THROWS_AS(apply_axis_value(base, SweepAxis::k, "2.5"), ConfigError);
    CHECK_THROWS_AS(apply_axis_value(base, SweepAxis::k, "0"), ConfigError);  // validate()
    CHECK_THROWS_AS(apply_axis_value(base, SweepAxis::language_pair, "enfr"), ConfigError);
    CHECK_THROWS_AS(apply_axis_value(base, SweepAxis::language_pair, "en-"), ConfigError);
    CHECK_THROWS_AS(apply_axis_value(base, SweepAxis::language_pair, "-fr"), ConfigError);
}

TEST_CASE("a threshold sweep over a scripted world moves the gate") {
    TempDir dir;
    WorldSpec spec;
    spec.n_questions = 8;
    spec.coverage = 0.75;
    spec.seed = 11;
    PipelineConfig config;
    config.mode = PipelineMode::cl;
    config.k = 2;
    config.parallelism = 2;
    config.run_dir.clear();
    ScriptedWorld world = generate_world(spec, config, dir.path() / "world");

    PipelineFactory factory = [&world](const PipelineConfig& cfg) {
        return make_world_pipeline(world, cfg);
    };
    auto run_root = dir.path() / "sweeps";
    std::vector<SweepRow> rows = sweep(world.records, config, SweepAxis::threshold,
                                       {"0.0", "2.1"}, run_root, factory);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].ok());
    REQUIRE(rows[1].ok());
    // z is never < 0, so threshold 0 never retrieves; z <= 1 < 2.1 always does.
    CHECK(rows[0].report.retrieval_rate == 0.0);
    CHECK(rows[1].report.retrieval_rate == 1.0);
    CHECK(rows[0].report.n == 8);
    REQUIRE(rows[0].report.accuracy.has_value());

    // Per-value run directories were written.
    CHECK(std::filesystem::exists(run_root / "threshold-0.0" / "manifest.json"));
    CHECK(std::filesystem::exists(run_root / "threshold-2.1" / "traces"));

    std::string csv = sweep_to_csv(SweepAxis::threshold, rows);
    CHECK(csv.rfind("threshold,n,accuracy,bleu,rouge_l,correct_fraction,retrieval_rate,"
                    "avg_retrieval_calls,avg_llm_calls,error\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("\n0.0,8,") != std::string::npos);
    CHECK(csv.find("\n2.1,8,") != std::string::npos);
}

TEST_CASE("a sweep records per-value failures and carries on") {
    TempDir dir;
    WorldSpec spec;
    spec.n_questions = 4;
    PipelineConfig config;
    config.mode = PipelineMode::cl;
    config.k = 2;
    config.run_dir.clear();
    ScriptedWorld world = generate_world(spec, config, dir.path() / "world");
    PipelineFactory factory = [&world](const PipelineConfig& cfg) {
        return make_world_pipeline(world, cfg);
    };

    std::vector<SweepRow> rows =
        sweep(world.records, config, SweepAxis::threshold, {"nope", "0.5"}, {}, factory);
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].ok());
    CHECK(rows[0].error.find("nope") != std::string::npos);
    CHECK(rows[1].ok());

    std::string csv = sweep_to_csv(SweepAxis::threshold, rows);
    CHECK(csv.find("nope") != std::string::npos);
}

TEST_CASE("a k sweep reuses the shared cache across values") {
    TempDir dir;
    WorldSpec spec;
    spec.n_questions = 3;
    PipelineConfig config;
    config.mode = PipelineMode::cl;
    config.k = 4;
    config.parallelism = 2;
    config.run_dir.clear();
    config.cache_dir = (dir.path() / "cache").string();
    ScriptedWorld world = generate_world(spec, config, dir.path() / "world");
    world.backend->clear_served();

    PipelineFactory factory = [&world](const PipelineConfig& cfg) {
        return make_world_pipeline(world, cfg);
    };
    std::vector<SweepRow> rows =
        sweep(world.records, config, SweepAxis::k, {"2", "4"}, {}, factory);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ok());
    CHECK(rows[1].ok());

    // The chain-of-thought prompt is identical for every k, so the second
    // sweep value must replay it from the cache: the script serves it once.
    PromptFactory prompts = make_prompt_factory(config);
    std::string cot_digest = request_digest(prompts.cot(world.records[0].question));
    auto served = world.backend->served();
    CHECK(std::count(served.begin(), served.end(), cot_digest) == 1);
}

}  // TEST_SUITE
