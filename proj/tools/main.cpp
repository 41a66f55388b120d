// arqa — adaptive retrieval question answering, command-line front end.
//
// Subcommands: ask, run, sweep, simgen, report, cache.  The CLI is a thin
// binder: it resolves a PipelineConfig from file + flags, hands work to the
// core library, and maps failures to distinct exit codes.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "arqa/config.hpp"
#include "arqa/errors.hpp"
#include "arqa/eval.hpp"
#include "arqa/pipeline.hpp"
#include "arqa/simlab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;    // bad config / flags / missing key env var
constexpr int kExitProvider = 3;  // provider failure or total run failure
constexpr int kExitPartial = 4;   // some questions failed, others succeeded

namespace fs = std::filesystem;

struct ConfigOverrides {
    std::string config_path;
    std::string mode;
    std::optional<int> k;
    std::optional<double> alpha;
    std::optional<double> threshold;
    std::string source_lang;
    std::string target_lang;
    std::optional<int> parallelism;
    std::string provider;
    std::string verifier;
    std::string retriever;
    std::string cache_dir;
    std::string run_dir;
    std::string template_dir;
};

void add_config_flags(CLI::App* sub, ConfigOverrides& o) {
    sub->add_option("--config", o.config_path, "Config file (JSON); flags override its values");
    sub->add_option("--mode", o.mode, "cl | cm | hybrid | always_retrieve | never_retrieve");
    sub->add_option("--k", o.k, "Number of perturbed questions");
    sub->add_option("--alpha", o.alpha, "Cross-model weight in the hybrid score");
    sub->add_option("--threshold", o.threshold, "Gate threshold for the active mode");
    sub->add_option("--source-lang", o.source_lang, "Source language code (default en)");
    sub->add_option("--target-lang", o.target_lang, "Target language code (default zh)");
    sub->add_option("--parallelism", o.parallelism, "Concurrent questions / provider calls");
    sub->add_option("--provider", o.provider, "Answerer binding, kind:arg (scripted:path | http:url)");
    sub->add_option("--verifier", o.verifier, "Verifier binding, kind:arg");
    sub->add_option("--retriever", o.retriever, "Retriever binding, kind:arg (local:dir | web:url)");
    sub->add_option("--cache-dir", o.cache_dir, "Response cache directory (empty = no cache)");
    sub->add_option("--run-dir", o.run_dir, "Root directory for run artifacts");
    sub->add_option("--template-dir", o.template_dir, "Prompt template override directory");
}

arqa::PipelineConfig resolve_config(const ConfigOverrides& o) {
    arqa::PipelineConfig config;
    if (!o.config_path.empty()) config = arqa::load_config_file(o.config_path);
    if (!o.provider.empty()) config.answerer = arqa::parse_provider_binding(o.provider);
    if (!o.verifier.empty()) {
        config.verifier = arqa::parse_provider_binding(o.verifier);
        config.verifier.model_id = "verifier";
    }
    if (!o.retriever.empty()) config.retriever = arqa::parse_retriever_binding(o.retriever);
    if (!o.mode.empty()) config.mode = arqa::parse_mode(o.mode);
    if (o.threshold) config.set_threshold_for_mode(*o.threshold);
    if (o.k) config.k = *o.k;
    if (o.alpha) config.alpha = *o.alpha;
    if (!o.source_lang.empty()) config.source_language = o.source_lang;
    if (!o.target_lang.empty()) config.target_language = o.target_lang;
    if (o.parallelism) config.parallelism = *o.parallelism;
    if (!o.cache_dir.empty()) config.cache_dir = o.cache_dir;
    if (!o.run_dir.empty()) config.run_dir = o.run_dir;
    if (!o.template_dir.empty()) config.template_dir = o.template_dir;
    config.validate();
    return config;
}

fs::path compose_run_dir(const arqa::PipelineConfig& config, const std::string& prefix) {
    if (config.run_dir.empty()) return {};
    return fs::path(config.run_dir) / (prefix + "-" + config.digest().substr(0, 12));
}

const char* decision_name(arqa::Decision decision) {
    return decision == arqa::Decision::retrieve ? "retrieve" : "accept_initial";
}

void print_metrics(const arqa::MetricReport& report) {
    std::printf("questions            %d\n", report.n);
    if (report.accuracy) std::printf("accuracy             %.4f\n", *report.accuracy);
    if (report.bleu) std::printf("bleu                 %.4f\n", *report.bleu);
    if (report.rouge_l) std::printf("rouge_l              %.4f\n", *report.rouge_l);
    std::printf("correct_fraction     %.4f\n", report.correct_fraction);
    std::printf("retrieval_rate       %.4f\n", report.retrieval_rate);
    std::printf("avg_retrieval_calls  %.4f\n", report.avg_retrieval_calls);
    std::printf("avg_llm_calls        %.4f\n", report.avg_llm_calls);
}

void print_attribution(const arqa::AttributionSummary& summary) {
    std::printf("%-22s %6s %9s\n", "attribution", "count", "percent");
    auto row = [&](const char* name, int count) {
        std::printf("%-22s %6d %8.1f%%\n", name, count, summary.percent(count));
    };
    row("correct", summary.correct);
    row("internal", summary.internal);
    row("external", summary.external);
    row("undetermined", summary.undetermined);
}

// Per-category view of call counts, one row per dataset slice.
void print_call_counts(const std::vector<arqa::AnswerTrace>& traces) {
    struct Bucket {
        int n = 0;
        std::int64_t retrieval = 0;
        std::int64_t llm = 0;
    };
    std::map<std::string, Bucket> buckets;
    for (const auto& trace : traces) {
        Bucket& b = buckets[trace.category.empty() ? std::string("all") : trace.category];
        b.n += 1;
        b.retrieval += trace.counters.retrieval_calls;
        b.llm += trace.counters.llm_calls;
    }
    std::printf("%-16s %6s %16s %14s\n", "category", "n", "avg_retrievals", "avg_llm_calls");
    for (const auto& [name, b] : buckets) {
        std::printf("%-16s %6d %16.2f %14.2f\n", name.c_str(), b.n,
                    b.n ? static_cast<double>(b.retrieval) / b.n : 0.0,
                    b.n ? static_cast<double>(b.llm) / b.n : 0.0);
    }
}

int exit_code_for(const std::vector<arqa::AnswerTrace>& traces) {
    std::size_t errors = 0;
    for (const auto& t : traces)
        if (t.status == arqa::TraceStatus::error) ++errors;
    if (errors == 0) return kExitOk;
    if (errors == traces.size()) return kExitProvider;
    return kExitPartial;
}

std::vector<std::string> split_csv_list(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        if (c == ',') {
            out.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    out.push_back(current);
    return out;
}

int cmd_ask(const ConfigOverrides& overrides, const std::vector<std::string>& words) {
    arqa::PipelineConfig config = resolve_config(overrides);
    std::string question;
    for (const auto& w : words) {
        if (!question.empty()) question += ' ';
        question += w;
    }

    arqa::DatasetRecord record;
    record.id = "ask";
    record.question = question;

    arqa::Pipeline pipeline(config);
    fs::path run_dir = compose_run_dir(config, "ask");
    std::vector<arqa::AnswerTrace> traces = pipeline.run_dataset({record}, run_dir);
    const arqa::AnswerTrace& trace = traces.at(0);

    std::printf("question   : %s\n", trace.question.c_str());
    std::printf("mode       : %s\n", arqa::mode_name(trace.mode));
    if (trace.status == arqa::TraceStatus::error) {
        std::printf("status     : error\n");
        std::printf("error      : %s\n", trace.error_message.c_str());
        if (!run_dir.empty()) std::printf("trace dir  : %s\n", run_dir.string().c_str());
        return kExitProvider;
    }
    std::printf("initial    : %s\n", trace.initial_answer.c_str());
    if (trace.detection) {
        const arqa::ConsistencyReport& r = trace.detection->report;
        if (r.z_cl) std::printf("z_cl       : %.4f\n", *r.z_cl);
        if (r.z_cm) std::printf("z_cm       : %.4f\n", *r.z_cm);
        if (r.z_hybrid) std::printf("z_hybrid   : %.4f\n", *r.z_hybrid);
        std::printf("threshold  : %.4f\n", config.threshold_for_mode());
    }
    std::printf("decision   : %s\n", decision_name(trace.decision));
    if (trace.evidence) {
        std::printf("evidence   : %zu snippets, %d chars\n", trace.evidence->snippets.size(),
                    trace.evidence->total_chars);
    }
    std::printf("final      : %s\n", trace.final_answer.c_str());
    if (!trace.flags.empty()) {
        std::string joined;
        for (const auto& f : trace.flags) {
            if (!joined.empty()) joined += ", ";
            joined += f;
        }
        std::printf("flags      : %s\n", joined.c_str());
    }
    std::printf("llm calls  : %lld (live %lld, cache %lld, script %lld)\n",
                static_cast<long long>(trace.counters.llm_calls),
                static_cast<long long>(trace.counters.llm_live_calls),
                static_cast<long long>(trace.counters.cache_hits),
                static_cast<long long>(trace.counters.script_calls));
    if (!run_dir.empty()) std::printf("trace dir  : %s\n", run_dir.string().c_str());
    return kExitOk;
}

int cmd_run(const ConfigOverrides& overrides, const std::string& dataset_path,
            std::size_t sample, std::uint64_t seed) {
    arqa::PipelineConfig config = resolve_config(overrides);
    std::vector<arqa::DatasetRecord> records = arqa::load_dataset_jsonl(dataset_path);
    if (sample > 0) records = arqa::sample_records(records, sample, seed);

    arqa::Pipeline pipeline(config);
    fs::path run_dir = compose_run_dir(config, "run");
    std::vector<arqa::AnswerTrace> traces = pipeline.run_dataset(records, run_dir);

    arqa::MetricReport report = arqa::compute_metrics(traces);
    print_metrics(report);
    if (!run_dir.empty()) std::printf("run dir              %s\n", run_dir.string().c_str());

    int code = exit_code_for(traces);
    if (code == kExitPartial || code == kExitProvider) {
        for (const auto& t : traces) {
            if (t.status == arqa::TraceStatus::error) {
                std::fprintf(stderr, "error: %s: %s\n", t.id.c_str(), t.error_message.c_str());
            }
        }
    }
    return code;
}

int cmd_sweep(const ConfigOverrides& overrides, const std::string& dataset_path,
              const std::string& axis_name, const std::string& values_text,
              const std::string& out_path, std::size_t sample, std::uint64_t seed) {
    arqa::PipelineConfig config = resolve_config(overrides);
    arqa::SweepAxis axis = arqa::parse_sweep_axis(axis_name);
    std::vector<std::string> values = split_csv_list(values_text);
    if (values.empty() || (values.size() == 1 && values[0].empty())) {
        throw arqa::ConfigError("sweep: --values must list at least one value");
    }

    std::vector<arqa::DatasetRecord> records = arqa::load_dataset_jsonl(dataset_path);
    if (sample > 0) records = arqa::sample_records(records, sample, seed);

    fs::path run_root = compose_run_dir(config, std::string("sweep-") + axis_name);
    std::vector<arqa::SweepRow> rows = arqa::sweep(records, config, axis, values, run_root);

    std::string csv = arqa::sweep_to_csv(axis, rows);
    std::fputs(csv.c_str(), stdout);
    if (!out_path.empty()) {
        std::FILE* f = std::fopen(out_path.c_str(), "wb");
        if (!f) throw arqa::ConfigError("cannot write " + out_path);
        std::fwrite(csv.data(), 1, csv.size(), f);
        std::fclose(f);
    }
    if (!run_root.empty()) std::printf("sweep dir: %s\n", run_root.string().c_str());

    std::size_t failed = 0;
    for (const auto& row : rows) {
        if (!row.ok()) {
            ++failed;
            std::fprintf(stderr, "error: value %s: %s\n", row.value.c_str(), row.error.c_str());
        }
    }
    if (failed == rows.size()) return kExitProvider;
    if (failed > 0) return kExitPartial;
    return kExitOk;
}

int cmd_simgen(const ConfigOverrides& overrides, const std::string& out_dir,
               const arqa::WorldSpec& spec, bool annotate) {
    arqa::PipelineConfig config = resolve_config(overrides);
    arqa::ScriptedWorld world = arqa::generate_world(spec, config, out_dir, annotate);

    // A ready-to-run config wired to the generated artifacts.
    arqa::PipelineConfig world_config = config;
    world_config.answerer = {arqa::ProviderBinding::Kind::scripted,
                             fs::absolute(world.script_path).string(), "answerer",
                             "ARQA_CHAT_API_KEY"};
    world_config.verifier = {arqa::ProviderBinding::Kind::scripted,
                             fs::absolute(world.script_path).string(), "verifier",
                             "ARQA_CHAT_API_KEY"};
    world_config.retriever = {arqa::RetrieverBinding::Kind::local,
                              fs::absolute(world.corpus_dir).string(), "ARQA_SEARCH_API_KEY"};
    fs::path config_path = world.root / "world-config.json";
    arqa::save_config_file(world_config, config_path);

    std::printf("world      : %s\n", fs::absolute(world.root).string().c_str());
    std::printf("questions  : %zu\n", world.records.size());
    std::printf("script     : %zu entries\n", world.backend->entry_count());
    std::printf("config     : %s\n", fs::absolute(config_path).string().c_str());
    std::printf("expected accuracy (cl mode, threshold %.2f): %.4f\n", config.threshold_cl,
                arqa::expected_accuracy(spec, config.threshold_cl, config.k));
    return kExitOk;
}

int cmd_report(const std::string& run_dir, const std::string& csv_path) {
    fs::path root(run_dir);
    fs::path manifest_path = root / "manifest.json";
    fs::path traces_dir = root / "traces";
    if (!fs::exists(traces_dir)) {
        throw arqa::ConfigError("not a run directory (no traces/): " + run_dir);
    }

    std::vector<arqa::AnswerTrace> traces;
    std::set<std::string> seen_ids;
    std::vector<std::string> unreadable;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(traces_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        try {
            std::FILE* f = std::fopen(path.c_str(), "rb");
            if (!f) throw arqa::Error("cannot open " + path.string());
            std::string text;
            char buf[65536];
            std::size_t got;
            while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
            std::fclose(f);
            traces.push_back(arqa::trace_from_json(text));
            seen_ids.insert(traces.back().id);
        } catch (const std::exception& e) {
            unreadable.push_back(path.filename().string());
        }
    }

    // The manifest knows which ids the run was supposed to contain.
    std::vector<std::string> missing;
    if (fs::exists(manifest_path)) {
        try {
            std::FILE* f = std::fopen(manifest_path.c_str(), "rb");
            std::string text;
            if (f) {
                char buf[65536];
                std::size_t got;
                while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
                std::fclose(f);
            }
            auto manifest = nlohmann::json::parse(text, nullptr, false);
            if (!manifest.is_discarded() && manifest.contains("trace_ids")) {
                for (const auto& id : manifest.at("trace_ids")) {
                    std::string s = id.get<std::string>();
                    if (!seen_ids.count(s)) missing.push_back(s);
                }
            }
        } catch (const std::exception&) {
            // manifest problems are reported below via missing-trace logic
        }
    }

    if (traces.empty()) {
        std::fprintf(stderr, "error: no readable traces in %s\n", traces_dir.string().c_str());
        return kExitProvider;
    }

    print_metrics(arqa::compute_metrics(traces));
    std::printf("\n");
    print_attribution(arqa::attribute_all(traces));
    std::printf("\n");
    print_call_counts(traces);

    if (!csv_path.empty()) {
        std::string csv = arqa::export_score_labels_csv(traces);
        std::FILE* f = std::fopen(csv_path.c_str(), "wb");
        if (!f) throw arqa::ConfigError("cannot write " + csv_path);
        std::fwrite(csv.data(), 1, csv.size(), f);
        std::fclose(f);
        std::printf("\nscores csv : %s\n", csv_path.c_str());
    }

    for (const auto& id : missing) std::fprintf(stderr, "missing trace: %s\n", id.c_str());
    for (const auto& name : unreadable) std::fprintf(stderr, "unreadable trace: %s\n", name.c_str());
    if (!missing.empty() || !unreadable.empty()) return kExitPartial;
    return kExitOk;
}

int cmd_cache(const std::string& dir, bool purge) {
    if (!fs::exists(dir)) {
        throw arqa::ConfigError("cache directory does not exist: " + dir);
    }
    arqa::ResponseCache cache(dir);
    if (purge) {
        std::size_t removed = cache.purge();
        std::printf("purged %zu entries from %s\n", removed, dir.c_str());
    } else {
        std::printf("%zu entries in %s\n", cache.entry_count(), dir.c_str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive retrieval-augmented question answering"};
    app.set_version_flag("--version", "arqa 0.1.0");
    app.require_subcommand(1);

    ConfigOverrides overrides;

    auto* ask = app.add_subcommand("ask", "Answer one question and print the trace summary");
    std::vector<std::string> ask_words;
    ask->add_option("question", ask_words, "Question text")->required()->expected(-1);
    add_config_flags(ask, overrides);

    auto* run = app.add_subcommand("run", "Run a JSONL dataset and print metrics");
    std::string run_dataset_path;
    std::size_t sample = 0;
    std::uint64_t seed = 0;
    run->add_option("dataset", run_dataset_path, "Dataset (JSONL)")->required();
    run->add_option("--sample", sample, "Randomly subsample this many questions");
    run->add_option("--seed", seed, "Sampling seed");
    add_config_flags(run, overrides);

    auto* sweep = app.add_subcommand("sweep", "Run a dataset across one parameter axis");
    std::string sweep_dataset_path, sweep_axis, sweep_values, sweep_out;
    sweep->add_option("dataset", sweep_dataset_path, "Dataset (JSONL)")->required();
    sweep->add_option("--axis", sweep_axis, "threshold | k | alpha | language_pair | verifier")
        ->required();
    sweep->add_option("--values", sweep_values, "Comma-separated axis values")->required();
    sweep->add_option("--out", sweep_out, "Write the sweep CSV here as well");
    sweep->add_option("--sample", sample, "Randomly subsample this many questions");
    sweep->add_option("--seed", seed, "Sampling seed");
    add_config_flags(sweep, overrides);

    auto* simgen = app.add_subcommand("simgen", "Generate a closed scripted world");
    std::string simgen_out;
    arqa::WorldSpec spec;
    bool annotate = false;
    simgen->add_option("out_dir", simgen_out, "Output directory")->required();
    simgen->add_option("--n", spec.n_questions, "Number of questions");
    simgen->add_option("--coverage", spec.coverage, "P(answerer knows a question)");
    simgen->add_option("--fidelity", spec.consistency_fidelity, "P(equivalent | known)");
    simgen->add_option("--confusion", spec.confusion_rate, "P(equivalent | unknown)");
    simgen->add_option("--noise", spec.retrieval_noise, "P(evidence misleads)");
    simgen->add_option("--world-seed", spec.seed, "World generation seed");
    simgen->add_flag("--annotate", annotate, "Record per-entry notes in the script");
    add_config_flags(simgen, overrides);

    auto* report = app.add_subcommand("report", "Summarize a completed run directory");
    std::string report_dir, report_csv;
    report->add_option("run_dir", report_dir, "Run directory")->required();
    report->add_option("--csv", report_csv, "Export per-question scores CSV here");

    auto* cache = app.add_subcommand("cache", "Inspect or purge a response cache");
    std::string cache_dir_arg;
    bool cache_purge = false;
    cache->add_option("dir", cache_dir_arg, "Cache directory")->required();
    cache->add_flag("--purge", cache_purge, "Delete every cached entry");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (app.got_subcommand(ask)) return cmd_ask(overrides, ask_words);
        if (app.got_subcommand(run)) return cmd_run(overrides, run_dataset_path, sample, seed);
        if (app.got_subcommand(sweep)) {
            return cmd_sweep(overrides, sweep_dataset_path, sweep_axis, sweep_values, sweep_out,
                             sample, seed);
        }
        if (app.got_subcommand(simgen)) return cmd_simgen(overrides, simgen_out, spec, annotate);
        if (app.got_subcommand(report)) return cmd_report(report_dir, report_csv);
        if (app.got_subcommand(cache)) return cmd_cache(cache_dir_arg, cache_purge);
    } catch (const arqa::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitProvider;
    }
    return kExitConfig;
}
