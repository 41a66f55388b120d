#include "arqa/pipeline.hpp"

#include <chrono>
#include <future>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

const char* decision_name(Decision d) {
    return d == Decision::retrieve ? "retrieve" : "accept_initial";
}

Decision parse_decision(const std::string& name) {
    if (name == "retrieve") return Decision::retrieve;
    if (name == "accept_initial") return Decision::accept_initial;
    throw Error("unknown decision: " + name);
}

const char* verdict_name(VerdictValue v) {
    return v == VerdictValue::equivalent ? "equivalent" : "inequivalent";
}

const char* language_tag(PairLanguage l) {
    return l == PairLanguage::source ? "source" : "target";
}

const char* producer_tag(PairProducer p) {
    return p == PairProducer::answerer ? "answerer" : "verifier";
}

nlohmann::json verdicts_to_json(const std::vector<EquivalenceVerdict>& verdicts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const EquivalenceVerdict& v : verdicts) {
        arr.push_back({{"value", verdict_name(v.value)},
                       {"raw_text", v.raw_text},
                       {"parsed_ok", v.parsed_ok}});
    }
    return arr;
}

std::vector<EquivalenceVerdict> verdicts_from_json(const nlohmann::json& arr) {
    std::vector<EquivalenceVerdict> out;
    for (const auto& item : arr) {
        EquivalenceVerdict v;
        v.value = item.at("value").get<std::string>() == "equivalent"
                      ? VerdictValue::equivalent
                      : VerdictValue::inequivalent;
        v.raw_text = item.value("raw_text", "");
        v.parsed_ok = item.value("parsed_ok", false);
        out.push_back(std::move(v));
    }
    return out;
}

nlohmann::json pairs_to_json(const std::vector<QAPair>& pairs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const QAPair& p : pairs) {
        arr.push_back({{"question", p.question},
                       {"response", p.response},
                       {"language", language_tag(p.language)},
                       {"producer", producer_tag(p.producer)}});
    }
    return arr;
}

std::vector<QAPair> pairs_from_json(const nlohmann::json& arr) {
    std::vector<QAPair> out;
    for (const auto& item : arr) {
        QAPair p;
        p.question = item.value("question", "");
        p.response = item.value("response", "");
        p.language = item.value("language", "source") == "target" ? PairLanguage::target
                                                                  : PairLanguage::source;
        p.producer = item.value("producer", "answerer") == "verifier" ? PairProducer::verifier
                                                                      : PairProducer::answerer;
        out.push_back(std::move(p));
    }
    return out;
}

nlohmann::json evidence_to_json(const EvidenceBundle& bundle) {
    nlohmann::json snippets = nlohmann::json::array();
    for (const EvidenceSnippet& s : bundle.snippets) {
        snippets.push_back({{"text", s.text},
                            {"source", s.source},
                            {"rank", s.rank},
                            {"query_index", s.query_index}});
    }
    return {{"snippets", std::move(snippets)}, {"total_chars", bundle.total_chars}};
}

EvidenceBundle evidence_from_json(const nlohmann::json& obj) {
    EvidenceBundle bundle;
    for (const auto& item : obj.value("snippets", nlohmann::json::array())) {
        EvidenceSnippet s;
        s.text = item.value("text", "");
        s.source = item.value("source", "");
        s.rank = item.value("rank", 1);
        s.query_index = item.value("query_index", 0);
        bundle.snippets.push_back(std::move(s));
    }
    bundle.total_chars = obj.value("total_chars", 0);
    return bundle;
}

std::string sanitize_filename(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        if (!ok) c = '_';
    }
    return out.empty() ? "unnamed" : out;
}

}  // namespace

std::string trace_to_json(const AnswerTrace& trace) {
    nlohmann::json doc = {
        {"id", trace.id},
        {"question", trace.question},
        {"status", trace.status == TraceStatus::ok ? "ok" : "error"},
        {"mode", mode_name(trace.mode)},
        {"thought", trace.thought},
        {"initial_answer", trace.initial_answer},
        {"decision", decision_name(trace.decision)},
        {"final_answer", trace.final_answer},
        {"flags", trace.flags},
        {"counters",
         {{"llm_calls", trace.counters.llm_calls},
          {"llm_live_calls", trace.counters.llm_live_calls},
          {"cache_hits", trace.counters.cache_hits},
          {"script_calls", trace.counters.script_calls},
          {"retrieval_calls", trace.counters.retrieval_calls},
          {"search_queries_issued", trace.counters.search_queries_issued}}},
        {"wall_time_seconds", trace.wall_time_seconds},
    };
    if (!trace.error_message.empty()) doc["error_message"] = trace.error_message;
    if (trace.detection) {
        const DetectionOutcome& d = *trace.detection;
        nlohmann::json report = {
            {"alpha", d.report.alpha},
            {"decision", decision_name(d.report.decision)},
            {"verdicts_cl", verdicts_to_json(d.report.verdicts_cl)},
            {"verdicts_cm", verdicts_to_json(d.report.verdicts_cm)},
        };
        if (d.report.z_cl) report["z_cl"] = *d.report.z_cl;
        if (d.report.z_cm) report["z_cm"] = *d.report.z_cm;
        if (d.report.z_hybrid) report["z_hybrid"] = *d.report.z_hybrid;
        doc["detection"] = {
            {"perturbations",
             {{"original", d.perturbations.original}, {"variants", d.perturbations.variants}}},
            {"pairs_source", pairs_to_json(d.pairs_source)},
            {"pairs_target", pairs_to_json(d.pairs_target)},
            {"pairs_verifier", pairs_to_json(d.pairs_verifier)},
            {"report", std::move(report)},
        };
    }
    if (trace.evidence) doc["evidence"] = evidence_to_json(*trace.evidence);
    if (trace.repaired_answer) doc["repaired_answer"] = *trace.repaired_answer;
    if (trace.gold_label) doc["gold_label"] = *trace.gold_label;
    if (!trace.gold_answers.empty()) doc["gold_answers"] = trace.gold_answers;
    if (!trace.category.empty()) doc["category"] = trace.category;
    return doc.dump(2) + "\n";
}

AnswerTrace trace_from_json(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error("trace_from_json: malformed trace document");
    }
    AnswerTrace trace;
    trace.id = doc.value("id", "");
    trace.question = doc.value("question", "");
    trace.status = doc.value("status", "ok") == "ok" ? TraceStatus::ok : TraceStatus::error;
    trace.error_message = doc.value("error_message", "");
    trace.mode = parse_mode(doc.value("mode", "hybrid"));
    trace.thought = doc.value("thought", "");
    trace.initial_answer = doc.value("initial_answer", "");
    trace.decision = parse_decision(doc.value("decision", "accept_initial"));
    trace.final_answer = doc.value("final_answer", "");
    trace.flags = doc.value("flags", std::vector<std::string>{});
    if (doc.contains("counters")) {
        const auto& c = doc["counters"];
        trace.counters.llm_calls = c.value("llm_calls", std::int64_t{0});
        trace.counters.llm_live_calls = c.value("llm_live_calls", std::int64_t{0});
        trace.counters.cache_hits = c.value("cache_hits", std::int64_t{0});
        trace.counters.script_calls = c.value("script_calls", std::int64_t{0});
        trace.counters.retrieval_calls = c.value("retrieval_calls", std::int64_t{0});
        trace.counters.search_queries_issued = c.value("search_queries_issued", std::int64_t{0});
    }
    trace.wall_time_seconds = doc.value("wall_time_seconds", 0.0);
    if (doc.contains("detection")) {
        const auto& d = doc["detection"];
        DetectionOutcome outcome;
        if (d.contains("perturbations")) {
            outcome.perturbations.original = d["perturbations"].value("original", "");
            outcome.perturbations.variants =
                d["perturbations"].value("variants", std::vector<std::string>{});
        }
        outcome.pairs_source = pairs_from_json(d.value("pairs_source", nlohmann::json::array()));
        outcome.pairs_target = pairs_from_json(d.value("pairs_target", nlohmann::json::array()));
        outcome.pairs_verifier =
            pairs_from_json(d.value("pairs_verifier", nlohmann::json::array()));
        if (d.contains("report")) {
            const auto& r = d["report"];
            outcome.report.alpha = r.value("alpha", 1.0);
            outcome.report.decision = parse_decision(r.value("decision", "accept_initial"));
            outcome.report.verdicts_cl =
                verdicts_from_json(r.value("verdicts_cl", nlohmann::json::array()));
            outcome.report.verdicts_cm =
                verdicts_from_json(r.value("verdicts_cm", nlohmann::json::array()));
            if (r.contains("z_cl")) outcome.report.z_cl = r["z_cl"].get<double>();
            if (r.contains("z_cm")) outcome.report.z_cm = r["z_cm"].get<double>();
            if (r.contains("z_hybrid")) outcome.report.z_hybrid = r["z_hybrid"].get<double>();
        }
        trace.detection = std::move(outcome);
    }
    if (doc.contains("evidence")) trace.evidence = evidence_from_json(doc["evidence"]);
    if (doc.contains("repaired_answer")) trace.repaired_answer = doc["repaired_answer"].get<std::string>();
    if (doc.contains("gold_label")) trace.gold_label = doc["gold_label"].get<std::string>();
    trace.gold_answers = doc.value("gold_answers", std::vector<std::string>{});
    trace.category = doc.value("category", "");
    return trace;
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
    config_.validate();
    library_ = std::make_shared<PromptLibrary>();
    if (!config_.template_dir.empty()) {
        library_->load_overrides(config_.template_dir);
    }
    prompts_ = std::make_unique<PromptFactory>(config_, library_);

    if (!config_.cache_dir.empty()) {
        cache_ = std::make_shared<ResponseCache>(config_.cache_dir);
    }
    answerer_ = make_backend(config_.answerer, config_.retry, cache_);

    bool needs_verifier =
        config_.mode == PipelineMode::cm || config_.mode == PipelineMode::hybrid;
    if (needs_verifier) {
        if (config_.verifier.kind == ProviderBinding::Kind::scripted &&
            config_.answerer.kind == ProviderBinding::Kind::scripted &&
            config_.verifier.arg == config_.answerer.arg) {
            verifier_ = answerer_;  // same script file; share the instance
        } else {
            verifier_ = make_backend(config_.verifier, config_.retry, cache_);
        }
    }
    if (config_.mode != PipelineMode::never_retrieve) {
        retriever_ = make_retriever(config_.retriever, config_.retry);
    }
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<ChatBackend> answerer,
                   std::shared_ptr<ChatBackend> verifier, std::shared_ptr<Retriever> retriever,
                   std::shared_ptr<ResponseCache> cache)
    : config_(std::move(config)),
      answerer_(std::move(answerer)),
      verifier_(std::move(verifier)),
      retriever_(std::move(retriever)),
      cache_(std::move(cache)) {
    config_.validate();
    if (!answerer_) {
        throw ConfigError("Pipeline: answerer backend required");
    }
    if (cache_) {
        answerer_ = std::make_shared<CachedBackend>(answerer_, cache_);
        if (verifier_) verifier_ = std::make_shared<CachedBackend>(verifier_, cache_);
    }
    bool needs_retriever = config_.mode != PipelineMode::never_retrieve;
    if (needs_retriever && !retriever_) {
        throw ConfigError("Pipeline: mode can retrieve but no retriever was supplied");
    }
    library_ = std::make_shared<PromptLibrary>();
    if (!config_.template_dir.empty()) {
        library_->load_overrides(config_.template_dir);
    }
    prompts_ = std::make_unique<PromptFactory>(config_, library_);
}

AnswerTrace Pipeline::run_question_guarded(const DatasetRecord& record) {
    auto start = std::chrono::steady_clock::now();

    AnswerTrace trace;
    trace.id = record.id;
    trace.question = record.question;
    trace.mode = config_.mode;
    trace.gold_label = record.gold_label;
    trace.gold_answers = record.gold_answers;
    trace.category = record.category;

    CallMeter meter;
    auto answerer = std::make_shared<MeteredBackend>(answerer_, meter);
    std::shared_ptr<ChatBackend> verifier;
    if (verifier_) {
        verifier = std::make_shared<MeteredBackend>(verifier_, meter);
    }

    auto finalize = [&](AnswerTrace& t) {
        t.counters.llm_calls = static_cast<std::int64_t>(meter.total.load());
        t.counters.llm_live_calls = static_cast<std::int64_t>(meter.live.load());
        t.counters.cache_hits = static_cast<std::int64_t>(meter.cache_hits.load());
        t.counters.script_calls = static_cast<std::int64_t>(meter.script.load());
        t.wall_time_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    try {
        // Stage 1: chain-of-thought, then concise extraction.
        ChatResponse cot = answerer->complete(prompts_->cot(record.question));
        trace.thought = cot.text;

        try {
            ChatResponse concise =
                answerer->complete(prompts_->concise_answer(record.question, trace.thought));
            trace.initial_answer = text::trim(concise.text);
        } catch (const ProviderError&) {
            trace.initial_answer.clear();  // fall through to sentence fallback
        }
        if (trace.initial_answer.empty()) {
            trace.initial_answer = text::last_sentence(trace.thought);
        }
        trace.final_answer = trace.initial_answer;

        if (config_.mode == PipelineMode::never_retrieve) {
            trace.decision = Decision::accept_initial;
            finalize(trace);
            return trace;
        }

        // Stage 2 (skipped in always_retrieve mode).
        std::vector<std::string> query_sources{record.question};
        if (config_.mode == PipelineMode::always_retrieve) {
            trace.decision = Decision::retrieve;
        } else {
            DetectionEngine engine(answerer, verifier, *prompts_, config_);
            trace.detection = engine.detect(record.question);
            trace.decision = trace.detection->report.decision;
            query_sources = trace.detection->perturbations.variants;
        }

        if (trace.decision == Decision::accept_initial) {
            finalize(trace);
            return trace;
        }

        // Stage 3: reformulate, search, repair.
        std::vector<SearchQuery> queries =
            reformulate(query_sources, *answerer, *prompts_,
                        static_cast<std::size_t>(config_.parallelism));
        EvidenceBundle bundle =
            search(queries, *retriever_, config_.snippets_per_query,
                   config_.snippet_budget_chars, static_cast<std::size_t>(config_.parallelism));
        trace.counters.retrieval_calls = 1;
        trace.counters.search_queries_issued = static_cast<std::int64_t>(queries.size());
        trace.evidence = bundle;

        if (bundle.empty()) {
            // Never repair without evidence.
            trace.flags.push_back("retrieval_empty");
            trace.final_answer = trace.initial_answer;
            finalize(trace);
            return trace;
        }

        ChatResponse repaired = answerer->complete(
            prompts_->repair(record.question, trace.thought, trace.initial_answer,
                             evidence_to_prompt_text(bundle)));
        std::string repaired_text = text::trim(repaired.text);
        if (repaired_text.empty()) {
            trace.flags.push_back("repair_empty");
            trace.final_answer = trace.initial_answer;
        } else {
            trace.repaired_answer = repaired_text;
            trace.final_answer = repaired_text;
        }
        finalize(trace);
        return trace;
    } catch (const std::exception& e) {
        trace.status = TraceStatus::error;
        trace.error_message = e.what();
        if (trace.final_answer.empty()) {
            trace.final_answer = trace.initial_answer;
        }
        finalize(trace);
        return trace;
    }
}

AnswerTrace Pipeline::run_question(const DatasetRecord& record) {
    return run_question_guarded(record);
}

std::vector<AnswerTrace> Pipeline::run_dataset(const std::vector<DatasetRecord>& records,
                                               const std::filesystem::path& run_dir) {
    bool persist = !run_dir.empty();
    std::filesystem::path traces_dir;
    if (persist) {
        traces_dir = run_dir / "traces";
        std::filesystem::create_directories(traces_dir);
        text::write_text_file_atomic(run_dir / "config.json", config_to_json(config_));
    }

    std::vector<AnswerTrace> traces(records.size());
    std::size_t wave = static_cast<std::size_t>(config_.parallelism);
    for (std::size_t begin = 0; begin < records.size(); begin += wave) {
        std::size_t end = std::min(begin + wave, records.size());
        std::vector<std::future<AnswerTrace>> futures;
        for (std::size_t i = begin; i < end; ++i) {
            futures.push_back(std::async(std::launch::async,
                                         [this, &records, i] { return run_question(records[i]); }));
        }
        for (std::size_t i = begin; i < end; ++i) {
            traces[i] = futures[i - begin].get();
            if (persist) {
                text::write_text_file_atomic(
                    traces_dir / (sanitize_filename(traces[i].id) + ".json"),
                    trace_to_json(traces[i]));
            }
        }
    }

    if (persist) {
        TraceCounters totals;
        int errors = 0;
        nlohmann::json ids = nlohmann::json::array();
        for (const AnswerTrace& t : traces) {
            totals.llm_calls += t.counters.llm_calls;
            totals.llm_live_calls += t.counters.llm_live_calls;
            totals.cache_hits += t.counters.cache_hits;
            totals.script_calls += t.counters.script_calls;
            totals.retrieval_calls += t.counters.retrieval_calls;
            totals.search_queries_issued += t.counters.search_queries_issued;
            if (t.status == TraceStatus::error) ++errors;
            ids.push_back(t.id);
        }
        nlohmann::json manifest = {
            {"config_digest", config_.digest()},
            {"n", traces.size()},
            {"errors", errors},
            {"trace_ids", std::move(ids)},
            {"counters",
             {{"llm_calls", totals.llm_calls},
              {"llm_live_calls", totals.llm_live_calls},
              {"cache_hits", totals.cache_hits},
              {"script_calls", totals.script_calls},
              {"retrieval_calls", totals.retrieval_calls},
              {"search_queries_issued", totals.search_queries_issued}}},
            {"created_at", text::utc_now_iso8601()},
        };
        text::write_text_file_atomic(run_dir / "manifest.json", manifest.dump(2) + "\n");
    }
    return traces;
}

}  // namespace arqa
