#include "arqa/simlab.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "arqa/prompt_factory.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53

// Uniform [0, 1) draw built from raw generator output so that worlds are
// byte-identical across standard libraries (std::bernoulli_distribution is
// implementation-defined).
double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * kInv53;
}

std::string pad4(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", i);
    return buf;
}

struct QuestionPlan {
    std::string id;
    int index = 0;
    bool known = false;
    std::string gold_label;  // "yes" / "no"
    std::vector<int> cl_bits;
    std::vector<int> cm_bits;
    bool noisy = false;

    std::string gold_key;
    std::string asked_key;
    std::string doc_key;  // what the corpus document asserts
    std::string question;
    std::string search_query;
    std::string thought;
    std::string initial_answer;
};

QuestionPlan plan_question(int i, const WorldSpec& spec, int k, std::mt19937_64& rng) {
    QuestionPlan q;
    q.id = "q" + pad4(i);
    q.index = i;
    q.known = unit_draw(rng) < spec.coverage;
    double p = q.known ? spec.consistency_fidelity : spec.confusion_rate;
    q.cl_bits.reserve(k);
    q.cm_bits.reserve(k);
    for (int j = 0; j < k; ++j) q.cl_bits.push_back(unit_draw(rng) < p ? 1 : 0);
    for (int j = 0; j < k; ++j) q.cm_bits.push_back(unit_draw(rng) < p ? 1 : 0);
    q.noisy = unit_draw(rng) < spec.retrieval_noise;

    std::string n = std::to_string(i);
    q.gold_label = (i % 2 == 0) ? "yes" : "no";
    q.gold_key = "code-" + n + "-gold";
    std::string halluc_key = "code-" + n + "-halluc";
    std::string noise_key = "code-" + n + "-noise";
    q.asked_key = q.gold_label == "yes" ? q.gold_key : halluc_key;

    // A misleading document asserts whatever flips the answer: a wrong key
    // for yes-questions, the very key the question doubts for no-questions.
    if (q.noisy) {
        q.doc_key = q.gold_label == "yes" ? noise_key : q.asked_key;
    } else {
        q.doc_key = q.gold_key;
    }

    q.question = "Is the access code for facility F" + n + " " + q.asked_key + "?";
    q.search_query = "access code facility F" + n;

    std::string correct_answer =
        q.gold_label == "yes"
            ? "Yes, the access code for facility F" + n + " is " + q.gold_key + "."
            : "No, the access code for facility F" + n + " is " + q.gold_key + ", not " +
                  q.asked_key + ".";
    std::string wrong_answer =
        q.gold_label == "yes"
            ? "No, the access code for facility F" + n + " is not " + q.asked_key + "."
            : "Yes, the access code for facility F" + n + " is " + q.asked_key + ".";
    q.initial_answer = q.known ? correct_answer : wrong_answer;
    q.thought = "Evaluating the premise: the question concerns the access code for facility F" +
                n + ". " + q.initial_answer;
    return q;
}

std::string variant_text(const QuestionPlan& q, int j) {
    return "Variant " + std::to_string(j + 1) + ": is the access code for facility F" +
           std::to_string(q.index) + " " + q.asked_key + "?";
}

std::string pseudo_translate(const std::string& text) {
    return "[zh] " + text;
}

std::string repair_reply(const QuestionPlan& q) {
    std::string n = std::to_string(q.index);
    if (q.doc_key == q.asked_key) {
        return "Based on the retrieved evidence, the answer is yes: the access code for "
               "facility F" + n + " is " + q.doc_key + ".";
    }
    return "Based on the retrieved evidence, the answer is no: the access code for facility F" +
           n + " is " + q.doc_key + ", not " + q.asked_key + ".";
}

}  // namespace

void WorldSpec::validate() const {
    if (n_questions < 1) throw ConfigError("world spec: n_questions must be >= 1");
    auto check_rate = [](double value, const char* name) {
        if (!(value >= 0.0 && value <= 1.0)) {
            throw ConfigError(std::string("world spec: ") + name + " must lie in [0, 1]");
        }
    };
    check_rate(coverage, "coverage");
    check_rate(consistency_fidelity, "consistency_fidelity");
    check_rate(confusion_rate, "confusion_rate");
    check_rate(retrieval_noise, "retrieval_noise");
}

ScriptedWorld generate_world(const WorldSpec& spec, const PipelineConfig& config,
                             const std::filesystem::path& out_dir, bool include_notes) {
    spec.validate();
    config.validate();

    ScriptedWorld world;
    world.root = out_dir;
    world.dataset_path = out_dir / "dataset.jsonl";
    world.corpus_dir = out_dir / "corpus";
    world.script_path = out_dir / "script.json";
    world.manifest_path = out_dir / "world.json";
    std::filesystem::create_directories(world.corpus_dir);

    int k = config.k;
    std::mt19937_64 rng(spec.seed);
    std::vector<QuestionPlan> plans;
    plans.reserve(static_cast<std::size_t>(spec.n_questions));
    for (int i = 0; i < spec.n_questions; ++i) {
        plans.push_back(plan_question(i, spec, k, rng));
    }

    // Corpus first: evidence bundles are computed through the production
    // retrieval path over the real on-disk corpus.
    nlohmann::json doc_ids = nlohmann::json::array();
    for (const QuestionPlan& q : plans) {
        std::string doc_id = "doc-" + pad4(q.index);
        nlohmann::json doc = {
            {"id", doc_id},
            {"title", "Facility F" + std::to_string(q.index)},
            {"text", "The access code for facility F" + std::to_string(q.index) + " is " +
                         q.doc_key + "."},
        };
        text::write_text_file_atomic(world.corpus_dir / (doc_id + ".json"), doc.dump(2) + "\n");
        doc_ids.push_back(doc_id);
    }
    text::write_text_file_atomic(world.corpus_dir / "index.json",
                                 nlohmann::json{{"documents", doc_ids}}.dump(2) + "\n");

    std::string dataset_lines;
    for (const QuestionPlan& q : plans) {
        nlohmann::json record = {
            {"id", q.id}, {"question", q.question}, {"gold_label", q.gold_label}};
        dataset_lines += record.dump() + "\n";

        DatasetRecord rec;
        rec.id = q.id;
        rec.question = q.question;
        rec.gold_label = q.gold_label;
        world.records.push_back(std::move(rec));
    }
    text::write_text_file_atomic(world.dataset_path, dataset_lines);

    PromptFactory prompts = make_prompt_factory(config);
    LocalCorpusRetriever retriever(world.corpus_dir);
    auto backend = std::make_shared<ScriptedBackend>();

    auto add = [&](const ChatRequest& request, const std::string& reply, const std::string& note) {
        std::string digest = request_digest(request);
        backend->add_exact_digest(digest, reply);
        if (include_notes) backend->annotate(digest, note);
    };

    for (const QuestionPlan& q : plans) {
        add(prompts.cot(q.question), q.thought, q.id + " cot");
        add(prompts.concise_answer(q.question, q.thought), q.initial_answer, q.id + " concise");

        std::vector<std::string> variants;
        for (int j = 0; j < k; ++j) variants.push_back(variant_text(q, j));

        // One diversification reply per requested count so k-sweeps over
        // smaller k stay inside the script.
        for (int kk = 1; kk <= k; ++kk) {
            std::string reply;
            for (int j = 0; j < kk; ++j) {
                reply += std::to_string(j + 1) + ". " + variants[static_cast<std::size_t>(j)];
                if (j + 1 < kk) reply += '\n';
            }
            add(prompts.diversify(q.question, kk, 0), reply,
                q.id + " diversify k=" + std::to_string(kk));
        }

        for (int j = 0; j < k; ++j) {
            const std::string& v = variants[static_cast<std::size_t>(j)];
            std::string translated = pseudo_translate(v);
            std::string src_answer = q.initial_answer;
            std::string tgt_answer = pseudo_translate(src_answer);
            std::string ver_answer = "Verifier assessment for facility F" +
                                     std::to_string(q.index) + ": " + q.initial_answer;

            add(prompts.translate(v), translated, q.id + " translate v" + std::to_string(j));
            add(prompts.answer(v, PairProducer::answerer), src_answer,
                q.id + " src answer v" + std::to_string(j));
            add(prompts.answer_in_language(translated), tgt_answer,
                q.id + " tgt answer v" + std::to_string(j));
            add(prompts.answer(v, PairProducer::verifier), ver_answer,
                q.id + " verifier answer v" + std::to_string(j));

            QAPair pair_src{v, src_answer, PairLanguage::source, PairProducer::answerer};
            QAPair pair_tgt{translated, tgt_answer, PairLanguage::target, PairProducer::answerer};
            QAPair pair_ver{v, ver_answer, PairLanguage::source, PairProducer::verifier};

            add(prompts.check_cross_language(pair_src, pair_tgt),
                q.cl_bits[static_cast<std::size_t>(j)] ? "True." : "False.",
                q.id + " cl check v" + std::to_string(j));
            add(prompts.check_cross_model(pair_src, pair_ver),
                q.cm_bits[static_cast<std::size_t>(j)] ? "True." : "False.",
                q.id + " cm check v" + std::to_string(j));
            add(prompts.reformulate(v), q.search_query,
                q.id + " reformulate v" + std::to_string(j));
        }
        add(prompts.reformulate(q.question), q.search_query, q.id + " reformulate original");

        // The evidence the pipeline will assemble, computed by the same
        // search code over the same corpus: every variant reformulates to
        // one query text, so the bundle is identical for any k' <= k and
        // for the single always-retrieve query.
        std::vector<SearchQuery> queries{{q.search_query, 0}};
        EvidenceBundle bundle = search(queries, retriever, config.snippets_per_query,
                                       config.snippet_budget_chars, 1);
        add(prompts.repair(q.question, q.thought, q.initial_answer,
                           evidence_to_prompt_text(bundle)),
            repair_reply(q), q.id + " repair");

        QuestionGroundTruth truth;
        truth.id = q.id;
        truth.known = q.known;
        truth.gold_label = q.gold_label;
        truth.cl_bits = q.cl_bits;
        truth.cm_bits = q.cm_bits;
        truth.noisy_evidence = q.noisy;
        world.truth.push_back(std::move(truth));
    }

    backend->save(world.script_path);
    world.backend = backend;

    nlohmann::json truth_json = nlohmann::json::array();
    for (const QuestionGroundTruth& t : world.truth) {
        truth_json.push_back({{"id", t.id},
                              {"known", t.known},
                              {"gold_label", t.gold_label},
                              {"cl_bits", t.cl_bits},
                              {"cm_bits", t.cm_bits},
                              {"noisy_evidence", t.noisy_evidence}});
    }
    nlohmann::json manifest = {
        {"spec",
         {{"n_questions", spec.n_questions},
          {"coverage", spec.coverage},
          {"consistency_fidelity", spec.consistency_fidelity},
          {"confusion_rate", spec.confusion_rate},
          {"retrieval_noise", spec.retrieval_noise},
          {"seed", spec.seed}}},
        {"k", k},
        {"config_digest", config.digest()},
        {"truth", std::move(truth_json)},
    };
    text::write_text_file_atomic(world.manifest_path, manifest.dump(2) + "\n");
    return world;
}

ScriptedWorld load_world(const std::filesystem::path& root) {
    ScriptedWorld world;
    world.root = root;
    world.dataset_path = root / "dataset.jsonl";
    world.corpus_dir = root / "corpus";
    world.script_path = root / "script.json";
    world.manifest_path = root / "world.json";

    world.records = load_dataset_jsonl(world.dataset_path);
    world.backend = ScriptedBackend::load(world.script_path);

    nlohmann::json manifest =
        nlohmann::json::parse(text::read_text_file(world.manifest_path), nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("truth")) {
        throw ConfigError("malformed world manifest: " + world.manifest_path.string());
    }
    for (const auto& item : manifest.at("truth")) {
        QuestionGroundTruth t;
        t.id = item.value("id", "");
        t.known = item.value("known", false);
        t.gold_label = item.value("gold_label", "");
        t.cl_bits = item.value("cl_bits", std::vector<int>{});
        t.cm_bits = item.value("cm_bits", std::vector<int>{});
        t.noisy_evidence = item.value("noisy_evidence", false);
        world.truth.push_back(std::move(t));
    }
    return world;
}

std::unique_ptr<Pipeline> make_world_pipeline(const ScriptedWorld& world,
                                              const PipelineConfig& config) {
    if (!world.backend) {
        throw ConfigError("make_world_pipeline: world has no scripted backend");
    }
    auto retriever = std::make_shared<LocalCorpusRetriever>(world.corpus_dir);
    std::shared_ptr<ResponseCache> cache;
    if (!config.cache_dir.empty()) {
        cache = std::make_shared<ResponseCache>(config.cache_dir);
    }
    return std::make_unique<Pipeline>(config, world.backend, world.backend, retriever, cache);
}

void verify_closure(const ScriptedWorld& world, const PipelineConfig& config) {
    auto check = [&world](PipelineConfig variant, const char* label) {
        variant.cache_dir.clear();  // a cache could mask a script hole
        auto pipeline = make_world_pipeline(world, variant);
        std::vector<AnswerTrace> traces = pipeline->run_dataset(world.records);
        for (const AnswerTrace& trace : traces) {
            if (trace.status == TraceStatus::error) {
                throw ClosureViolation(std::string("closure check (") + label + ") failed at " +
                                       trace.id + ": " + trace.error_message);
            }
        }
    };

    PipelineConfig always = config;
    always.mode = PipelineMode::always_retrieve;
    check(always, "always_retrieve");

    // Forcing every question through retrieval in hybrid mode touches both
    // detection branches plus the full repair path.
    PipelineConfig force = config;
    force.mode = PipelineMode::hybrid;
    force.threshold_hybrid = 2.0 + config.alpha;
    check(force, "hybrid/forced-retrieval");
}

double expected_accuracy(const WorldSpec& spec, double threshold, int k) {
    spec.validate();
    if (k < 1 || k > 62) {
        throw ConfigError("expected_accuracy: k out of range");
    }
    if (threshold < 0.0) {
        throw ConfigError("expected_accuracy: threshold must be >= 0");
    }

    // Exact binomial coefficients; k is small.
    std::vector<unsigned long long> comb(static_cast<std::size_t>(k) + 1, 1);
    for (int j = 1; j <= k; ++j) {
        comb[static_cast<std::size_t>(j)] =
            comb[static_cast<std::size_t>(j - 1)] * static_cast<unsigned long long>(k - j + 1) /
            static_cast<unsigned long long>(j);
    }

    // P(z < threshold) under z = Binom(k, p)/k, with the same strict
    // comparison on the same quotients the pipeline gate evaluates.
    auto retrieve_prob = [&](double p) {
        double total = 0.0;
        for (int j = 0; j <= k; ++j) {
            double z = static_cast<double>(j) / static_cast<double>(k);
            if (!(z < threshold)) continue;
            total += static_cast<double>(comb[static_cast<std::size_t>(j)]) *
                     std::pow(p, j) * std::pow(1.0 - p, k - j);
        }
        return total;
    };

    double retrieve_known = retrieve_prob(spec.consistency_fidelity);
    double retrieve_unknown = retrieve_prob(spec.confusion_rate);
    double clean = 1.0 - spec.retrieval_noise;

    // Known & accepted: correct.  Known & retrieved: repair trusts the
    // evidence, correct iff clean.  Unknown & accepted: wrong.  Unknown &
    // retrieved: correct iff clean.
    return spec.coverage * ((1.0 - retrieve_known) + retrieve_known * clean) +
           (1.0 - spec.coverage) * retrieve_unknown * clean;
}

}  // namespace arqa
