// Microbenchmarks for the library's hot paths: request digesting (runs
// once per provider call), consistency scoring (once per question),
// overlap retrieval (once per gated question), text metrics (once per
// evaluated trace), and cache lookup (once per provider call on warm
// runs).

#include <benchmark/benchmark.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "arqa/cache.hpp"
#include "arqa/chat.hpp"
#include "arqa/detection.hpp"
#include "arqa/metrics.hpp"
#include "arqa/retrieval.hpp"

namespace fs = std::filesystem;

namespace {

// Scratch directory living for the whole benchmark process.
class Scratch {
public:
    Scratch() {
        root_ = fs::temp_directory_path() /
                ("arqa-bench-" + std::to_string(std::random_device{}()));
        fs::create_directories(root_);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(root_, ec);
    }
    const fs::path& path() const { return root_; }

private:
    fs::path root_;
};

Scratch& scratch() {
    static Scratch s;
    return s;
}

void write_file(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << content;
}

arqa::ChatRequest make_request() {
    arqa::ChatRequest request;
    request.model_id = "answerer";
    request.messages = {
        {arqa::Role::system, "You are a careful assistant. Answer with reasoning."},
        {arqa::Role::user,
         "Is the boiling point of water at sea level equal to one hundred degrees "
         "Celsius under standard atmospheric pressure, and does this change at "
         "higher altitude where the pressure is lower than at sea level?"},
    };
    request.temperature = 1.0;
    request.sample_index = 3;
    return request;
}

const std::vector<std::string> kVocab = {"alpha", "beta",  "gamma", "delta", "omega",
                                         "sigma", "kappa", "theta", "lambda"};

std::string sentence(std::mt19937& rng, std::size_t words) {
    std::uniform_int_distribution<std::size_t> pick(0, kVocab.size() - 1);
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
        if (!out.empty()) out += ' ';
        out += kVocab[pick(rng)];
    }
    return out;
}

// 200-document corpus reused across iterations.
const fs::path& corpus_dir() {
    static fs::path dir = [] {
        fs::path corpus = scratch().path() / "corpus";
        std::mt19937 rng(7);
        std::string index = "{\"documents\":[";
        for (int i = 0; i < 200; ++i) {
            char id[16];
            std::snprintf(id, sizeof(id), "doc-%04d", i);
            std::string body = sentence(rng, 40);
            write_file(corpus / (std::string(id) + ".json"),
                       std::string("{\"id\":\"") + id + "\",\"title\":\"Doc " + id +
                           "\",\"text\":\"" + body + "\"}");
            if (i) index += ',';
            index += std::string("\"") + id + "\"";
        }
        index += "]}";
        write_file(corpus / "index.json", index);
        return corpus;
    }();
    return dir;
}

}  // namespace

static void BM_RequestDigest(benchmark::State& state) {
    arqa::ChatRequest request = make_request();
    for (auto _ : state) {
        benchmark::DoNotOptimize(arqa::request_digest(request));
    }
}
BENCHMARK(BM_RequestDigest);

static void BM_VerdictScoring(benchmark::State& state) {
    std::size_t k = static_cast<std::size_t>(state.range(0));
    std::vector<arqa::EquivalenceVerdict> cl(k), cm(k);
    for (std::size_t i = 0; i < k; ++i) {
        cl[i].value = i % 2 ? arqa::VerdictValue::equivalent : arqa::VerdictValue::inequivalent;
        cm[i].value = i % 3 ? arqa::VerdictValue::equivalent : arqa::VerdictValue::inequivalent;
    }
    for (auto _ : state) {
        double z_cl = arqa::mean_equivalence(cl);
        double z_cm = arqa::mean_equivalence(cm);
        benchmark::DoNotOptimize(arqa::score_hybrid(z_cl, z_cm, 1.0));
    }
}
BENCHMARK(BM_VerdictScoring)->Arg(6)->Arg(10);

static void BM_RougeL(benchmark::State& state) {
    std::mt19937 rng(11);
    std::string candidate = sentence(rng, 24);
    std::vector<std::string> refs = {sentence(rng, 24), sentence(rng, 20), sentence(rng, 28)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(arqa::rouge_l(candidate, refs));
    }
}
BENCHMARK(BM_RougeL);

static void BM_Bleu(benchmark::State& state) {
    std::mt19937 rng(12);
    std::string candidate = sentence(rng, 24);
    std::vector<std::string> refs = {sentence(rng, 24), sentence(rng, 20), sentence(rng, 28)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(arqa::bleu(candidate, refs));
    }
}
BENCHMARK(BM_Bleu);

static void BM_LocalRetrieverFetch(benchmark::State& state) {
    arqa::LocalCorpusRetriever retriever(corpus_dir());
    arqa::SearchQuery query{"alpha beta gamma kappa theta", 0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(retriever.fetch(query, 3));
    }
}
BENCHMARK(BM_LocalRetrieverFetch);

static void BM_CacheGet(benchmark::State& state) {
    arqa::ResponseCache cache(scratch().path() / "cache");
    arqa::ChatResponse response;
    response.text = "Yes, at standard pressure water boils at 100 degrees Celsius.";
    std::string digest = arqa::request_digest(make_request());
    cache.put(digest, response);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cache.get(digest));
    }
}
BENCHMARK(BM_CacheGet);

BENCHMARK_MAIN();
