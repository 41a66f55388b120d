#include "arqa/config.hpp"

#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

const char* provider_kind_name(ProviderBinding::Kind kind) {
    return kind == ProviderBinding::Kind::scripted ? "scripted" : "http";
}

const char* retriever_kind_name(RetrieverBinding::Kind kind) {
    return kind == RetrieverBinding::Kind::local ? "local" : "web";
}

std::pair<std::string, std::string> split_binding(const std::string& text) {
    std::size_t colon = text.find(':');
    if (colon == std::string::npos) {
        return {text, ""};
    }
    return {text.substr(0, colon), text.substr(colon + 1)};
}

void check_known_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                      const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (known.count(key) == 0) {
            throw ConfigError("unknown config key \"" + key + "\" in " + where);
        }
    }
}

ProviderBinding provider_from_json(const nlohmann::json& obj, const std::string& where,
                                   const ProviderBinding& defaults) {
    check_known_keys(obj, {"kind", "arg", "model_id", "api_key_env"}, where);
    ProviderBinding binding = defaults;
    if (obj.contains("kind")) {
        std::string kind = obj.at("kind").get<std::string>();
        if (kind == "scripted") {
            binding.kind = ProviderBinding::Kind::scripted;
        } else if (kind == "http") {
            binding.kind = ProviderBinding::Kind::http;
        } else {
            throw ConfigError("unknown provider kind \"" + kind + "\" in " + where);
        }
    }
    if (obj.contains("arg")) binding.arg = obj.at("arg").get<std::string>();
    if (obj.contains("model_id")) binding.model_id = obj.at("model_id").get<std::string>();
    if (obj.contains("api_key_env")) binding.api_key_env = obj.at("api_key_env").get<std::string>();
    return binding;
}

RetrieverBinding retriever_from_json(const nlohmann::json& obj, const std::string& where) {
    check_known_keys(obj, {"kind", "arg", "api_key_env"}, where);
    RetrieverBinding binding;
    if (obj.contains("kind")) {
        std::string kind = obj.at("kind").get<std::string>();
        if (kind == "local") {
            binding.kind = RetrieverBinding::Kind::local;
        } else if (kind == "web") {
            binding.kind = RetrieverBinding::Kind::web;
        } else {
            throw ConfigError("unknown retriever kind \"" + kind + "\" in " + where);
        }
    }
    if (obj.contains("arg")) binding.arg = obj.at("arg").get<std::string>();
    if (obj.contains("api_key_env")) binding.api_key_env = obj.at("api_key_env").get<std::string>();
    return binding;
}

nlohmann::json provider_to_json(const ProviderBinding& binding) {
    return {
        {"kind", provider_kind_name(binding.kind)},
        {"arg", binding.arg},
        {"model_id", binding.model_id},
        {"api_key_env", binding.api_key_env},
    };
}

nlohmann::json retriever_to_json(const RetrieverBinding& binding) {
    return {
        {"kind", retriever_kind_name(binding.kind)},
        {"arg", binding.arg},
        {"api_key_env", binding.api_key_env},
    };
}

}  // namespace

const char* mode_name(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::cl: return "cl";
        case PipelineMode::cm: return "cm";
        case PipelineMode::hybrid: return "hybrid";
        case PipelineMode::always_retrieve: return "always_retrieve";
        case PipelineMode::never_retrieve: return "never_retrieve";
    }
    return "hybrid";
}

PipelineMode parse_mode(const std::string& name) {
    if (name == "cl") return PipelineMode::cl;
    if (name == "cm") return PipelineMode::cm;
    if (name == "hybrid") return PipelineMode::hybrid;
    if (name == "always_retrieve") return PipelineMode::always_retrieve;
    if (name == "never_retrieve") return PipelineMode::never_retrieve;
    throw ConfigError("unknown pipeline mode \"" + name +
                      "\" (expected cl, cm, hybrid, always_retrieve, or never_retrieve)");
}

ProviderBinding parse_provider_binding(const std::string& text) {
    auto [kind, arg] = split_binding(text);
    ProviderBinding binding;
    if (kind == "scripted") {
        binding.kind = ProviderBinding::Kind::scripted;
    } else if (kind == "http") {
        binding.kind = ProviderBinding::Kind::http;
    } else {
        throw ConfigError("provider binding must be scripted:<path> or http:<url>, got \"" +
                          text + "\"");
    }
    if (arg.empty()) {
        throw ConfigError("provider binding \"" + text + "\" is missing its argument "
                          "(expected scripted:<path> or http:<url>)");
    }
    binding.arg = arg;
    return binding;
}

RetrieverBinding parse_retriever_binding(const std::string& text) {
    auto [kind, arg] = split_binding(text);
    RetrieverBinding binding;
    if (kind == "local") {
        binding.kind = RetrieverBinding::Kind::local;
    } else if (kind == "web") {
        binding.kind = RetrieverBinding::Kind::web;
    } else {
        throw ConfigError("retriever binding must be local:<dir> or web:<url>, got \"" + text +
                          "\"");
    }
    if (arg.empty()) {
        throw ConfigError("retriever binding \"" + text + "\" is missing its argument "
                          "(expected local:<dir> or web:<url>)");
    }
    binding.arg = arg;
    return binding;
}

double PipelineConfig::threshold_for_mode() const {
    switch (mode) {
        case PipelineMode::cl: return threshold_cl;
        case PipelineMode::cm: return threshold_cm;
        default: return threshold_hybrid;
    }
}

void PipelineConfig::set_threshold_for_mode(double value) {
    switch (mode) {
        case PipelineMode::cl: threshold_cl = value; break;
        case PipelineMode::cm: threshold_cm = value; break;
        default: threshold_hybrid = value; break;
    }
}

void PipelineConfig::validate() const {
    if (k < 1) throw ConfigError("config: k must be >= 1");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("config: alpha must be >= 0");
    if (!(threshold_cl >= 0.0) || !(threshold_cm >= 0.0) || !(threshold_hybrid >= 0.0)) {
        throw ConfigError("config: thresholds must be >= 0");
    }
    if (source_language.empty() || target_language.empty()) {
        throw ConfigError("config: language codes must be non-empty");
    }
    if (source_language == target_language) {
        throw ConfigError("config: source and target language must differ");
    }
    auto check_temp = [](double t, const char* name) {
        if (!std::isfinite(t) || t < 0.0 || t > 2.0) {
            throw ConfigError(std::string("config: temperature ") + name + " must lie in [0, 2]");
        }
    };
    check_temp(temperatures.diversify, "diversify");
    check_temp(temperatures.other, "other");
    if (snippets_per_query < 1) throw ConfigError("config: snippets_per_query must be >= 1");
    if (snippet_budget_chars < 0) throw ConfigError("config: snippet_budget_chars must be >= 0");
    if (retry.max_retries < 0) throw ConfigError("config: retry.max_retries must be >= 0");
    if (retry.initial_backoff_ms < 0) throw ConfigError("config: retry.initial_backoff_ms must be >= 0");
    if (parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
    if (answerer.model_id.empty() || verifier.model_id.empty()) {
        throw ConfigError("config: provider model ids must be non-empty");
    }
}

std::string config_to_json(const PipelineConfig& config) {
    nlohmann::json doc = {
        {"k", config.k},
        {"alpha", config.alpha},
        {"mode", mode_name(config.mode)},
        {"thresholds", {{"cl", config.threshold_cl},
                        {"cm", config.threshold_cm},
                        {"hybrid", config.threshold_hybrid}}},
        {"source_language", config.source_language},
        {"target_language", config.target_language},
        {"temperatures", {{"diversify", config.temperatures.diversify},
                          {"other", config.temperatures.other}}},
        {"snippets_per_query", config.snippets_per_query},
        {"snippet_budget_chars", config.snippet_budget_chars},
        {"retry", {{"max_retries", config.retry.max_retries},
                   {"initial_backoff_ms", config.retry.initial_backoff_ms}}},
        {"parallelism", config.parallelism},
        {"answerer", provider_to_json(config.answerer)},
        {"verifier", provider_to_json(config.verifier)},
        {"retriever", retriever_to_json(config.retriever)},
        {"cache_dir", config.cache_dir},
        {"run_dir", config.run_dir},
        {"template_dir", config.template_dir},
    };
    return doc.dump(2) + "\n";
}

PipelineConfig parse_config_json(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ConfigError("config is not a JSON object");
    }
    check_known_keys(doc,
                     {"k", "alpha", "mode", "thresholds", "source_language", "target_language",
                      "temperatures", "snippets_per_query", "snippet_budget_chars", "retry",
                      "parallelism", "answerer", "verifier", "retriever", "cache_dir", "run_dir",
                      "template_dir"},
                     "config");
    PipelineConfig config;
    if (doc.contains("k")) config.k = doc.at("k").get<int>();
    if (doc.contains("alpha")) config.alpha = doc.at("alpha").get<double>();
    if (doc.contains("mode")) config.mode = parse_mode(doc.at("mode").get<std::string>());
    if (doc.contains("thresholds")) {
        const auto& t = doc.at("thresholds");
        check_known_keys(t, {"cl", "cm", "hybrid"}, "config.thresholds");
        if (t.contains("cl")) config.threshold_cl = t.at("cl").get<double>();
        if (t.contains("cm")) config.threshold_cm = t.at("cm").get<double>();
        if (t.contains("hybrid")) config.threshold_hybrid = t.at("hybrid").get<double>();
    }
    if (doc.contains("source_language")) config.source_language = doc.at("source_language").get<std::string>();
    if (doc.contains("target_language")) config.target_language = doc.at("target_language").get<std::string>();
    if (doc.contains("temperatures")) {
        const auto& t = doc.at("temperatures");
        check_known_keys(t, {"diversify", "other"}, "config.temperatures");
        if (t.contains("diversify")) config.temperatures.diversify = t.at("diversify").get<double>();
        if (t.contains("other")) config.temperatures.other = t.at("other").get<double>();
    }
    if (doc.contains("snippets_per_query")) config.snippets_per_query = doc.at("snippets_per_query").get<int>();
    if (doc.contains("snippet_budget_chars")) config.snippet_budget_chars = doc.at("snippet_budget_chars").get<int>();
    if (doc.contains("retry")) {
        const auto& r = doc.at("retry");
        check_known_keys(r, {"max_retries", "initial_backoff_ms"}, "config.retry");
        if (r.contains("max_retries")) config.retry.max_retries = r.at("max_retries").get<int>();
        if (r.contains("initial_backoff_ms")) config.retry.initial_backoff_ms = r.at("initial_backoff_ms").get<int>();
    }
    if (doc.contains("parallelism")) config.parallelism = doc.at("parallelism").get<int>();
    if (doc.contains("answerer")) {
        config.answerer = provider_from_json(doc.at("answerer"), "config.answerer", config.answerer);
    }
    if (doc.contains("verifier")) {
        config.verifier = provider_from_json(doc.at("verifier"), "config.verifier", config.verifier);
    }
    if (doc.contains("retriever")) {
        config.retriever = retriever_from_json(doc.at("retriever"), "config.retriever");
    }
    if (doc.contains("cache_dir")) config.cache_dir = doc.at("cache_dir").get<std::string>();
    if (doc.contains("run_dir")) config.run_dir = doc.at("run_dir").get<std::string>();
    if (doc.contains("template_dir")) config.template_dir = doc.at("template_dir").get<std::string>();
    config.validate();
    return config;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
    std::string content;
    try {
        content = text::read_text_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    try {
        return parse_config_json(content);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_config_file(const PipelineConfig& config, const std::filesystem::path& path) {
    text::write_text_file_atomic(path, config_to_json(config));
}

std::string PipelineConfig::digest() const {
    return text::sha256_hex(config_to_json(*this));
}

std::shared_ptr<ChatBackend> make_backend(const ProviderBinding& binding,
                                          const RetryPolicy& retry,
                                          std::shared_ptr<ResponseCache> cache) {
    std::shared_ptr<ChatBackend> backend;
    if (binding.kind == ProviderBinding::Kind::scripted) {
        if (binding.arg.empty()) {
            throw ConfigError("scripted provider needs a script path (scripted:<path>)");
        }
        backend = ScriptedBackend::load(binding.arg);
    } else {
        HttpBackendConfig http;
        http.base_url = binding.arg;
        http.api_key_env = binding.api_key_env;
        http.retry = retry;
        backend = std::make_shared<HttpBackend>(std::move(http));
    }
    if (cache) {
        backend = std::make_shared<CachedBackend>(std::move(backend), std::move(cache));
    }
    return backend;
}

std::shared_ptr<Retriever> make_retriever(const RetrieverBinding& binding,
                                          const RetryPolicy& retry) {
    if (binding.kind == RetrieverBinding::Kind::local) {
        if (binding.arg.empty()) {
            throw ConfigError("local retriever needs a corpus directory (local:<dir>)");
        }
        return std::make_shared<LocalCorpusRetriever>(binding.arg);
    }
    WebSearchConfig web;
    web.base_url = binding.arg;
    web.api_key_env = binding.api_key_env;
    web.retry = retry;
    return std::make_shared<WebSearchRetriever>(std::move(web));
}

}  // namespace arqa
