#include "arqa/providers.hpp"

#include <future>
#include <regex>

#include <nlohmann/json.hpp>

#include "arqa/errors.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

std::atomic<std::uint64_t> g_transport_attempts{0};

std::string joined_contents(const ChatRequest& request) {
    std::string out;
    for (const Message& m : request.messages) {
        if (!out.empty()) out += '\n';
        out += m.content;
    }
    return out;
}

std::string excerpt(const ChatRequest& request) {
    std::string last = request.messages.empty() ? std::string() : request.messages.back().content;
    if (last.size() > 120) {
        last.resize(120);
        last += "...";
    }
    return last;
}

}  // namespace

std::uint64_t transport_attempts() {
    return g_transport_attempts.load();
}

void detail::note_transport_attempt() {
    g_transport_attempts.fetch_add(1);
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    request.validate();
    std::string digest = request_digest(request);

    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(digest);
    if (it != entries_.end()) {
        served_.push_back(digest);
        ChatResponse r;
        r.text = it->second;
        r.provenance = Provenance::script;
        return r;
    }
    std::string haystack = joined_contents(request);
    for (const auto& [pattern, reply] : rules_) {
        if (std::regex_search(haystack, std::regex(pattern))) {
            served_.push_back(digest);
            ChatResponse r;
            r.text = reply;
            r.provenance = Provenance::script;
            return r;
        }
    }
    throw ScriptMiss("no script entry for request " + digest + " (prompt tail: \"" + excerpt(request) + "\")");
}

void ScriptedBackend::add_exact(const ChatRequest& request, const std::string& reply) {
    add_exact_digest(request_digest(request), reply);
}

void ScriptedBackend::add_exact_digest(const std::string& digest, const std::string& reply) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[digest] = reply;
}

void ScriptedBackend::add_rule(const std::string& pattern, const std::string& reply) {
    std::regex probe(pattern);  // validate eagerly; throws std::regex_error
    (void)probe;
    std::lock_guard<std::mutex> lock(mutex_);
    rules_.emplace_back(pattern, reply);
}

std::size_t ScriptedBackend::entry_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

std::vector<std::string> ScriptedBackend::served() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return served_;
}

void ScriptedBackend::clear_served() {
    std::lock_guard<std::mutex> lock(mutex_);
    served_.clear();
}

void ScriptedBackend::annotate(const std::string& digest, const std::string& note) {
    std::lock_guard<std::mutex> lock(mutex_);
    notes_[digest] = note;
}

bool ScriptedBackend::remove_entry(const std::string& digest) {
    std::lock_guard<std::mutex> lock(mutex_);
    notes_.erase(digest);
    return entries_.erase(digest) > 0;
}

void ScriptedBackend::save(const std::filesystem::path& path) const {
    std::lock_guard<std::mutex> lock(mutex_);
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [digest, reply] : entries_) {
        nlohmann::json e = {{"reply", reply}};
        auto note = notes_.find(digest);
        if (note != notes_.end()) e["note"] = note->second;
        entries[digest] = std::move(e);
    }
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& [pattern, reply] : rules_) {
        rules.push_back({{"pattern", pattern}, {"reply", reply}});
    }
    nlohmann::json doc = {{"entries", std::move(entries)}, {"rules", std::move(rules)}};
    text::write_text_file_atomic(path, doc.dump(2) + "\n");
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path) {
    nlohmann::json doc = nlohmann::json::parse(text::read_text_file(path), nullptr, false);
    if (doc.is_discarded()) {
        throw ConfigError("malformed script file: " + path.string());
    }
    auto backend = std::make_shared<ScriptedBackend>();
    if (doc.contains("entries")) {
        for (const auto& [digest, entry] : doc.at("entries").items()) {
            if (entry.is_string()) {
                backend->add_exact_digest(digest, entry.get<std::string>());
            } else {
                backend->add_exact_digest(digest, entry.at("reply").get<std::string>());
            }
        }
    }
    if (doc.contains("rules")) {
        for (const auto& rule : doc.at("rules")) {
            backend->add_rule(rule.at("pattern").get<std::string>(),
                              rule.at("reply").get<std::string>());
        }
    }
    return backend;
}

CachedBackend::CachedBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {
    if (!inner_ || !cache_) {
        throw ConfigError("CachedBackend requires both an inner backend and a cache");
    }
}

ChatResponse CachedBackend::complete(const ChatRequest& request) {
    request.validate();
    std::string digest = request_digest(request);
    if (auto hit = cache_->get(digest)) {
        return *hit;
    }
    ChatResponse fresh = inner_->complete(request);
    cache_->put(digest, fresh);
    return fresh;
}

void CallMeter::record(const ChatResponse& response) {
    total.fetch_add(1);
    switch (response.provenance) {
        case Provenance::live: live.fetch_add(1); break;
        case Provenance::cache: cache_hits.fetch_add(1); break;
        case Provenance::script: script.fetch_add(1); break;
    }
}

MeteredBackend::MeteredBackend(std::shared_ptr<ChatBackend> inner, CallMeter& meter)
    : inner_(std::move(inner)), meter_(meter) {
    if (!inner_) {
        throw ConfigError("MeteredBackend requires an inner backend");
    }
}

ChatResponse MeteredBackend::complete(const ChatRequest& request) {
    try {
        ChatResponse response = inner_->complete(request);
        meter_.record(response);
        return response;
    } catch (...) {
        meter_.total.fetch_add(1);
        meter_.errors.fetch_add(1);
        throw;
    }
}

const std::string& CompletionOutcome::text() const {
    if (!response) {
        throw ProviderError("CompletionOutcome::text on failed slot: " + error);
    }
    return response->text;
}

std::vector<CompletionOutcome> complete_batch(ChatBackend& backend,
                                              const std::vector<ChatRequest>& requests,
                                              std::size_t parallelism) {
    std::vector<CompletionOutcome> outcomes(requests.size());
    if (requests.empty()) {
        return outcomes;
    }

    auto run_one = [&backend](const ChatRequest& request) {
        CompletionOutcome out;
        try {
            out.response = backend.complete(request);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        return out;
    };

    std::size_t wave = parallelism == 0 ? requests.size() : parallelism;
    for (std::size_t begin = 0; begin < requests.size(); begin += wave) {
        std::size_t end = std::min(begin + wave, requests.size());
        std::vector<std::future<CompletionOutcome>> futures;
        futures.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, run_one, std::cref(requests[i])));
        }
        for (std::size_t i = begin; i < end; ++i) {
            outcomes[i] = futures[i - begin].get();
        }
    }
    return outcomes;
}

}  // namespace arqa
