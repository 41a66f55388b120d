#pragma once

#include <memory>
#include <string>

#include "arqa/chat.hpp"
#include "arqa/config.hpp"
#include "arqa/templates.hpp"

namespace arqa {

enum class PairLanguage { source, target };
enum class PairProducer { answerer, verifier };

// The P^j objects of the consistency equations: a question paired with the
// response some model gave it, tagged with which language family and which
// model produced it.
struct QAPair {
    std::string question;
    std::string response;
    PairLanguage language = PairLanguage::source;
    PairProducer producer = PairProducer::answerer;
};

// Single source of truth for every request the engine can issue.  The
// pipeline builds its live requests here and scripted-world generation
// enumerates the same requests through the same methods, which is what
// makes offline closure hold by construction rather than by luck.
class PromptFactory {
public:
    PromptFactory(const PipelineConfig& config, std::shared_ptr<const PromptLibrary> library);

    ChatRequest cot(const std::string& question) const;
    ChatRequest concise_answer(const std::string& question, const std::string& thought) const;
    ChatRequest diversify(const std::string& question, int k, std::uint32_t sample_index) const;
    ChatRequest translate(const std::string& question) const;

    // Bare question to the answerer (source language) or verifier.
    ChatRequest answer(const std::string& question, PairProducer producer) const;
    // Translated question, answered in the target language.
    ChatRequest answer_in_language(const std::string& translated_question) const;

    ChatRequest check_cross_language(const QAPair& source_pair, const QAPair& target_pair) const;
    ChatRequest check_cross_model(const QAPair& answer_pair, const QAPair& verifier_pair) const;

    ChatRequest reformulate(const std::string& question) const;
    ChatRequest repair(const std::string& question, const std::string& thought,
                       const std::string& initial_answer, const std::string& evidence_text) const;

    const PromptLibrary& library() const { return *library_; }

private:
    ChatRequest user_request(const std::string& model_id, std::string content,
                             double temperature, std::uint32_t sample_index = 0) const;

    std::string answerer_model_;
    std::string verifier_model_;
    std::string source_language_;
    std::string target_language_;
    Temperatures temperatures_;
    std::shared_ptr<const PromptLibrary> library_;
};

// Builds the library (built-in texts plus config.template_dir overrides)
// and wraps it in a factory.
PromptFactory make_prompt_factory(const PipelineConfig& config);

}  // namespace arqa
