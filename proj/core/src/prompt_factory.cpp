#include "arqa/prompt_factory.hpp"

#include "arqa/errors.hpp"

namespace arqa {

namespace {

std::string render_qa(const QAPair& pair) {
    return "Question: " + pair.question + "\nAnswer: " + pair.response;
}

}  // namespace

PromptFactory::PromptFactory(const PipelineConfig& config,
                             std::shared_ptr<const PromptLibrary> library)
    : answerer_model_(config.answerer.model_id),
      verifier_model_(config.verifier.model_id),
      source_language_(config.source_language),
      target_language_(config.target_language),
      temperatures_(config.temperatures),
      library_(std::move(library)) {
    if (!library_) {
        throw ConfigError("PromptFactory requires a prompt library");
    }
}

ChatRequest PromptFactory::user_request(const std::string& model_id, std::string content,
                                        double temperature, std::uint32_t sample_index) const {
    ChatRequest request;
    request.model_id = model_id;
    request.messages.push_back({Role::user, std::move(content)});
    request.temperature = temperature;
    request.sample_index = sample_index;
    return request;
}

ChatRequest PromptFactory::cot(const std::string& question) const {
    return user_request(answerer_model_,
                        library_->render(TemplateId::cot, {{"question", question}}),
                        temperatures_.other);
}

ChatRequest PromptFactory::concise_answer(const std::string& question,
                                          const std::string& thought) const {
    return user_request(
        answerer_model_,
        library_->render(TemplateId::concise_answer, {{"question", question}, {"thought", thought}}),
        temperatures_.other);
}

ChatRequest PromptFactory::diversify(const std::string& question, int k,
                                     std::uint32_t sample_index) const {
    return user_request(
        answerer_model_,
        library_->render(TemplateId::diversify,
                         {{"question", question}, {"k", std::to_string(k)}}),
        temperatures_.diversify, sample_index);
}

ChatRequest PromptFactory::translate(const std::string& question) const {
    return user_request(
        answerer_model_,
        library_->render(TemplateId::translate,
                         {{"question", question},
                          {"target_language", language_display_name(target_language_)}}),
        temperatures_.other);
}

ChatRequest PromptFactory::answer(const std::string& question, PairProducer producer) const {
    const std::string& model =
        producer == PairProducer::verifier ? verifier_model_ : answerer_model_;
    return user_request(model, library_->render(TemplateId::answer, {{"question", question}}),
                        temperatures_.other);
}

ChatRequest PromptFactory::answer_in_language(const std::string& translated_question) const {
    return user_request(
        answerer_model_,
        library_->render(TemplateId::answer_in_language,
                         {{"question", translated_question},
                          {"language", language_display_name(target_language_)}}),
        temperatures_.other);
}

ChatRequest PromptFactory::check_cross_language(const QAPair& source_pair,
                                                const QAPair& target_pair) const {
    return user_request(
        answerer_model_,
        library_->render(TemplateId::equivalence_cross_language,
                         {{"source_language", language_display_name(source_language_)},
                          {"target_language", language_display_name(target_language_)},
                          {"question", source_pair.question},
                          {"answer_a", source_pair.response},
                          {"answer_b", target_pair.response}}),
        temperatures_.other);
}

ChatRequest PromptFactory::check_cross_model(const QAPair& answer_pair,
                                             const QAPair& verifier_pair) const {
    return user_request(answerer_model_,
                        library_->render(TemplateId::equivalence_cross_model,
                                         {{"qa_a", render_qa(answer_pair)},
                                          {"qa_b", render_qa(verifier_pair)}}),
                        temperatures_.other);
}

ChatRequest PromptFactory::reformulate(const std::string& question) const {
    return user_request(answerer_model_,
                        library_->render(TemplateId::reformulate, {{"question", question}}),
                        temperatures_.other);
}

ChatRequest PromptFactory::repair(const std::string& question, const std::string& thought,
                                  const std::string& initial_answer,
                                  const std::string& evidence_text) const {
    return user_request(answerer_model_,
                        library_->render(TemplateId::repair, {{"question", question},
                                                              {"thought", thought},
                                                              {"initial_answer", initial_answer},
                                                              {"evidence", evidence_text}}),
                        temperatures_.other);
}

PromptFactory make_prompt_factory(const PipelineConfig& config) {
    auto library = std::make_shared<PromptLibrary>();
    if (!config.template_dir.empty()) {
        library->load_overrides(config.template_dir);
    }
    return PromptFactory(config, std::move(library));
}

}  // namespace arqa
