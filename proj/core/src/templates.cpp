#include "arqa/templates.hpp"

#include <array>
#include <cctype>

#include "arqa/errors.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

constexpr std::array<TemplateId, 10> kAllTemplates = {
    TemplateId::cot,
    TemplateId::concise_answer,
    TemplateId::diversify,
    TemplateId::translate,
    TemplateId::answer,
    TemplateId::answer_in_language,
    TemplateId::equivalence_cross_language,
    TemplateId::equivalence_cross_model,
    TemplateId::reformulate,
    TemplateId::repair,
};

const char* default_text(TemplateId id) {
    switch (id) {
        case TemplateId::cot:
            return "When responding to my question, please first evaluate the validity of the "
                   "information or the assumption underlying the question. Once you've established "
                   "its truth or existence, then proceed to deliver a detailed explanation or "
                   "answer. Prioritize accuracy and fact-checking before diving into elaboration "
                   "or conjecture.\n"
                   "\n"
                   "Question: {question}";
        case TemplateId::concise_answer:
            return "Question: {question}\n"
                   "\n"
                   "Reasoning: {thought}\n"
                   "\n"
                   "Based on the reasoning above, give a concise answer to the question. Reply "
                   "with the answer only.";
        case TemplateId::diversify:
            return "For the question [{question}], please provide {k} semantically equivalent "
                   "questions. Write each question on its own numbered line.";
        case TemplateId::translate:
            return "Translate the following question into {target_language}. Reply with the "
                   "translated question only.\n"
                   "\n"
                   "Question: {question}";
        case TemplateId::answer:
            return "{question}";
        case TemplateId::answer_in_language:
            return "Answer the following question in {language}. Reply in {language} only.\n"
                   "\n"
                   "Question: {question}";
        case TemplateId::equivalence_cross_language:
            return "Given the question Q, and two potential answers: answer A in "
                   "{source_language} and answer B in {target_language}. Your task is to "
                   "determine if the content and meaning of A and B are equivalent in the "
                   "context of answering Q. Consider linguistic nuances, cultural variations, "
                   "and the overall conveyance of information. Respond with a binary "
                   "classification. If A and B are equivalent, output 'True.', otherwise output "
                   "'False'\n"
                   "\n"
                   "Q: {question}\n"
                   "A: {answer_a}\n"
                   "B: {answer_b}";
        case TemplateId::equivalence_cross_model:
            return "Are the following two Question-Answer(QA) pairs semantically equivalent? "
                   "Provide your best guess that it is correct (True or False). Given ONLY the "
                   "guess (True or False), no other words or explanation.\n"
                   "\n"
                   "QA pair A:\n"
                   "{qa_a}\n"
                   "\n"
                   "QA pair B:\n"
                   "{qa_b}";
        case TemplateId::reformulate:
            return "Transform the following question into a query suitable for information "
                   "retrieval and then use the query to find relevant evidence. Follow these "
                   "steps for a short but comprehensive approach:\n"
                   "Original Question: {question}\n"
                   "1. Simplify the question into key terms and concepts.\n"
                   "2. Remove any elements that are not essential for a search query.\n"
                   "3. If necessary, rephrase the question to focus on the most critical aspects "
                   "for retrieval.\n"
                   "Reply with the final search query only.";
        case TemplateId::repair:
            return "You are an advanced AI with the ability to process and synthesize "
                   "information efficiently. When provided with a question, you should consider "
                   "the following aspects in your response:\n"
                   "1. The specific question asked: {question}\n"
                   "2. The reasoning process: {thought}\n"
                   "3. The short answer previously given related to the question: "
                   "{initial_answer}\n"
                   "4. Evidences that have been retrieved: {evidence}\n"
                   "Use this information to generate a concise, accurate, and relevant answer "
                   "that reflects the latest understanding of the topic based on the input "
                   "provided.\n"
                   "Your response should be clear, direct, and provide the most up-to-date "
                   "information available while maintaining coherence with the previous "
                   "discussion points.";
    }
    throw ConfigError("unknown template id");
}

bool is_placeholder_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

const char* template_name(TemplateId id) {
    switch (id) {
        case TemplateId::cot: return "cot";
        case TemplateId::concise_answer: return "concise_answer";
        case TemplateId::diversify: return "diversify";
        case TemplateId::translate: return "translate";
        case TemplateId::answer: return "answer";
        case TemplateId::answer_in_language: return "answer_in_language";
        case TemplateId::equivalence_cross_language: return "equivalence_cross_language";
        case TemplateId::equivalence_cross_model: return "equivalence_cross_model";
        case TemplateId::reformulate: return "reformulate";
        case TemplateId::repair: return "repair";
    }
    return "unknown";
}

PromptLibrary::PromptLibrary() {
    for (TemplateId id : kAllTemplates) {
        texts_[id] = default_text(id);
    }
}

const std::string& PromptLibrary::text(TemplateId id) const {
    return texts_.at(id);
}

void PromptLibrary::set(TemplateId id, std::string text) {
    texts_[id] = std::move(text);
}

void PromptLibrary::load_overrides(const std::filesystem::path& directory) {
    for (TemplateId id : kAllTemplates) {
        std::filesystem::path file = directory / (std::string(template_name(id)) + ".txt");
        std::error_code ec;
        if (!std::filesystem::exists(file, ec)) continue;
        std::string content = text::read_text_file(file);
        while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) {
            content.pop_back();
        }
        texts_[id] = std::move(content);
    }
}

std::string PromptLibrary::render(TemplateId id,
                                  const std::map<std::string, std::string>& values) const {
    const std::string& tmpl = text(id);
    std::string out;
    out.reserve(tmpl.size() + 64);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        char c = tmpl[i];
        if (c != '{') {
            out.push_back(c);
            ++i;
            continue;
        }
        std::size_t name_begin = i + 1;
        std::size_t j = name_begin;
        while (j < tmpl.size() && is_placeholder_char(tmpl[j])) ++j;
        if (j == name_begin || j >= tmpl.size() || tmpl[j] != '}') {
            out.push_back(c);  // not a placeholder; literal brace
            ++i;
            continue;
        }
        std::string name = tmpl.substr(name_begin, j - name_begin);
        auto it = values.find(name);
        if (it == values.end()) {
            throw ConfigError("template '" + std::string(template_name(id)) +
                              "' references unknown placeholder {" + name + "}");
        }
        out += it->second;
        i = j + 1;
    }
    return out;
}

std::string language_display_name(const std::string& code) {
    static const std::map<std::string, std::string> names = {
        {"en", "English"}, {"zh", "Chinese"},  {"de", "German"},
        {"fr", "French"},  {"es", "Spanish"},  {"ja", "Japanese"},
        {"ko", "Korean"},  {"ru", "Russian"},  {"ar", "Arabic"},
        {"hi", "Hindi"},   {"pt", "Portuguese"}, {"it", "Italian"},
    };
    auto it = names.find(code);
    return it == names.end() ? code : it->second;
}

}  // namespace arqa
