#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace arqa {

// Every prompt the engine can issue, one template per call site.
enum class TemplateId {
    cot,                         // stage-1 chain-of-thought answer
    concise_answer,              // stage-1 short-answer extraction
    diversify,                   // k semantically equivalent questions
    translate,                   // variant -> target language
    answer,                      // bare question (source-language / verifier)
    answer_in_language,          // answer in the target language
    equivalence_cross_language,  // True/False check, source vs target pair
    equivalence_cross_model,     // True/False check, answerer vs verifier pair
    reformulate,                 // question -> search query
    repair,                      // evidence-conditioned rewrite
};

const char* template_name(TemplateId id);

// Prompt texts with {name} placeholders.  Placeholders are substituted in
// a single pass: an identifier in braces must be supplied by the caller
// (ConfigError otherwise); substituted values are inserted literally and
// never re-scanned; any other brace is left as-is.
class PromptLibrary {
public:
    // Built-in default texts for every TemplateId.
    PromptLibrary();

    const std::string& text(TemplateId id) const;
    void set(TemplateId id, std::string text);

    // Replaces any template that has a "<name>.txt" file in the directory.
    // Trailing newlines are stripped so editor-added EOF newlines do not
    // leak into prompts.
    void load_overrides(const std::filesystem::path& directory);

    std::string render(TemplateId id, const std::map<std::string, std::string>& values) const;

private:
    std::map<TemplateId, std::string> texts_;
};

// Human-readable language name for a BCP-47-ish code ("en" -> "English");
// unknown codes pass through unchanged.
std::string language_display_name(const std::string& code);

}  // namespace arqa
