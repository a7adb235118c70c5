#pragma once

// Prompt templates for the annotation and generation calls. Bodies are plain
// text with {placeholder} slots; built-in defaults can be overridden by text
// files in a prompts directory (one file per template id, e.g.
// relevance_selection.txt). The bundled mock backend recognizes the default
// bodies by their instruction phrases, so custom templates only work with
// real backends.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "annoret/types.hpp"

namespace annoret {

enum class TemplateId {
    RelevanceSelection,
    PseudoAnswer,
    UtilitySelection,
    UtilityRanking,
    RagAnswer,
};

std::string to_string(TemplateId id);
TemplateId template_id_from_string(const std::string& s);

struct PromptTemplate {
    TemplateId id;
    std::string body;

    // Substitute {name} slots from bindings. Throws format_error when the
    // body references a name with no binding.
    std::string render(const std::map<std::string, std::string>& bindings) const;
};

PromptTemplate default_template(TemplateId id);

// One template per id, defaults overridden by `<id>.txt` files under dir
// (pass an empty path for defaults only).
class PromptLibrary {
   public:
    PromptLibrary();
    explicit PromptLibrary(const std::filesystem::path& dir);
    const PromptTemplate& get(TemplateId id) const;

   private:
    std::map<TemplateId, PromptTemplate> templates_;
};

// "[1] text\n[2] text\n..." in input order, for the {numbered_passages} slot.
std::string number_passages(const std::vector<Document>& docs);

// Write the default template bodies into dir as editable assets.
void write_default_templates(const std::filesystem::path& dir);

}  // namespace annoret
