#include "annoret/prompts.hpp"

#include <cctype>
#include <sstream>

#include "annoret/util.hpp"

namespace annoret {

namespace {

const char* kRelevanceSelection =
    "You are given a question and a numbered list of candidate passages.\n"
    "Select the passages that are topically relevant to the question.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Passages:\n"
    "{numbered_passages}\n"
    "\n"
    "Reply with the bracketed numbers of the relevant passages, for example\n"
    "[1], [4]. If no passage is relevant, reply \"none\".\n";

const char* kPseudoAnswer =
    "Write a short answer to the question below. Base the answer only on the\n"
    "given passages; if they do not contain the answer, make your best guess.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Passages:\n"
    "{numbered_passages}\n"
    "\n"
    "Answer:\n";

const char* kUtilitySelection =
    "You are given a question, a reference answer, and a numbered list of\n"
    "passages. Select the passages that are useful for producing the\n"
    "reference answer.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Reference answer: {answer}\n"
    "\n"
    "Passages:\n"
    "{numbered_passages}\n"
    "\n"
    "Reply with the bracketed numbers of the useful passages, for example\n"
    "[1], [4]. If no passage is useful, reply \"none\".\n";

const char* kUtilityRanking =
    "You are given a question, a reference answer, and a numbered list of\n"
    "passages. Rank all passages from the most useful to the least useful\n"
    "for producing the reference answer.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Reference answer: {answer}\n"
    "\n"
    "Passages:\n"
    "{numbered_passages}\n"
    "\n"
    "Reply with the bracketed numbers in ranked order, for example\n"
    "[2] > [1] > [3]. Every passage must appear exactly once.\n";

const char* kRagAnswer =
    "Use the passages to answer the question. Reply with the answer only.\n"
    "\n"
    "Question: {query}\n"
    "\n"
    "Passages:\n"
    "{numbered_passages}\n"
    "\n"
    "Answer:\n";

bool placeholder_char(char c) {
    return std::isalnum((unsigned char)c) || c == '_';
}

}  // namespace

std::string to_string(TemplateId id) {
    switch (id) {
        case TemplateId::RelevanceSelection: return "relevance_selection";
        case TemplateId::PseudoAnswer: return "pseudo_answer";
        case TemplateId::UtilitySelection: return "utility_selection";
        case TemplateId::UtilityRanking: return "utility_ranking";
        case TemplateId::RagAnswer: return "rag_answer";
    }
    return "relevance_selection";
}

TemplateId template_id_from_string(const std::string& s) {
    std::string v = to_lower(s);
    if (v == "relevance_selection") return TemplateId::RelevanceSelection;
    if (v == "pseudo_answer") return TemplateId::PseudoAnswer;
    if (v == "utility_selection") return TemplateId::UtilitySelection;
    if (v == "utility_ranking") return TemplateId::UtilityRanking;
    if (v == "rag_answer") return TemplateId::RagAnswer;
    throw config_error("unknown prompt template id: " + s);
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    std::string out;
    out.reserve(body.size());
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            std::size_t j = i + 1;
            while (j < body.size() && placeholder_char(body[j])) ++j;
            if (j < body.size() && body[j] == '}' && j > i + 1) {
                std::string name = body.substr(i + 1, j - i - 1);
                auto it = bindings.find(name);
                if (it == bindings.end()) {
                    throw format_error("template " + to_string(id) +
                                       ": unbound placeholder {" + name + "}");
                }
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out += body[i];
        ++i;
    }
    return out;
}

PromptTemplate default_template(TemplateId id) {
    switch (id) {
        case TemplateId::RelevanceSelection: return {id, kRelevanceSelection};
        case TemplateId::PseudoAnswer: return {id, kPseudoAnswer};
        case TemplateId::UtilitySelection: return {id, kUtilitySelection};
        case TemplateId::UtilityRanking: return {id, kUtilityRanking};
        case TemplateId::RagAnswer: return {id, kRagAnswer};
    }
    return {id, kRelevanceSelection};
}

static const TemplateId kAllTemplates[] = {
    TemplateId::RelevanceSelection, TemplateId::PseudoAnswer,
    TemplateId::UtilitySelection,   TemplateId::UtilityRanking,
    TemplateId::RagAnswer,
};

PromptLibrary::PromptLibrary() {
    for (auto id : kAllTemplates) templates_[id] = default_template(id);
}

PromptLibrary::PromptLibrary(const std::filesystem::path& dir) : PromptLibrary() {
    if (dir.empty()) return;
    for (auto id : kAllTemplates) {
        auto file = dir / (to_string(id) + ".txt");
        if (std::filesystem::exists(file)) {
            templates_[id] = PromptTemplate{id, read_file(file)};
        }
    }
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const {
    return templates_.at(id);
}

std::string number_passages(const std::vector<Document>& docs) {
    std::ostringstream out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i) out << "\n";
        out << "[" << (i + 1) << "] " << docs[i].text;
    }
    return out.str();
}

void write_default_templates(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (auto id : kAllTemplates) {
        write_file_atomic(dir / (to_string(id) + ".txt"), default_template(id).body);
    }
}

}  // namespace annoret
