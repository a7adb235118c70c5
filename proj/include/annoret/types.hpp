#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace annoret {

struct Document {
    std::string doc_id;
    std::string text;  // may be empty
};

struct Query {
    std::string query_id;
    std::string text;
    std::vector<std::string> gold_answers;  // non-empty only for RAG-evaluable queries
};

/// Graded relevance judgments. Absent pairs are implicitly grade 0.
class RelevanceJudgments {
public:
    void set(const std::string& query_id, const std::string& doc_id, int grade);
    int grade(const std::string& query_id, const std::string& doc_id) const;
    bool has_query(const std::string& query_id) const;

    /// Doc ids with grade > 0, ascending.
    std::vector<std::string> positives(const std::string& query_id) const;

    /// All (doc_id, grade) entries for a query, ascending by doc_id.
    std::vector<std::pair<std::string, int>> judged(const std::string& query_id) const;

    std::vector<std::string> query_ids() const;
    std::size_t size() const;

private:
    std::map<std::string, std::map<std::string, int>> grades_;
};

struct RunEntry {
    std::string doc_id;
    double score = 0.0;
};

/// Ranked results per query. Entry order is rank order (1..L).
struct RunFile {
    std::string tag;
    std::vector<std::string> query_order;
    std::map<std::string, std::vector<RunEntry>> entries;

    bool has_query(const std::string& query_id) const { return entries.count(query_id) > 0; }
    const std::vector<RunEntry>& ranking(const std::string& query_id) const;
    void add(const std::string& query_id, RunEntry entry);
};

enum class AnnotationMethod { RelSel, UtilSel, UtilRank };

std::string to_string(AnnotationMethod m);
AnnotationMethod annotation_method_from_string(const std::string& s);

struct AnnotationRecord {
    std::string query_id;
    AnnotationMethod method = AnnotationMethod::RelSel;
    std::vector<std::string> positive_ids;   // ordered, duplicate-free, subset of candidates
    std::vector<std::string> candidate_ids;  // pool order as presented to the annotator
    std::optional<std::string> pseudo_answer;
    std::vector<std::string> raw_responses;  // verbatim transcripts for audit
    std::string annotator_tag;
};

/// Throws data_error (naming the query) if the record breaks its invariants.
void validate_record(const AnnotationRecord& record);

// Resolve a doc_id to its Document (nullptr when absent).
using DocLookup = std::function<const Document*(const std::string&)>;

// Lookup over a document list; the list must outlive the returned function.
DocLookup make_doc_lookup(const std::vector<Document>& docs);

}  // namespace annoret
