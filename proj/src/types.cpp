#include "annoret/types.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include "annoret/util.hpp"

namespace annoret {

void RelevanceJudgments::set(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) throw format_error("negative grade for " + query_id + " " + doc_id);
    grades_[query_id][doc_id] = grade;
}

int RelevanceJudgments::grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = grades_.find(query_id);
    if (q == grades_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
}

bool RelevanceJudgments::has_query(const std::string& query_id) const {
    return grades_.count(query_id) > 0;
}

std::vector<std::string> RelevanceJudgments::positives(const std::string& query_id) const {
    std::vector<std::string> out;
    auto q = grades_.find(query_id);
    if (q == grades_.end()) return out;
    for (const auto& [doc, g] : q->second) {
        if (g > 0) out.push_back(doc);
    }
    return out;
}

std::vector<std::pair<std::string, int>> RelevanceJudgments::judged(const std::string& query_id) const {
    std::vector<std::pair<std::string, int>> out;
    auto q = grades_.find(query_id);
    if (q == grades_.end()) return out;
    out.assign(q->second.begin(), q->second.end());
    return out;
}

std::vector<std::string> RelevanceJudgments::query_ids() const {
    std::vector<std::string> out;
    out.reserve(grades_.size());
    for (const auto& [qid, _] : grades_) out.push_back(qid);
    return out;
}

std::size_t RelevanceJudgments::size() const {
    std::size_t n = 0;
    for (const auto& [_, docs] : grades_) n += docs.size();
    return n;
}

const std::vector<RunEntry>& RunFile::ranking(const std::string& query_id) const {
    auto it = entries.find(query_id);
    if (it == entries.end()) throw data_error("query not in run: " + query_id);
    return it->second;
}

void RunFile::add(const std::string& query_id, RunEntry entry) {
    auto it = entries.find(query_id);
    if (it == entries.end()) {
        query_order.push_back(query_id);
        entries[query_id].push_back(std::move(entry));
    } else {
        it->second.push_back(std::move(entry));
    }
}

std::string to_string(AnnotationMethod m) {
    switch (m) {
        case AnnotationMethod::RelSel: return "RelSel";
        case AnnotationMethod::UtilSel: return "UtilSel";
        case AnnotationMethod::UtilRank: return "UtilRank";
    }
    return "RelSel";
}

AnnotationMethod annotation_method_from_string(const std::string& s) {
    std::string v = to_lower(s);
    if (v == "relsel") return AnnotationMethod::RelSel;
    if (v == "utilsel") return AnnotationMethod::UtilSel;
    if (v == "utilrank") return AnnotationMethod::UtilRank;
    throw format_error("unknown annotation method: " + s);
}

void validate_record(const AnnotationRecord& record) {
    std::set<std::string> candidates(record.candidate_ids.begin(), record.candidate_ids.end());
    std::set<std::string> seen;
    for (const auto& id : record.positive_ids) {
        if (!candidates.count(id)) {
            throw data_error("annotation record for query " + record.query_id +
                             ": positive_id " + id + " not among candidate_ids");
        }
        if (!seen.insert(id).second) {
            throw data_error("annotation record for query " + record.query_id +
                             ": duplicate positive_id " + id);
        }
    }
}

DocLookup make_doc_lookup(const std::vector<Document>& docs) {
    auto index = std::make_shared<std::map<std::string, const Document*>>();
    for (const auto& d : docs) (*index)[d.doc_id] = &d;
    return [index](const std::string& id) -> const Document* {
        auto it = index->find(id);
        return it == index->end() ? nullptr : it->second;
    };
}

}  // namespace annoret
