#include "annoret/corpus_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "annoret/util.hpp"

namespace annoret {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string loc(const std::filesystem::path& path, std::size_t lineno) {
    return path.string() + ":" + std::to_string(lineno);
}

}  // namespace

std::vector<Document> load_collection(const std::filesystem::path& path) {
    std::vector<Document> docs;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw format_error(loc(path, lineno) + ": missing tab separator");
        }
        Document d{line.substr(0, tab), line.substr(tab + 1)};
        if (d.doc_id.empty()) {
            throw format_error(loc(path, lineno) + ": empty doc_id");
        }
        if (!seen.insert(d.doc_id).second) {
            throw format_error("duplicate doc_id " + d.doc_id + " at line " +
                               std::to_string(lineno) + " of " + path.string());
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

void write_collection(const std::vector<Document>& docs, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& d : docs) out << d.doc_id << "\t" << d.text << "\n";
    write_file_atomic(path, out.str());
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
    std::vector<Query> queries;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw format_error(loc(path, lineno) + ": missing tab separator");
        }
        Query q;
        q.query_id = line.substr(0, tab);
        q.text = line.substr(tab + 1);
        if (q.query_id.empty()) {
            throw format_error(loc(path, lineno) + ": empty query_id");
        }
        if (!seen.insert(q.query_id).second) {
            throw format_error("duplicate query_id " + q.query_id + " at line " +
                               std::to_string(lineno) + " of " + path.string());
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

void write_queries(const std::vector<Query>& queries, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& q : queries) out << q.query_id << "\t" << q.text << "\n";
    write_file_atomic(path, out.str());
}

void load_gold_answers(const std::filesystem::path& path, std::vector<Query>& queries) {
    std::map<std::string, std::vector<std::string>> answers;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(loc(path, lineno) + ": bad JSON: " + e.what());
        }
        if (!j.contains("query_id") || !j.contains("answers")) {
            throw format_error(loc(path, lineno) + ": expected query_id and answers fields");
        }
        answers[j["query_id"].get<std::string>()] =
            j["answers"].get<std::vector<std::string>>();
    }
    for (auto& q : queries) {
        auto it = answers.find(q.query_id);
        if (it != answers.end()) q.gold_answers = it->second;
    }
}

void write_gold_answers(const std::vector<Query>& queries, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& q : queries) {
        if (q.gold_answers.empty()) continue;
        nlohmann::json j;
        j["query_id"] = q.query_id;
        j["answers"] = q.gold_answers;
        out << j.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

RelevanceJudgments load_qrels(const std::filesystem::path& path) {
    RelevanceJudgments qrels;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string qid, iter, did, grade_str;
        if (!(ss >> qid >> iter >> did >> grade_str)) {
            throw format_error(loc(path, lineno) + ": expected `query_id 0 doc_id grade`");
        }
        int grade = 0;
        try {
            std::size_t pos = 0;
            grade = std::stoi(grade_str, &pos);
            if (pos != grade_str.size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw format_error(loc(path, lineno) + ": non-integer grade \"" + grade_str + "\"");
        }
        if (grade < 0) {
            throw format_error(loc(path, lineno) + ": negative grade");
        }
        qrels.set(qid, did, grade);
    }
    return qrels;
}

void write_qrels(const RelevanceJudgments& qrels, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& qid : qrels.query_ids()) {
        for (const auto& [did, grade] : qrels.judged(qid)) {
            out << qid << " 0 " << did << " " << grade << "\n";
        }
    }
    write_file_atomic(path, out.str());
}

RunFile read_run(const std::filesystem::path& path) {
    RunFile run;
    std::map<std::string, std::set<std::string>> seen_docs;
    std::map<std::string, int> next_rank;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string qid, q0, did, rank_str, score_str, tag;
        if (!(ss >> qid >> q0 >> did >> rank_str >> score_str >> tag)) {
            throw format_error(loc(path, lineno) +
                               ": expected `query_id Q0 doc_id rank score tag`");
        }
        int rank = 0;
        double score = 0.0;
        try {
            rank = std::stoi(rank_str);
            score = std::stod(score_str);
        } catch (const std::exception&) {
            throw format_error(loc(path, lineno) + ": bad rank or score");
        }
        if (run.tag.empty()) run.tag = tag;
        int expected = next_rank.count(qid) ? next_rank[qid] : 1;
        if (rank != expected) {
            throw format_error(loc(path, lineno) + ": rank sequence for query " + qid +
                               " has gaps or duplicates (got " + std::to_string(rank) +
                               ", expected " + std::to_string(expected) + ")");
        }
        next_rank[qid] = expected + 1;
        if (!seen_docs[qid].insert(did).second) {
            throw format_error("duplicate doc_id in run: " + did + " for query " + qid +
                               " at " + loc(path, lineno));
        }
        run.add(qid, RunEntry{did, score});
    }
    return run;
}

void write_run(const RunFile& run, const std::filesystem::path& path) {
    std::ostringstream out;
    std::string tag = run.tag.empty() ? "annoret" : run.tag;
    for (const auto& qid : run.query_order) {
        const auto& ranking = run.entries.at(qid);
        int rank = 1;
        for (const auto& e : ranking) {
            out << qid << " Q0 " << e.doc_id << " " << rank << " "
                << format_double(e.score, 6) << " " << tag << "\n";
            ++rank;
        }
    }
    write_file_atomic(path, out.str());
}

std::string annotation_to_json_line(const AnnotationRecord& record) {
    nlohmann::json j;
    j["query_id"] = record.query_id;
    j["method"] = to_string(record.method);
    j["positive_ids"] = record.positive_ids;
    j["candidate_ids"] = record.candidate_ids;
    if (record.pseudo_answer) {
        j["pseudo_answer"] = *record.pseudo_answer;
    } else {
        j["pseudo_answer"] = nullptr;
    }
    j["raw_responses"] = record.raw_responses;
    j["annotator_tag"] = record.annotator_tag;
    return j.dump();
}

AnnotationRecord annotation_from_json_line(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    AnnotationRecord r;
    r.query_id = j.at("query_id").get<std::string>();
    r.method = annotation_method_from_string(j.at("method").get<std::string>());
    r.positive_ids = j.at("positive_ids").get<std::vector<std::string>>();
    r.candidate_ids = j.at("candidate_ids").get<std::vector<std::string>>();
    if (j.contains("pseudo_answer") && !j["pseudo_answer"].is_null()) {
        r.pseudo_answer = j["pseudo_answer"].get<std::string>();
    }
    if (j.contains("raw_responses")) {
        r.raw_responses = j["raw_responses"].get<std::vector<std::string>>();
    }
    if (j.contains("annotator_tag")) {
        r.annotator_tag = j["annotator_tag"].get<std::string>();
    }
    return r;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
    std::vector<AnnotationRecord> records;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path)) {
        ++lineno;
        if (trim(line).empty()) continue;
        AnnotationRecord r;
        try {
            r = annotation_from_json_line(line);
        } catch (const nlohmann::json::exception& e) {
            throw format_error(loc(path, lineno) + ": bad annotation record: " + e.what());
        }
        validate_record(r);
        records.push_back(std::move(r));
    }
    return records;
}

void write_annotations(const std::vector<AnnotationRecord>& records,
                       const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& r : records) {
        validate_record(r);
        out << annotation_to_json_line(r) << "\n";
    }
    write_file_atomic(path, out.str());
}

}  // namespace annoret
