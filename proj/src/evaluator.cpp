#include "annoret/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "annoret/annotator.hpp"
#include "annoret/util.hpp"

namespace annoret {

namespace {

double mean_of(const std::map<std::string, double>& per_query) {
    if (per_query.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [qid, v] : per_query) sum += v;
    return sum / (double)per_query.size();
}

double dcg(const std::vector<int>& grades, int k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grades.size() && (int)i < k; ++i) {
        if (grades[i] <= 0) continue;
        acc += (std::pow(2.0, (double)grades[i]) - 1.0) / std::log2((double)i + 2.0);
    }
    return acc;
}

}  // namespace

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["metric"] = metric;
    j["mean"] = mean;
    j["per_query"] = per_query;
    j["skipped"] = skipped;
    j["missing_from_run"] = missing_from_run;
    j["query_count"] = query_count;
    j["tag"] = tag;
    return j.dump(2);
}

RunFile retrieve_full(const EncoderModel& encoder, const std::vector<Query>& queries,
                      const std::vector<Document>& collection, int depth,
                      const std::string& tag) {
    if (collection.empty()) throw data_error("cannot retrieve from an empty collection");
    if (depth < 1) throw data_error("retrieval depth must be >= 1");

    std::vector<std::vector<double>> doc_emb;
    doc_emb.reserve(collection.size());
    for (const auto& d : collection) doc_emb.push_back(encoder.encode_doc(d.text));

    RunFile run;
    run.tag = tag;
    for (const auto& q : queries) {
        auto q_emb = encoder.encode_query(q.text);
        std::vector<std::pair<double, std::size_t>> scored(collection.size());
        for (std::size_t i = 0; i < collection.size(); ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < q_emb.size(); ++k) s += q_emb[k] * doc_emb[i][k];
            scored[i] = {s, i};
        }
        std::size_t keep = std::min<std::size_t>((std::size_t)depth, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                          [&](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return collection[a.second].doc_id < collection[b.second].doc_id;
                          });
        for (std::size_t i = 0; i < keep; ++i) {
            run.add(q.query_id, RunEntry{collection[scored[i].second].doc_id, scored[i].first});
        }
    }
    return run;
}

MetricReport mrr_at_k(const RunFile& run, const RelevanceJudgments& qrels, int k) {
    if (k < 1) throw data_error("k must be >= 1");
    MetricReport report;
    report.metric = "mrr@" + std::to_string(k);
    report.tag = run.tag;
    for (const auto& qid : qrels.query_ids()) {
        if (!run.has_query(qid)) {
            warn("query " + qid + " missing from run; mrr@" + std::to_string(k) +
                 " counts it as 0");
            report.missing_from_run.push_back(qid);
            report.per_query[qid] = 0.0;
            continue;
        }
        double rr = 0.0;
        const auto& ranking = run.ranking(qid);
        for (std::size_t i = 0; i < ranking.size() && (int)i < k; ++i) {
            if (qrels.grade(qid, ranking[i].doc_id) > 0) {
                rr = 1.0 / (double)(i + 1);
                break;
            }
        }
        report.per_query[qid] = rr;
    }
    report.query_count = report.per_query.size();
    report.mean = mean_of(report.per_query);
    return report;
}

MetricReport recall_at_k(const RunFile& run, const RelevanceJudgments& qrels, int k) {
    if (k < 1) throw data_error("k must be >= 1");
    MetricReport report;
    report.metric = "recall@" + std::to_string(k);
    report.tag = run.tag;
    for (const auto& qid : qrels.query_ids()) {
        auto rel = qrels.positives(qid);
        if (rel.empty()) {
            report.skipped.push_back(qid);
            continue;
        }
        if (!run.has_query(qid)) {
            warn("query " + qid + " missing from run; recall@" + std::to_string(k) +
                 " counts it as 0");
            report.missing_from_run.push_back(qid);
            report.per_query[qid] = 0.0;
            continue;
        }
        std::set<std::string> rel_set(rel.begin(), rel.end());
        std::size_t hits = 0;
        const auto& ranking = run.ranking(qid);
        for (std::size_t i = 0; i < ranking.size() && (int)i < k; ++i) {
            if (rel_set.count(ranking[i].doc_id)) ++hits;
        }
        report.per_query[qid] = (double)hits / (double)rel.size();
    }
    report.query_count = report.per_query.size();
    report.mean = mean_of(report.per_query);
    return report;
}

MetricReport ndcg_at_k(const RunFile& run, const RelevanceJudgments& qrels, int k) {
    if (k < 1) throw data_error("k must be >= 1");
    MetricReport report;
    report.metric = "ndcg@" + std::to_string(k);
    report.tag = run.tag;
    for (const auto& qid : qrels.query_ids()) {
        if (!run.has_query(qid)) {
            warn("query " + qid + " missing from run; ndcg@" + std::to_string(k) +
                 " counts it as 0");
            report.missing_from_run.push_back(qid);
            report.per_query[qid] = 0.0;
            continue;
        }
        const auto& ranking = run.ranking(qid);
        std::vector<int> grades;
        grades.reserve(ranking.size());
        for (const auto& e : ranking) grades.push_back(qrels.grade(qid, e.doc_id));
        double got = dcg(grades, k);
        std::vector<int> ideal(grades);
        std::sort(ideal.begin(), ideal.end(), std::greater<int>());
        double best = dcg(ideal, k);
        report.per_query[qid] = best > 0.0 ? got / best : 0.0;
    }
    report.query_count = report.per_query.size();
    report.mean = mean_of(report.per_query);
    return report;
}

std::string normalize_answer(const std::string& s, bool strip_articles) {
    std::string lowered;
    lowered.reserve(s.size());
    for (char c : s) {
        unsigned char u = (unsigned char)c;
        if (std::ispunct(u)) continue;
        lowered += (char)std::tolower(u);
    }
    std::istringstream in(lowered);
    std::string tok, out;
    while (in >> tok) {
        if (strip_articles && (tok == "a" || tok == "an" || tok == "the")) continue;
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

namespace {

std::vector<std::string> answer_tokens(const std::string& s, bool strip_articles) {
    std::vector<std::string> out;
    std::istringstream in(normalize_answer(s, strip_articles));
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double p = (double)overlap / (double)pred.size();
    double r = (double)overlap / (double)gold.size();
    return 2.0 * p * r / (p + r);
}

}  // namespace

EmF1 answer_em_f1(const std::string& prediction, const std::vector<std::string>& golds) {
    if (golds.empty()) throw data_error("EM/F1 needs at least one gold answer");
    EmF1 result;
    std::string norm_pred = normalize_answer(prediction, true);
    auto pred_tokens = answer_tokens(prediction, true);
    for (const auto& gold : golds) {
        if (norm_pred == normalize_answer(gold, true)) result.em = 1;
        result.f1 = std::max(result.f1, token_f1(pred_tokens, answer_tokens(gold, true)));
    }
    return result;
}

double rouge_l(const std::string& prediction, const std::string& gold, double beta) {
    auto pred = answer_tokens(prediction, false);
    auto ref = answer_tokens(gold, false);
    if (pred.empty() || ref.empty()) return 0.0;

    std::vector<std::vector<int>> lcs(pred.size() + 1, std::vector<int>(ref.size() + 1, 0));
    for (std::size_t i = 1; i <= pred.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            lcs[i][j] = pred[i - 1] == ref[j - 1]
                            ? lcs[i - 1][j - 1] + 1
                            : std::max(lcs[i - 1][j], lcs[i][j - 1]);
        }
    }
    int common = lcs[pred.size()][ref.size()];
    if (common == 0) return 0.0;
    double p = (double)common / (double)pred.size();
    double r = (double)common / (double)ref.size();
    double b2 = beta * beta;
    return (1.0 + b2) * p * r / (r + b2 * p);
}

GenerationRecord rag_generate(const Query& query, const RunFile& run, const DocLookup& lookup,
                              int top_k, LLMBackend& backend, const PromptLibrary& prompts,
                              int retries, int max_output_tokens) {
    if (top_k < 1) throw data_error("top_k must be >= 1");
    if (!run.has_query(query.query_id)) {
        throw data_error("run has no entries for query " + query.query_id);
    }
    const auto& ranking = run.ranking(query.query_id);
    if ((int)ranking.size() < top_k) {
        throw data_error("run has only " + std::to_string(ranking.size()) +
                         " entries for query " + query.query_id + ", need " +
                         std::to_string(top_k));
    }
    GenerationRecord record;
    record.query_id = query.query_id;
    record.gold_answers = query.gold_answers;
    std::vector<Document> passages;
    for (int i = 0; i < top_k; ++i) {
        const Document* doc = lookup(ranking[i].doc_id);
        if (!doc) throw data_error("doc_id " + ranking[i].doc_id + " not in collection");
        passages.push_back(*doc);
        record.passages_used.push_back(doc->doc_id);
    }
    std::string prompt = prompts.get(TemplateId::RagAnswer)
                             .render({{"query", query.text},
                                      {"numbered_passages", number_passages(passages)}});
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        try {
            record.generated_answer = backend.complete(prompt, max_output_tokens);
            return record;
        } catch (const backend_error& e) {
            last_error = e.what();
        }
    }
    warn("generation for query " + query.query_id + " failed: " + last_error);
    record.failed = true;
    return record;
}

void write_generations(const std::vector<GenerationRecord>& records,
                       const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& r : records) {
        nlohmann::json j;
        j["query_id"] = r.query_id;
        j["passages_used"] = r.passages_used;
        j["generated_answer"] = r.generated_answer;
        j["gold_answers"] = r.gold_answers;
        j["failed"] = r.failed;
        out << j.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

std::vector<GenerationRecord> read_generations(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path.string());
    std::vector<GenerationRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            GenerationRecord r;
            r.query_id = j.at("query_id").get<std::string>();
            r.passages_used = j.at("passages_used").get<std::vector<std::string>>();
            r.generated_answer = j.at("generated_answer").get<std::string>();
            r.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
            r.failed = j.value("failed", false);
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw format_error(path.string() + ":" + std::to_string(lineno) +
                               ": bad generation record: " + e.what());
        }
    }
    return records;
}

RelevanceJudgments build_hybrid_qrels(const std::vector<RunFile>& runs,
                                      const RelevanceJudgments& human_qrels,
                                      const std::vector<Query>& queries,
                                      const DocLookup& lookup, LLMBackend& backend,
                                      const PromptLibrary& prompts, int pool_depth,
                                      int retries, int window_size) {
    RelevanceJudgments hybrid;
    AnnotatorOptions opts;
    opts.retries = retries;
    opts.window_size = window_size;

    for (const auto& q : queries) {
        if (q.gold_answers.empty()) {
            warn("query " + q.query_id + " has no gold answer; skipped in hybrid qrels");
            continue;
        }
        // Round-robin dedup merge of the runs' heads, same rule the pools use.
        std::vector<std::string> pool;
        std::set<std::string> seen;
        for (int round = 0; round < pool_depth; ++round) {
            for (const auto& run : runs) {
                if (!run.has_query(q.query_id)) continue;
                const auto& ranking = run.ranking(q.query_id);
                if (round >= (int)ranking.size()) continue;
                const auto& id = ranking[round].doc_id;
                if (seen.insert(id).second) pool.push_back(id);
            }
        }

        std::set<std::string> positives;
        for (const auto& id : human_qrels.positives(q.query_id)) positives.insert(id);
        for (std::size_t start = 0; start < pool.size(); start += (std::size_t)window_size) {
            std::size_t end = std::min(pool.size(), start + (std::size_t)window_size);
            std::vector<Document> window;
            for (std::size_t i = start; i < end; ++i) {
                const Document* doc = lookup(pool[i]);
                if (!doc) throw data_error("doc_id " + pool[i] + " not in collection");
                window.push_back(*doc);
            }
            try {
                auto picked = utility_select(q, window, q.gold_answers.front(), backend,
                                             prompts, opts, nullptr);
                positives.insert(picked.begin(), picked.end());
            } catch (const annotation_error& e) {
                warn("hybrid annotation for query " + q.query_id +
                     " failed; keeping human positives only: " + e.what());
            }
        }
        for (const auto& id : positives) hybrid.set(q.query_id, id, 1);
    }
    return hybrid;
}

}  // namespace annoret
