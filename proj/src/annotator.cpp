#include "annoret/annotator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "annoret/util.hpp"

namespace annoret {

namespace {

// Run one annotation call until it parses, retrying on parse and transport
// failures alike; after `retries` extra attempts the query is given up on.
template <typename F>
auto with_retries(int retries, const std::string& what, F&& attempt) {
    std::string last = "no attempts made";
    for (int a = 0; a <= retries; ++a) {
        try {
            return attempt();
        } catch (const format_error& e) {
            last = e.what();
        } catch (const backend_error& e) {
            last = e.what();
        }
    }
    throw annotation_error(what + " failed after " + std::to_string(retries + 1) +
                           " attempts: " + last);
}

std::vector<int> bracketed_indices(const std::string& raw) {
    std::vector<int> found;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '[') continue;
        std::size_t j = i + 1;
        while (j < raw.size() && std::isdigit((unsigned char)raw[j])) ++j;
        if (j > i + 1 && j < raw.size() && raw[j] == ']') {
            std::string digits = raw.substr(i + 1, j - i - 1);
            found.push_back(digits.size() > 9 ? -1 : std::stoi(digits));
            i = j;
        }
    }
    return found;
}

bool integer_list_line(const std::string& line, std::vector<int>* out) {
    std::string cur;
    std::vector<int> parsed;
    auto flush = [&]() {
        if (cur.empty()) return true;
        for (char c : cur) {
            if (!std::isdigit((unsigned char)c)) return false;
        }
        parsed.push_back(cur.size() > 9 ? -1 : std::stoi(cur));
        cur.clear();
        return true;
    };
    for (char c : line) {
        if (c == ' ' || c == '\t' || c == ',' || c == ';' || c == '>') {
            if (!flush()) return false;
        } else {
            cur += c;
        }
    }
    if (!flush()) return false;
    if (parsed.empty()) return false;
    *out = parsed;
    return true;
}

std::vector<Document> fetch_docs(const std::vector<std::string>& ids, const DocLookup& lookup) {
    std::vector<Document> docs;
    docs.reserve(ids.size());
    for (const auto& id : ids) {
        const Document* d = lookup(id);
        if (!d) throw data_error("doc_id " + id + " not in collection");
        docs.push_back(*d);
    }
    return docs;
}

}  // namespace

int util_rank_positive_count(int list_size, double k_percent) {
    if (list_size < 1) throw data_error("utility ranking needs at least one passage");
    if (!(k_percent > 0.0) || k_percent > 100.0) {
        throw config_error("k_percent must be in (0, 100]");
    }
    long long count;
    double k_floor = std::floor(k_percent);
    if (k_floor == k_percent) {
        // Integer percentages take the exact integer path so e.g. 10% of 30
        // is never 2 due to floating-point representation.
        count = (long long)list_size * (long long)k_floor / 100;
    } else {
        count = (long long)std::floor((double)list_size * k_percent / 100.0);
    }
    return (int)std::max(1LL, count);
}

std::vector<int> parse_index_list(const std::string& raw, int count) {
    std::vector<int> found = bracketed_indices(raw);

    if (found.empty()) {
        for (const auto& tok : tokenize(raw)) {
            if (tok == "none") return {};
        }
        std::istringstream in(raw);
        std::string line;
        while (std::getline(in, line)) {
            std::vector<int> nums;
            if (integer_list_line(trim(line), &nums)) {
                found.insert(found.end(), nums.begin(), nums.end());
            }
        }
    }
    if (found.empty()) {
        throw format_error("no passage ids found in response");
    }

    std::vector<int> out;
    std::set<int> seen;
    for (int idx : found) {
        if (idx < 1 || idx > count) {
            warn("response referenced passage " + std::to_string(idx) +
                 " outside 1.." + std::to_string(count) + "; dropped");
            continue;
        }
        if (seen.insert(idx).second) out.push_back(idx);
    }
    return out;
}

std::vector<std::string> parse_id_list(const std::string& raw,
                                       const std::vector<std::string>& window_ids) {
    std::vector<std::string> out;
    for (int idx : parse_index_list(raw, (int)window_ids.size())) {
        out.push_back(window_ids[idx - 1]);
    }
    return out;
}

std::vector<std::string> relevance_select(const Query& query,
                                          const std::vector<Document>& candidates,
                                          LLMBackend& backend, const PromptLibrary& prompts,
                                          const AnnotatorOptions& opts,
                                          std::vector<std::string>* raw_log) {
    std::vector<std::string> selection;
    std::set<std::string> seen;
    const auto& tmpl = prompts.get(TemplateId::RelevanceSelection);
    for (std::size_t start = 0; start < candidates.size(); start += opts.window_size) {
        std::size_t end = std::min(candidates.size(), start + opts.window_size);
        std::vector<Document> window(candidates.begin() + start, candidates.begin() + end);
        std::vector<std::string> window_ids;
        for (const auto& d : window) window_ids.push_back(d.doc_id);

        std::string prompt = tmpl.render({{"query", query.text},
                                          {"numbered_passages", number_passages(window)}});
        auto ids = with_retries(opts.retries, "relevance selection for query " + query.query_id,
                                [&]() {
                                    std::string raw =
                                        backend.complete(prompt, opts.max_output_tokens);
                                    if (raw_log) raw_log->push_back(raw);
                                    return parse_id_list(raw, window_ids);
                                });
        for (auto& id : ids) {
            if (seen.insert(id).second) selection.push_back(std::move(id));
        }
    }
    return selection;
}

std::string generate_pseudo_answer(const Query& query, const std::vector<Document>& selected,
                                   LLMBackend& backend, const PromptLibrary& prompts,
                                   const AnnotatorOptions& opts,
                                   std::vector<std::string>* raw_log) {
    const auto& tmpl = prompts.get(TemplateId::PseudoAnswer);
    std::string prompt = tmpl.render({{"query", query.text},
                                      {"numbered_passages", number_passages(selected)}});
    return with_retries(opts.retries, "pseudo-answer generation for query " + query.query_id,
                        [&]() {
                            std::string raw = backend.complete(prompt, opts.max_output_tokens);
                            if (raw_log) raw_log->push_back(raw);
                            std::string answer = trim(raw);
                            if (answer.empty()) {
                                throw format_error("backend returned an empty answer");
                            }
                            return answer;
                        });
}

std::vector<std::string> utility_select(const Query& query,
                                        const std::vector<Document>& selected,
                                        const std::string& answer, LLMBackend& backend,
                                        const PromptLibrary& prompts,
                                        const AnnotatorOptions& opts,
                                        std::vector<std::string>* raw_log) {
    if (selected.empty()) return {};
    if ((int)selected.size() > opts.window_size) {
        throw data_error("utility selection over " + std::to_string(selected.size()) +
                         " passages exceeds the prompt capacity of " +
                         std::to_string(opts.window_size));
    }
    std::vector<std::string> window_ids;
    for (const auto& d : selected) window_ids.push_back(d.doc_id);
    const auto& tmpl = prompts.get(TemplateId::UtilitySelection);
    std::string prompt = tmpl.render({{"query", query.text},
                                      {"answer", answer},
                                      {"numbered_passages", number_passages(selected)}});
    return with_retries(opts.retries, "utility selection for query " + query.query_id,
                        [&]() {
                            std::string raw = backend.complete(prompt, opts.max_output_tokens);
                            if (raw_log) raw_log->push_back(raw);
                            return parse_id_list(raw, window_ids);
                        });
}

std::vector<std::string> utility_rank(const Query& query, const std::vector<Document>& selected,
                                      const std::string& answer, LLMBackend& backend,
                                      const PromptLibrary& prompts, const AnnotatorOptions& opts,
                                      std::vector<std::string>* raw_log,
                                      std::vector<std::string>* full_ranking) {
    if (selected.empty()) throw data_error("utility ranking needs at least one passage");
    if ((int)selected.size() > opts.window_size) {
        throw data_error("utility ranking over " + std::to_string(selected.size()) +
                         " passages exceeds the prompt capacity of " +
                         std::to_string(opts.window_size));
    }
    std::vector<std::string> window_ids;
    for (const auto& d : selected) window_ids.push_back(d.doc_id);
    const auto& tmpl = prompts.get(TemplateId::UtilityRanking);
    std::string prompt = tmpl.render({{"query", query.text},
                                      {"answer", answer},
                                      {"numbered_passages", number_passages(selected)}});
    auto ranking = with_retries(opts.retries, "utility ranking for query " + query.query_id,
                                [&]() {
                                    std::string raw =
                                        backend.complete(prompt, opts.max_output_tokens);
                                    if (raw_log) raw_log->push_back(raw);
                                    return parse_id_list(raw, window_ids);
                                });
    if (ranking.size() < window_ids.size()) {
        std::set<std::string> present(ranking.begin(), ranking.end());
        for (const auto& id : window_ids) {
            if (!present.count(id)) {
                warn("ranking for query " + query.query_id + " missed passage " + id +
                     "; appended at the end");
                ranking.push_back(id);
            }
        }
    }
    if (full_ranking) *full_ranking = ranking;
    int positives = util_rank_positive_count((int)ranking.size(), opts.k_percent);
    ranking.resize(positives);
    return ranking;
}

AnnotationRecord annotate_query(const Query& query, const CandidatePool& pool,
                                const DocLookup& lookup, LLMBackend& backend,
                                const PromptLibrary& prompts, const AnnotatorOptions& opts) {
    AnnotationRecord record;
    record.query_id = query.query_id;
    record.method = opts.method;
    record.annotator_tag = backend.name();
    record.candidate_ids = pool.human_positive_ids;
    record.candidate_ids.insert(record.candidate_ids.end(), pool.hard_negative_ids.begin(),
                                pool.hard_negative_ids.end());

    auto candidates = fetch_docs(record.candidate_ids, lookup);
    auto selection = relevance_select(query, candidates, backend, prompts, opts,
                                      &record.raw_responses);

    if (opts.method == AnnotationMethod::RelSel) {
        record.positive_ids = selection;
    } else {
        auto selected_docs = fetch_docs(selection, lookup);
        std::string answer = generate_pseudo_answer(query, selected_docs, backend, prompts,
                                                    opts, &record.raw_responses);
        record.pseudo_answer = answer;
        if (selection.empty()) {
            // Nothing was relevant; the record keeps an empty positive set
            // and the trainer will skip the query.
        } else if (opts.method == AnnotationMethod::UtilSel) {
            record.positive_ids = utility_select(query, selected_docs, answer, backend,
                                                 prompts, opts, &record.raw_responses);
        } else {
            record.positive_ids = utility_rank(query, selected_docs, answer, backend, prompts,
                                               opts, &record.raw_responses, nullptr);
        }
    }
    validate_record(record);
    return record;
}

AnnotationOutcome annotate_all(const std::vector<Query>& queries,
                               const std::map<std::string, CandidatePool>& pools,
                               const DocLookup& lookup, LLMBackend& backend,
                               const PromptLibrary& prompts, const AnnotatorOptions& opts) {
    AnnotationOutcome out;
    for (const auto& q : queries) {
        auto it = pools.find(q.query_id);
        if (it == pools.end()) {
            throw data_error("no candidate pool for query " + q.query_id);
        }
        try {
            out.records.push_back(annotate_query(q, it->second, lookup, backend, prompts, opts));
        } catch (const annotation_error& e) {
            warn(std::string(e.what()));
            out.failed_query_ids.push_back(q.query_id);
        }
    }
    return out;
}

AnnotationQuality annotation_quality(const std::vector<AnnotationRecord>& records,
                                     const RelevanceJudgments& qrels) {
    AnnotationQuality q;
    q.query_count = records.size();
    std::size_t inter = 0, llm_total = 0, human_total = 0;
    for (const auto& r : records) {
        auto human = qrels.positives(r.query_id);
        std::set<std::string> human_set(human.begin(), human.end());
        llm_total += r.positive_ids.size();
        human_total += human.size();
        for (const auto& id : r.positive_ids) {
            if (human_set.count(id)) ++inter;
        }
    }
    if (llm_total > 0) q.precision = (double)inter / (double)llm_total;
    if (human_total > 0) q.recall = (double)inter / (double)human_total;
    if (!records.empty()) q.avg_positives = (double)llm_total / (double)records.size();
    return q;
}

}  // namespace annoret
