#pragma once

// Retrieval metrics (MRR@k, Recall@k, NDCG@k), answer metrics (EM, token F1,
// ROUGE-L), exhaustive dense retrieval, RAG generation and hybrid-test qrels.
//
// Metric conventions: MRR and NDCG average over every query in the qrels; a
// query missing from the run contributes 0 and is warned about. Recall
// excludes (and reports) queries without positives. NDCG gain is
// (2^grade - 1) / log2(rank + 1), and the ideal ranking is the retrieved
// list reordered by grade.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "annoret/backend.hpp"
#include "annoret/encoder.hpp"
#include "annoret/prompts.hpp"
#include "annoret/types.hpp"

namespace annoret {

struct MetricReport {
    std::string metric;
    double mean = 0.0;
    std::map<std::string, double> per_query;
    std::vector<std::string> skipped;           // excluded queries (no positives)
    std::vector<std::string> missing_from_run;  // scored 0 because the run lacks them
    std::size_t query_count = 0;
    std::string tag;

    std::string to_json() const;
};

RunFile retrieve_full(const EncoderModel& encoder, const std::vector<Query>& queries,
                      const std::vector<Document>& collection, int depth,
                      const std::string& tag = "annoret");

MetricReport mrr_at_k(const RunFile& run, const RelevanceJudgments& qrels, int k);
MetricReport recall_at_k(const RunFile& run, const RelevanceJudgments& qrels, int k);
MetricReport ndcg_at_k(const RunFile& run, const RelevanceJudgments& qrels, int k);

// Open-domain QA normalization: lowercase, drop punctuation, optionally drop
// the articles a/an/the, squeeze whitespace.
std::string normalize_answer(const std::string& s, bool strip_articles = true);

struct EmF1 {
    int em = 0;
    double f1 = 0.0;
};

// EM/F1 against the best-matching gold (SQuAD-style token F1).
EmF1 answer_em_f1(const std::string& prediction, const std::vector<std::string>& golds);

// LCS F-measure with beta = 1.2; articles are kept (they count as tokens).
double rouge_l(const std::string& prediction, const std::string& gold, double beta = 1.2);

struct GenerationRecord {
    std::string query_id;
    std::vector<std::string> passages_used;
    std::string generated_answer;
    std::vector<std::string> gold_answers;
    bool failed = false;
};

GenerationRecord rag_generate(const Query& query, const RunFile& run, const DocLookup& lookup,
                              int top_k, LLMBackend& backend, const PromptLibrary& prompts,
                              int retries = 2, int max_output_tokens = 256);

void write_generations(const std::vector<GenerationRecord>& records,
                       const std::filesystem::path& path);
std::vector<GenerationRecord> read_generations(const std::filesystem::path& path);

// Merge the top pool_depth entries of each run, utility-select with the gold
// answer, and grade the union of LLM and human positives 1. Queries without
// gold answers are skipped with a warning; on annotation failure the human
// positives stand alone.
RelevanceJudgments build_hybrid_qrels(const std::vector<RunFile>& runs,
                                      const RelevanceJudgments& human_qrels,
                                      const std::vector<Query>& queries,
                                      const DocLookup& lookup, LLMBackend& backend,
                                      const PromptLibrary& prompts, int pool_depth = 20,
                                      int retries = 2, int window_size = 31);

}  // namespace annoret
