#pragma once

// The three-stage annotation pipeline. Every query runs relevance selection
// over its candidate pool first; utility-based methods then generate a
// pseudo-answer from the selected passages and either select the useful
// subset (UtilSel) or rank the selection and keep the top k% (UtilRank).
// Responses are parsed defensively and calls are retried a configurable
// number of times before a query is marked failed.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annoret/backend.hpp"
#include "annoret/pool.hpp"
#include "annoret/prompts.hpp"
#include "annoret/types.hpp"

namespace annoret {

// A per-query annotation failure after all retries were spent. The driver
// catches these, records the query as failed, and moves on.
struct annotation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AnnotatorOptions {
    AnnotationMethod method = AnnotationMethod::UtilSel;
    double k_percent = 10.0;    // UtilRank positive threshold
    int retries = 2;            // extra attempts after the first call
    int max_output_tokens = 512;
    int window_size = 31;       // passages per relevance-selection call
};

// Positive count for utility ranking: max(1, floor(L * k / 100)).
int util_rank_positive_count(int list_size, double k_percent);

// Extract 1-based passage indices from a response: bracketed [n] tokens
// first, else a "none" sentinel (empty selection), else lines made only of
// integers and separators. Out-of-range indices are dropped with a warning,
// duplicates keep the first occurrence. Throws format_error when nothing
// parseable is found.
std::vector<int> parse_index_list(const std::string& raw, int count);

// Same, mapped onto the ids the prompt numbered 1..N.
std::vector<std::string> parse_id_list(const std::string& raw,
                                       const std::vector<std::string>& window_ids);

// ---- individual pipeline stages ----
// Every stage appends the raw completions it saw to *raw_log when given.

std::vector<std::string> relevance_select(const Query& query,
                                          const std::vector<Document>& candidates,
                                          LLMBackend& backend, const PromptLibrary& prompts,
                                          const AnnotatorOptions& opts,
                                          std::vector<std::string>* raw_log = nullptr);

std::string generate_pseudo_answer(const Query& query, const std::vector<Document>& selected,
                                   LLMBackend& backend, const PromptLibrary& prompts,
                                   const AnnotatorOptions& opts,
                                   std::vector<std::string>* raw_log = nullptr);

std::vector<std::string> utility_select(const Query& query,
                                        const std::vector<Document>& selected,
                                        const std::string& answer, LLMBackend& backend,
                                        const PromptLibrary& prompts,
                                        const AnnotatorOptions& opts,
                                        std::vector<std::string>* raw_log = nullptr);

// Returns the top-k% positives; *full_ranking receives the repaired total
// order (missing ids appended in input order, duplicates dropped).
std::vector<std::string> utility_rank(const Query& query, const std::vector<Document>& selected,
                                      const std::string& answer, LLMBackend& backend,
                                      const PromptLibrary& prompts, const AnnotatorOptions& opts,
                                      std::vector<std::string>* raw_log = nullptr,
                                      std::vector<std::string>* full_ranking = nullptr);

// ---- drivers ----

// Run the configured method end-to-end for one query. The record's
// candidate_ids are the pool (positives first, then hard negatives).
// Throws annotation_error when a stage fails after retries.
AnnotationRecord annotate_query(const Query& query, const CandidatePool& pool,
                                const DocLookup& lookup, LLMBackend& backend,
                                const PromptLibrary& prompts, const AnnotatorOptions& opts);

struct AnnotationOutcome {
    std::vector<AnnotationRecord> records;
    std::vector<std::string> failed_query_ids;
};

AnnotationOutcome annotate_all(const std::vector<Query>& queries,
                               const std::map<std::string, CandidatePool>& pools,
                               const DocLookup& lookup, LLMBackend& backend,
                               const PromptLibrary& prompts, const AnnotatorOptions& opts);

// ---- quality statistics (micro-averaged against human judgments) ----

struct AnnotationQuality {
    std::optional<double> precision;  // unset when no LLM positives exist
    std::optional<double> recall;     // unset when no human positives exist
    double avg_positives = 0.0;
    std::size_t query_count = 0;
};

AnnotationQuality annotation_quality(const std::vector<AnnotationRecord>& records,
                                     const RelevanceJudgments& qrels);

}  // namespace annoret
