#pragma once

// Candidate pool construction and per-step training instance sampling.
//
// A pool holds a query's human positives (from qrels) plus n hard negatives
// merged round-robin from retrieval runs. Training instances of size m+1 are
// drawn from a pool each epoch under one of three positive-sampling
// strategies, after an inclusion mode decides how human positives interact
// with LLM labels.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annoret/rng.hpp"
#include "annoret/types.hpp"

namespace annoret {

struct CandidatePool {
    std::string query_id;
    std::vector<std::string> human_positive_ids;
    std::vector<std::string> hard_negative_ids;
    std::map<std::string, std::string> source_tags;  // doc_id -> origin (run tag or "qrels")
};

struct TrainingInstance {
    std::string query_id;
    std::vector<std::string> positive_ids;
    std::vector<std::string> negative_ids;  // explicit negatives plus fill slots
};

enum class PosStrategy { PosOne, PosAvg, PosAll };
enum class InclusionMode { Exclusion, Random, Inclusion };

std::string to_string(PosStrategy s);
std::string to_string(InclusionMode m);
PosStrategy pos_strategy_from_string(const std::string& s);
InclusionMode inclusion_mode_from_string(const std::string& s);

struct SamplingConfig {
    int m = 15;
    PosStrategy pos_strategy = PosStrategy::PosOne;
    InclusionMode inclusion_mode = InclusionMode::Random;
    // Target positive count for Pos-avg, i.e. round(mean positives per query
    // over the label set). Must be set (>0) before sampling with Pos-avg.
    int pos_avg_target = 0;
};

// Label view a sampler draws from: positives is a subset of candidates,
// forced_positive_ids (Inclusion mode) must appear in every instance.
struct EffectiveLabels {
    std::vector<std::string> positive_ids;
    std::vector<std::string> candidate_ids;
    std::vector<std::string> forced_positive_ids;
};

// Round-robin merge of the runs' top-`depth` rankings with first-occurrence
// dedup; the first n non-positive docs become hard negatives. Throws
// data_error "pool underfull (N available)" when fewer than n exist.
CandidatePool build_pool(const std::string& query_id,
                         const std::vector<RunFile>& source_runs,
                         const RelevanceJudgments& qrels, int n, int depth);

// Labels for training directly on human judgments: pool positives against
// pool negatives.
EffectiveLabels labels_from_qrels(const CandidatePool& pool);

// Combine LLM labels with human positives per the inclusion mode.
// Exclusion drops human positives from both sets, Random keeps the record
// as-is, Inclusion appends human positives and marks them forced. Throws
// data_error when Inclusion cannot fit all human positives (more than m).
EffectiveLabels apply_inclusion_mode(const CandidatePool& pool,
                                     const AnnotationRecord& llm_record,
                                     InclusionMode mode, int m);

// Draw one instance of size m+1. Returns nullopt when the label view has no
// positives (callers count these in a skip report). Deterministic given the
// rng stream state.
std::optional<TrainingInstance> try_sample_instance(const EffectiveLabels& labels,
                                                    const SamplingConfig& config,
                                                    const std::string& query_id,
                                                    DetRng& rng);

// Same, but zero positives is an error.
TrainingInstance sample_instance(const EffectiveLabels& labels,
                                 const SamplingConfig& config,
                                 const std::string& query_id, DetRng& rng);

// Mean positives per query rounded half-up, for SamplingConfig::pos_avg_target.
int compute_pos_avg_target(const std::vector<std::size_t>& per_query_positive_counts);

// Pools serialize one JSON object per line:
// {"query_id":..., "positives":[...], "negatives":[...], "sources":{...}}
void write_pools(const std::vector<CandidatePool>& pools, const std::filesystem::path& path);
std::vector<CandidatePool> read_pools(const std::filesystem::path& path);

}  // namespace annoret
