#pragma once

// Training loops. Each step samples one instance per query in the batch,
// embeds the batch's unique texts once, builds per-query score rows
// (optionally extended with in-batch negatives from the other rows), applies
// the configured loss averaged over the batch, and takes one AdamW step.
// Instance sampling draws from a stream keyed by (seed, query_id, epoch) so
// runs are reproducible regardless of batch layout.
//
// Curriculum training runs two stages: LLM labels first, then a uniformly
// sampled fraction of the human-labeled queries, re-initializing the
// learning rate and optimizer moments between stages by default and
// switching to Pos-one sampling.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annoret/backend.hpp"
#include "annoret/encoder.hpp"
#include "annoret/losses.hpp"
#include "annoret/optim.hpp"
#include "annoret/pool.hpp"
#include "annoret/types.hpp"

namespace annoret {

struct TrainHyper {
    int epochs = 2;
    int batch_size = 16;
    double learning_rate = 3e-5;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct LossConfig {
    LossKind kind = LossKind::SumMargLH;
    bool use_in_batch_negatives = true;
    double replug_temperature = 1.0;  // applied to scores and utilities
};

struct TrainItem {
    Query query;
    EffectiveLabels labels;
};

struct LogEntry {
    long step = 0;
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    int stage = 1;
};

struct TrainResult {
    std::vector<LogEntry> log;
    std::vector<std::string> skipped_queries;  // zero labeled positives
    long steps = 0;
};

// Per-(query, doc) utility targets for the REPLUG objective, backed by a
// likelihood-scoring backend and cached. Answers come from each query's
// first gold answer.
class UtilityProvider {
   public:
    UtilityProvider(LLMBackend& backend, DocLookup lookup);

    double utility(const Query& query, const std::string& doc_id);

   private:
    LLMBackend& backend_;
    DocLookup lookup_;
    std::map<std::pair<std::string, std::string>, double> cache_;
};

// One stage over `items`; shares the optimizer and global counters with the
// caller so curriculum stages can chain. epoch_base offsets the sampling
// streams so stages never reuse an epoch's draws.
TrainResult train_stage(const std::vector<TrainItem>& items, HashedBowEncoder& encoder,
                        const DocLookup& lookup, const SamplingConfig& sampling,
                        const LossConfig& loss_cfg, const TrainHyper& hyper, int epochs,
                        AdamW& optimizer, long& global_step, int epoch_base, int stage,
                        UtilityProvider* utilities);

// Single-stage entry point.
TrainResult train(const std::vector<TrainItem>& items, HashedBowEncoder& encoder,
                  const DocLookup& lookup, const SamplingConfig& sampling,
                  const LossConfig& loss_cfg, const TrainHyper& hyper,
                  UtilityProvider* utilities = nullptr);

struct CurriculumSchedule {
    double stage2_fraction = 0.2;
    int stage2_epochs = 1;
    bool stage2_lr_reinit = true;  // reset optimizer moments + learning rate
    PosStrategy stage2_pos_strategy = PosStrategy::PosOne;
};

// stage1_items carry LLM labels, stage2_items human labels (usually from
// labels_from_qrels). Stage 2 trains on a uniform stage2_fraction sample of
// stage2_items, drawn from stream (seed, "stage2-queries").
TrainResult curriculum_train(const std::vector<TrainItem>& stage1_items,
                             const std::vector<TrainItem>& stage2_items,
                             HashedBowEncoder& encoder, const DocLookup& lookup,
                             const SamplingConfig& sampling, const LossConfig& loss_cfg,
                             const TrainHyper& hyper, const CurriculumSchedule& schedule,
                             UtilityProvider* utilities = nullptr);

// JSON Lines {"step","epoch","loss","lr","stage"}.
void write_training_log(const std::vector<LogEntry>& log, const std::filesystem::path& path);

}  // namespace annoret
