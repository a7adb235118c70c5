#include "annoret/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "annoret/util.hpp"

namespace annoret {

UtilityProvider::UtilityProvider(LLMBackend& backend, DocLookup lookup)
    : backend_(backend), lookup_(std::move(lookup)) {
    if (!backend_.supports_likelihood()) {
        throw backend_error("backend " + backend_.name() +
                            " cannot score answer likelihoods; REPLUG-KL is unavailable");
    }
}

double UtilityProvider::utility(const Query& query, const std::string& doc_id) {
    auto key = std::make_pair(query.query_id, doc_id);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (query.gold_answers.empty()) {
        throw data_error("query " + query.query_id + " has no gold answer for utility targets");
    }
    const Document* doc = lookup_(doc_id);
    if (!doc) throw data_error("doc_id " + doc_id + " not in collection");
    double u = backend_.answer_loglikelihood(query.text, doc->text, query.gold_answers.front());
    cache_.emplace(std::move(key), u);
    return u;
}

namespace {

struct BatchRow {
    const TrainItem* item = nullptr;
    std::vector<std::string> doc_ids;          // instance docs, positives first
    std::vector<std::size_t> positive_indices; // indices into doc_ids
};

// Texts of this batch, each featurized and embedded once per step.
struct BatchDocs {
    std::vector<std::string> ids;  // insertion order
    std::vector<SparseVec> phi;
    std::vector<std::vector<double>> emb;
    std::map<std::string, std::size_t> index;

    std::size_t intern(const std::string& id, const DocLookup& lookup,
                       const HashedBowEncoder& encoder) {
        auto it = index.find(id);
        if (it != index.end()) return it->second;
        const Document* doc = lookup(id);
        if (!doc) throw data_error("doc_id " + id + " not in collection");
        std::size_t pos = ids.size();
        ids.push_back(id);
        phi.push_back(encoder.featurize(doc->text));
        emb.push_back(encoder.embed(phi.back()));
        index.emplace(id, pos);
        return pos;
    }
};

SamplingConfig resolve_pos_avg(const SamplingConfig& sampling,
                               const std::vector<TrainItem>& items) {
    SamplingConfig cfg = sampling;
    if (cfg.pos_strategy == PosStrategy::PosAvg && cfg.pos_avg_target < 1) {
        std::vector<std::size_t> counts;
        counts.reserve(items.size());
        for (const auto& it : items) counts.push_back(it.labels.positive_ids.size());
        cfg.pos_avg_target = compute_pos_avg_target(counts);
    }
    return cfg;
}

}  // namespace

TrainResult train_stage(const std::vector<TrainItem>& items, HashedBowEncoder& encoder,
                        const DocLookup& lookup, const SamplingConfig& sampling,
                        const LossConfig& loss_cfg, const TrainHyper& hyper, int epochs,
                        AdamW& optimizer, long& global_step, int epoch_base, int stage,
                        UtilityProvider* utilities) {
    if (hyper.batch_size < 1) throw config_error("batch_size must be >= 1");
    if (loss_cfg.kind == LossKind::ReplugKL && !utilities) {
        throw config_error("REPLUG-KL training requires a utility-scoring backend");
    }
    const double temp = loss_cfg.replug_temperature;
    if (!(temp > 0.0)) throw config_error("replug_temperature must be > 0");

    TrainResult result;
    std::set<std::string> skipped;
    std::vector<double> grad(encoder.parameters().size(), 0.0);

    for (int e = 0; e < epochs; ++e) {
        const int epoch = epoch_base + e;
        std::vector<std::size_t> order(items.size());
        std::iota(order.begin(), order.end(), 0);
        DetRng order_rng = DetRng::for_stream(hyper.seed, "epoch-order", (std::uint64_t)epoch);
        order_rng.shuffle(order);

        for (std::size_t start = 0; start < order.size(); start += (std::size_t)hyper.batch_size) {
            std::size_t end = std::min(order.size(), start + (std::size_t)hyper.batch_size);

            std::vector<BatchRow> rows;
            BatchDocs docs;
            for (std::size_t oi = start; oi < end; ++oi) {
                const TrainItem& item = items[order[oi]];
                DetRng qrng =
                    DetRng::for_stream(hyper.seed, item.query.query_id, (std::uint64_t)epoch);
                auto inst = try_sample_instance(item.labels, sampling, item.query.query_id, qrng);
                if (!inst) {
                    skipped.insert(item.query.query_id);
                    continue;
                }
                BatchRow row;
                row.item = &item;
                row.doc_ids = inst->positive_ids;
                row.doc_ids.insert(row.doc_ids.end(), inst->negative_ids.begin(),
                                   inst->negative_ids.end());
                for (std::size_t i = 0; i < inst->positive_ids.size(); ++i) {
                    row.positive_indices.push_back(i);
                }
                for (const auto& id : row.doc_ids) docs.intern(id, lookup, encoder);
                rows.push_back(std::move(row));
            }
            if (rows.empty()) continue;

            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            const double row_weight = 1.0 / (double)rows.size();

            for (const auto& row : rows) {
                SparseVec q_phi = encoder.featurize(row.item->query.text);
                std::vector<double> q_emb = encoder.embed(q_phi);

                std::set<std::string> own(row.doc_ids.begin(), row.doc_ids.end());
                std::vector<std::size_t> cand;  // indices into docs
                for (const auto& id : row.doc_ids) cand.push_back(docs.index.at(id));
                if (loss_cfg.use_in_batch_negatives) {
                    for (std::size_t di = 0; di < docs.ids.size(); ++di) {
                        if (!own.count(docs.ids[di])) cand.push_back(di);
                    }
                }

                std::vector<double> scores(cand.size());
                for (std::size_t c = 0; c < cand.size(); ++c) {
                    scores[c] = HashedBowEncoder::score(q_emb, docs.emb[cand[c]]);
                }

                LossResult lr_res;
                double grad_scale = row_weight;
                if (loss_cfg.kind == LossKind::ReplugKL) {
                    std::vector<double> util(cand.size());
                    for (std::size_t c = 0; c < cand.size(); ++c) {
                        util[c] =
                            utilities->utility(row.item->query, docs.ids[cand[c]]) / temp;
                    }
                    std::vector<double> scaled(scores);
                    for (auto& s : scaled) s /= temp;
                    lr_res = loss_replug(scaled, util);
                    grad_scale /= temp;  // d(s/T)/ds
                } else {
                    lr_res = loss_grad(loss_cfg.kind, scores, row.positive_indices);
                }
                batch_loss += lr_res.value * row_weight;

                for (std::size_t c = 0; c < cand.size(); ++c) {
                    double g = lr_res.grad[c] * grad_scale;
                    if (g == 0.0) continue;
                    encoder.accumulate_score_gradient(q_phi, q_emb, docs.phi[cand[c]],
                                                      docs.emb[cand[c]], g, grad);
                }
            }

            if (!std::isfinite(batch_loss)) {
                throw numeric_error("non-finite loss at step " + std::to_string(global_step + 1) +
                                    " (epoch " + std::to_string(epoch) + ", stage " +
                                    std::to_string(stage) + ")");
            }
            optimizer.step(encoder.parameters(), grad);
            ++global_step;
            ++result.steps;
            result.log.push_back(
                {global_step, epoch, batch_loss, optimizer.options().lr, stage});
        }
    }
    result.skipped_queries.assign(skipped.begin(), skipped.end());
    return result;
}

TrainResult train(const std::vector<TrainItem>& items, HashedBowEncoder& encoder,
                  const DocLookup& lookup, const SamplingConfig& sampling,
                  const LossConfig& loss_cfg, const TrainHyper& hyper,
                  UtilityProvider* utilities) {
    AdamW optimizer(encoder.parameters().size(),
                    {hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.eps,
                     hyper.weight_decay});
    long global_step = 0;
    SamplingConfig cfg = resolve_pos_avg(sampling, items);
    return train_stage(items, encoder, lookup, cfg, loss_cfg, hyper, hyper.epochs, optimizer,
                       global_step, 0, 1, utilities);
}

TrainResult curriculum_train(const std::vector<TrainItem>& stage1_items,
                             const std::vector<TrainItem>& stage2_items,
                             HashedBowEncoder& encoder, const DocLookup& lookup,
                             const SamplingConfig& sampling, const LossConfig& loss_cfg,
                             const TrainHyper& hyper, const CurriculumSchedule& schedule,
                             UtilityProvider* utilities) {
    if (schedule.stage2_fraction < 0.0 || schedule.stage2_fraction > 1.0) {
        throw config_error("stage2_fraction must be in [0, 1]");
    }
    if (schedule.stage2_fraction == 0.0 && schedule.stage2_epochs > 0) {
        throw config_error("stage2_epochs > 0 needs stage2_fraction > 0");
    }

    AdamW optimizer(encoder.parameters().size(),
                    {hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.eps,
                     hyper.weight_decay});
    long global_step = 0;
    SamplingConfig stage1_cfg = resolve_pos_avg(sampling, stage1_items);
    TrainResult result = train_stage(stage1_items, encoder, lookup, stage1_cfg, loss_cfg,
                                     hyper, hyper.epochs, optimizer, global_step, 0, 1,
                                     utilities);

    if (schedule.stage2_epochs > 0 && schedule.stage2_fraction > 0.0 &&
        !stage2_items.empty()) {
        std::vector<std::size_t> idx(stage2_items.size());
        std::iota(idx.begin(), idx.end(), 0);
        auto count = (std::size_t)std::llround(schedule.stage2_fraction *
                                               (double)stage2_items.size());
        count = std::max<std::size_t>(1, std::min(count, stage2_items.size()));
        DetRng rng = DetRng::for_stream(hyper.seed, "stage2-queries", 0);
        auto chosen = rng.sample(idx, count);
        std::sort(chosen.begin(), chosen.end());
        std::vector<TrainItem> subset;
        subset.reserve(chosen.size());
        for (auto i : chosen) subset.push_back(stage2_items[i]);

        if (schedule.stage2_lr_reinit) {
            optimizer.reset();
            optimizer.options().lr = hyper.learning_rate;
        }
        SamplingConfig stage2_cfg = sampling;
        stage2_cfg.pos_strategy = schedule.stage2_pos_strategy;
        stage2_cfg = resolve_pos_avg(stage2_cfg, subset);
        TrainResult r2 = train_stage(subset, encoder, lookup, stage2_cfg, loss_cfg, hyper,
                                     schedule.stage2_epochs, optimizer, global_step,
                                     hyper.epochs, 2, utilities);
        result.log.insert(result.log.end(), r2.log.begin(), r2.log.end());
        result.steps += r2.steps;
        for (auto& q : r2.skipped_queries) result.skipped_queries.push_back(std::move(q));
    }
    return result;
}

void write_training_log(const std::vector<LogEntry>& log, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& e : log) {
        nlohmann::json j;
        j["step"] = e.step;
        j["epoch"] = e.epoch;
        j["loss"] = e.loss;
        j["lr"] = e.lr;
        j["stage"] = e.stage;
        out << j.dump() << "\n";
    }
    write_file_atomic(path, out.str());
}

}  // namespace annoret
