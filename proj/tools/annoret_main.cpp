// annoret: utility-annotation retrieval pipeline CLI.
//
// Every command is driven by one config file plus --set overrides; see
// README.md for the key reference. Exit codes: 0 success, 1 usage/config
// error, 2 data/format error, 3 backend failure.

#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "annoret/annotator.hpp"
#include "annoret/backend.hpp"
#include "annoret/config.hpp"
#include "annoret/corpus_io.hpp"
#include "annoret/encoder.hpp"
#include "annoret/evaluator.hpp"
#include "annoret/pool.hpp"
#include "annoret/prompts.hpp"
#include "annoret/synth.hpp"
#include "annoret/trainer.hpp"
#include "annoret/util.hpp"

namespace {

using namespace annoret;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Config file (TOML-style sections)");
    cmd->add_option("--set", opts.sets, "Override a key, e.g. --set training.epochs=4");
}

PipelineConfig resolve_config(const CommonOpts& opts, const std::vector<std::string>& extra) {
    PipelineConfig config;
    if (!opts.config_path.empty()) config = load_config(opts.config_path);
    for (const auto& s : opts.sets) apply_override(config, s);
    for (const auto& s : extra) apply_override(config, s);
    validate_config(config);
    return config;
}

const std::string& need(const std::string& value, const char* key) {
    if (value.empty()) {
        throw config_error(std::string("config: ") + key + " is required for this command");
    }
    return value;
}

std::vector<Query> load_query_set(const PipelineConfig& config) {
    auto queries = load_queries(need(config.paths.queries, "paths.queries"));
    if (!config.paths.answers.empty()) load_gold_answers(config.paths.answers, queries);
    return queries;
}

std::map<std::string, CandidatePool> load_pool_map(const PipelineConfig& config) {
    std::map<std::string, CandidatePool> pools;
    for (auto& pool : read_pools(need(config.paths.pools, "paths.pools"))) {
        pools[pool.query_id] = std::move(pool);
    }
    return pools;
}

AnnotatorOptions annotator_options(const PipelineConfig& config) {
    AnnotatorOptions opts;
    opts.method = annotation_method_from_string(config.annotation.method);
    opts.k_percent = config.annotation.k_percent;
    opts.retries = config.annotation.retries;
    opts.max_output_tokens = config.annotation.max_output_tokens;
    opts.window_size = config.annotation.window_size;
    return opts;
}

SamplingConfig sampling_config(const PipelineConfig& config) {
    SamplingConfig sampling;
    sampling.m = config.sampling.m;
    sampling.pos_strategy = pos_strategy_from_string(config.sampling.pos_strategy);
    sampling.inclusion_mode = inclusion_mode_from_string(config.pool.inclusion_mode);
    return sampling;
}

TrainHyper train_hyper(const PipelineConfig& config) {
    TrainHyper hyper;
    hyper.epochs = config.training.epochs;
    hyper.batch_size = config.training.batch_size;
    hyper.learning_rate = config.training.learning_rate;
    hyper.seed = config.sampling.seed;
    hyper.weight_decay = config.training.weight_decay;
    return hyper;
}

LossConfig loss_config(const PipelineConfig& config) {
    LossConfig loss;
    loss.kind = loss_kind_from_string(config.training.loss);
    loss.use_in_batch_negatives = config.training.in_batch_negatives;
    loss.replug_temperature = config.training.replug_temperature;
    return loss;
}

// Labeled training items: "llm" reads AnnotationRecords and applies the
// inclusion mode, "human" trains straight on pool positives.
std::vector<TrainItem> build_items(const std::vector<Query>& queries,
                                   const std::map<std::string, CandidatePool>& pools,
                                   const PipelineConfig& config, const std::string& labels) {
    std::vector<TrainItem> items;
    if (labels == "human") {
        for (const auto& q : queries) {
            auto it = pools.find(q.query_id);
            if (it == pools.end()) throw data_error("no candidate pool for query " + q.query_id);
            items.push_back(TrainItem{q, labels_from_qrels(it->second)});
        }
        return items;
    }
    auto records = read_annotations(need(config.paths.annotations, "paths.annotations"));
    std::map<std::string, const AnnotationRecord*> by_query;
    for (const auto& r : records) by_query[r.query_id] = &r;
    InclusionMode inclusion = inclusion_mode_from_string(config.pool.inclusion_mode);
    for (const auto& q : queries) {
        auto rec = by_query.find(q.query_id);
        if (rec == by_query.end()) {
            warn("query " + q.query_id + " has no annotation record; skipped");
            continue;
        }
        auto it = pools.find(q.query_id);
        if (it == pools.end()) throw data_error("no candidate pool for query " + q.query_id);
        items.push_back(TrainItem{
            q, apply_inclusion_mode(it->second, *rec->second, inclusion, config.sampling.m)});
    }
    return items;
}

HashedBowEncoder fresh_encoder(const PipelineConfig& config) {
    HashedBowEncoder encoder(config.training.dim, config.training.buckets);
    DetRng rng = DetRng::for_stream(config.sampling.seed, "encoder-init");
    encoder.init_random(rng, config.training.init_scale);
    return encoder;
}

int cmd_pool(const PipelineConfig& config) {
    auto queries = load_query_set(config);
    auto qrels = load_qrels(need(config.paths.qrels, "paths.qrels"));
    if (config.paths.runs.empty()) {
        throw config_error("config: paths.runs is required for this command");
    }
    std::vector<RunFile> runs;
    for (const auto& p : config.paths.runs) runs.push_back(read_run(p));

    std::vector<CandidatePool> pools;
    for (const auto& q : queries) {
        pools.push_back(build_pool(q.query_id, runs, qrels, config.pool.n, config.pool.depth));
    }
    const auto& out = need(config.paths.pools, "paths.pools");
    write_pools(pools, out);
    write_meta_sidecar(out, config, "pool");
    std::cout << "wrote " << pools.size() << " pools to " << out << "\n";
    return 0;
}

int cmd_annotate(const PipelineConfig& config) {
    auto queries = load_query_set(config);
    auto docs = load_collection(need(config.paths.collection, "paths.collection"));
    auto lookup = make_doc_lookup(docs);
    auto pools = load_pool_map(config);
    PromptLibrary prompts{std::filesystem::path(config.paths.prompts_dir)};
    auto backend = make_backend(config.annotation.backend);

    auto outcome =
        annotate_all(queries, pools, lookup, *backend, prompts, annotator_options(config));
    const auto& out = need(config.paths.annotations, "paths.annotations");
    write_annotations(outcome.records, out);
    write_meta_sidecar(out, config, "annotate");
    std::cout << "annotated " << outcome.records.size() << " queries";
    if (!outcome.failed_query_ids.empty()) {
        std::cout << " (" << outcome.failed_query_ids.size() << " failed)";
    }
    std::cout << ", wrote " << out << "\n";
    return 0;
}

int cmd_train(const PipelineConfig& config, bool curriculum) {
    auto queries = load_query_set(config);
    auto docs = load_collection(need(config.paths.collection, "paths.collection"));
    auto lookup = make_doc_lookup(docs);
    auto pools = load_pool_map(config);

    HashedBowEncoder encoder = fresh_encoder(config);
    SamplingConfig sampling = sampling_config(config);
    LossConfig loss = loss_config(config);
    TrainHyper hyper = train_hyper(config);

    std::unique_ptr<LLMBackend> backend;
    std::unique_ptr<UtilityProvider> utilities;
    if (loss.kind == LossKind::ReplugKL) {
        backend = make_backend(config.annotation.backend);
        utilities = std::make_unique<UtilityProvider>(*backend, lookup);
    }

    TrainResult result;
    if (curriculum) {
        auto stage1 = build_items(queries, pools, config, "llm");
        auto stage2 = build_items(queries, pools, config, "human");
        CurriculumSchedule schedule;
        schedule.stage2_fraction = config.curriculum.stage2_fraction;
        schedule.stage2_epochs = config.curriculum.stage2_epochs;
        schedule.stage2_lr_reinit = config.curriculum.lr_reinit;
        schedule.stage2_pos_strategy =
            pos_strategy_from_string(config.curriculum.stage2_pos_strategy);
        result = curriculum_train(stage1, stage2, encoder, lookup, sampling, loss, hyper,
                                  schedule, utilities.get());
    } else {
        auto items = build_items(queries, pools, config, config.training.labels);
        result = train(items, encoder, lookup, sampling, loss, hyper, utilities.get());
    }

    const auto& out = need(config.paths.checkpoint, "paths.checkpoint");
    encoder.save(out);
    write_meta_sidecar(out, config, curriculum ? "curriculum" : "train");
    if (!config.paths.log.empty()) {
        write_training_log(result.log, config.paths.log);
    }
    std::cout << "trained for " << result.steps << " steps, wrote " << out;
    if (!result.skipped_queries.empty()) {
        std::cout << " (" << result.skipped_queries.size() << " queries had no positives)";
    }
    std::cout << "\n";
    return 0;
}

int cmd_retrieve(const PipelineConfig& config) {
    auto queries = load_query_set(config);
    auto docs = load_collection(need(config.paths.collection, "paths.collection"));
    HashedBowEncoder encoder =
        HashedBowEncoder::load(need(config.paths.checkpoint, "paths.checkpoint"));
    RunFile run = retrieve_full(encoder, queries, docs, config.eval.depth, config.eval.run_tag);
    const auto& out = need(config.paths.run_output, "paths.run_output");
    write_run(run, out);
    write_meta_sidecar(out, config, "retrieve");
    std::cout << "wrote run for " << run.query_order.size() << " queries to " << out << "\n";
    return 0;
}

int cmd_generate(const PipelineConfig& config) {
    auto queries = load_query_set(config);
    auto docs = load_collection(need(config.paths.collection, "paths.collection"));
    auto lookup = make_doc_lookup(docs);
    RunFile run = read_run(need(config.paths.run_output, "paths.run_output"));
    PromptLibrary prompts{std::filesystem::path(config.paths.prompts_dir)};
    auto backend = make_backend(config.annotation.backend);

    std::vector<GenerationRecord> records;
    for (const auto& q : queries) {
        if (!run.has_query(q.query_id)) {
            warn("query " + q.query_id + " missing from run; skipped");
            continue;
        }
        records.push_back(rag_generate(q, run, lookup, config.eval.top_k_rag, *backend, prompts,
                                       config.annotation.retries,
                                       config.annotation.max_output_tokens));
    }
    const auto& out = need(config.paths.generations, "paths.generations");
    write_generations(records, out);
    write_meta_sidecar(out, config, "generate");
    std::cout << "wrote " << records.size() << " generations to " << out << "\n";
    return 0;
}

// One retrieval MetricReport rendered into the evaluate report.
nlohmann::json metric_json(const MetricReport& report) {
    return nlohmann::json::parse(report.to_json());
}

int cmd_evaluate(const PipelineConfig& config) {
    nlohmann::json metrics_out;

    RunFile run;
    RelevanceJudgments qrels;
    bool retrieval_loaded = false;
    std::vector<GenerationRecord> generations;
    bool generations_loaded = false;

    auto metric_names = split(config.eval.metrics, ',');
    if (config.eval.metrics.empty() || metric_names.empty()) {
        throw config_error("config: eval.metrics is empty");
    }
    for (const auto& raw_name : metric_names) {
        std::string name = to_lower(trim(raw_name));
        if (name.empty()) continue;
        auto at = name.find('@');
        if (at != std::string::npos) {
            std::string base = name.substr(0, at);
            int k = 0;
            try {
                std::size_t pos = 0;
                k = std::stoi(name.substr(at + 1), &pos);
                if (pos != name.size() - at - 1 || k < 1) throw std::invalid_argument("k");
            } catch (const std::exception&) {
                throw config_error("config: bad metric cutoff in '" + name + "'");
            }
            if (!retrieval_loaded) {
                run = read_run(need(config.paths.run_output, "paths.run_output"));
                qrels = load_qrels(need(config.paths.qrels, "paths.qrels"));
                retrieval_loaded = true;
            }
            if (base == "mrr") {
                metrics_out[name] = metric_json(mrr_at_k(run, qrels, k));
            } else if (base == "recall") {
                metrics_out[name] = metric_json(recall_at_k(run, qrels, k));
            } else if (base == "ndcg") {
                metrics_out[name] = metric_json(ndcg_at_k(run, qrels, k));
            } else {
                throw config_error("config: unknown metric '" + name + "'");
            }
            continue;
        }
        if (name != "em" && name != "f1" && name != "rouge_l" && name != "rougel") {
            throw config_error("config: unknown metric '" + name + "'");
        }
        if (!generations_loaded) {
            generations = read_generations(need(config.paths.generations, "paths.generations"));
            generations_loaded = true;
        }
        std::map<std::string, double> per_query;
        std::vector<std::string> skipped;
        for (const auto& g : generations) {
            if (g.gold_answers.empty()) {
                skipped.push_back(g.query_id);
                continue;
            }
            double v = 0.0;
            if (!g.failed) {
                if (name == "em" || name == "f1") {
                    EmF1 s = answer_em_f1(g.generated_answer, g.gold_answers);
                    v = name == "em" ? (double)s.em : s.f1;
                } else {
                    for (const auto& gold : g.gold_answers) {
                        v = std::max(v, rouge_l(g.generated_answer, gold));
                    }
                }
            }
            per_query[g.query_id] = v;
        }
        MetricReport report;
        report.metric = name == "rougel" ? "rouge_l" : name;
        report.per_query = per_query;
        report.skipped = skipped;
        report.query_count = per_query.size();
        double sum = 0.0;
        for (const auto& [qid, v] : per_query) sum += v;
        report.mean = per_query.empty() ? 0.0 : sum / (double)per_query.size();
        metrics_out[name] = metric_json(report);
    }

    nlohmann::json out;
    out["config_hash"] = config_hash(config);
    out["metrics"] = metrics_out;
    std::string text = out.dump(2) + "\n";
    if (!config.paths.report.empty()) {
        write_file_atomic(config.paths.report, text);
        write_meta_sidecar(config.paths.report, config, "evaluate");
        std::cout << "wrote " << config.paths.report << "\n";
    } else {
        std::cout << text;
    }
    return 0;
}

int cmd_stats(const PipelineConfig& config) {
    auto records = read_annotations(need(config.paths.annotations, "paths.annotations"));
    auto qrels = load_qrels(need(config.paths.qrels, "paths.qrels"));
    AnnotationQuality q = annotation_quality(records, qrels);

    nlohmann::json out;
    out["config_hash"] = config_hash(config);
    out["query_count"] = q.query_count;
    out["avg_positives"] = q.avg_positives;
    out["precision"] = q.precision ? nlohmann::json(*q.precision) : nlohmann::json();
    out["recall"] = q.recall ? nlohmann::json(*q.recall) : nlohmann::json();
    std::string text = out.dump(2) + "\n";
    std::cout << text;
    if (!config.paths.report.empty()) {
        write_file_atomic(config.paths.report, text);
        write_meta_sidecar(config.paths.report, config, "stats");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"annoret: LLM utility annotation and retrieval training pipeline"};
    app.require_subcommand(1);

    CommonOpts pool_opts, annotate_opts, train_opts, curriculum_opts, retrieve_opts,
        generate_opts, evaluate_opts, stats_opts;

    auto* pool_cmd = app.add_subcommand("pool", "Build candidate pools from runs and qrels");
    add_common(pool_cmd, pool_opts);

    auto* annotate_cmd = app.add_subcommand("annotate", "Run LLM annotation over the pools");
    add_common(annotate_cmd, annotate_opts);
    std::string method_flag;
    annotate_cmd->add_option("--method", method_flag, "relsel | utilsel | utilrank");
    std::string backend_flag;
    annotate_cmd->add_option("--backend", backend_flag, "Backend spec (mock:policy:seed, http)");

    auto* train_cmd = app.add_subcommand("train", "Train the encoder on labeled instances");
    add_common(train_cmd, train_opts);
    std::string train_seed;
    train_cmd->add_option("--seed", train_seed, "Sampling/init seed");

    auto* curriculum_cmd =
        app.add_subcommand("curriculum", "Two-stage training: LLM labels then human labels");
    add_common(curriculum_cmd, curriculum_opts);
    std::string curriculum_seed;
    curriculum_cmd->add_option("--seed", curriculum_seed, "Sampling/init seed");

    auto* retrieve_cmd = app.add_subcommand("retrieve", "Write a full retrieval run");
    add_common(retrieve_cmd, retrieve_opts);

    auto* generate_cmd = app.add_subcommand("generate", "RAG answers from top-k run passages");
    add_common(generate_cmd, generate_opts);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score runs and generations");
    add_common(evaluate_cmd, evaluate_opts);
    std::string metrics_flag;
    evaluate_cmd->add_option("--metrics", metrics_flag,
                             "Comma list: mrr@K, recall@K, ndcg@K, em, f1, rouge_l");

    auto* stats_cmd = app.add_subcommand("stats", "Annotation quality vs human judgments");
    add_common(stats_cmd, stats_opts);

    auto* synth_cmd =
        app.add_subcommand("synth-experiment", "Self-contained synthetic end-to-end checks");
    std::string synth_out = "synth_out";
    std::uint64_t synth_seed = 7;
    synth_cmd->add_option("--out", synth_out, "Output directory");
    synth_cmd->add_option("--seed", synth_seed, "Base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (pool_cmd->parsed()) return cmd_pool(resolve_config(pool_opts, {}));
        if (annotate_cmd->parsed()) {
            std::vector<std::string> extra;
            if (!method_flag.empty()) extra.push_back("annotation.method=" + method_flag);
            if (!backend_flag.empty()) extra.push_back("annotation.backend=" + backend_flag);
            return cmd_annotate(resolve_config(annotate_opts, extra));
        }
        if (train_cmd->parsed()) {
            std::vector<std::string> extra;
            if (!train_seed.empty()) extra.push_back("sampling.seed=" + train_seed);
            return cmd_train(resolve_config(train_opts, extra), false);
        }
        if (curriculum_cmd->parsed()) {
            std::vector<std::string> extra;
            if (!curriculum_seed.empty()) extra.push_back("sampling.seed=" + curriculum_seed);
            return cmd_train(resolve_config(curriculum_opts, extra), true);
        }
        if (retrieve_cmd->parsed()) return cmd_retrieve(resolve_config(retrieve_opts, {}));
        if (generate_cmd->parsed()) return cmd_generate(resolve_config(generate_opts, {}));
        if (evaluate_cmd->parsed()) {
            std::vector<std::string> extra;
            if (!metrics_flag.empty()) extra.push_back("eval.metrics=" + metrics_flag);
            return cmd_evaluate(resolve_config(evaluate_opts, extra));
        }
        if (stats_cmd->parsed()) return cmd_stats(resolve_config(stats_opts, {}));
        if (synth_cmd->parsed()) {
            SynthOutcome outcome = run_synth_experiment(synth_out, synth_seed);
            return outcome.pass() ? 0 : 2;
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const backend_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
