#pragma once

// The single declarative config file driving every CLI command. TOML-style
// sections and key = value lines; see load_config for the grammar. Unknown
// sections or keys are config errors so typos fail fast. Values can be
// overridden from the command line with --set section.key=value.
//
// Secrets never live here: backend credentials come from the environment
// (ANNOTATOR_API_URL, ANNOTATOR_API_KEY).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace annoret {

struct PathsConfig {
    std::string collection;
    std::string queries;
    std::string answers;  // gold answers JSONL, optional
    std::string qrels;
    std::vector<std::string> runs;  // source runs for pool building (comma list)
    std::string pools;
    std::string annotations;
    std::string checkpoint;
    std::string run_output;
    std::string generations;
    std::string report;
    std::string log;
    std::string prompts_dir;  // optional template overrides
};

struct AnnotationConfig {
    std::string method = "utilsel";  // relsel | utilsel | utilrank
    double k_percent = 10.0;
    std::string backend = "mock:lexical:0";
    int parallelism = 1;
    int retries = 2;
    int max_output_tokens = 512;
    int window_size = 31;
};

struct PoolSection {
    int n = 30;
    int depth = 100;
    std::string inclusion_mode = "random";  // exclusion | random | inclusion
};

struct SamplingSection {
    int m = 15;
    std::string pos_strategy = "pos-all";  // pos-one | pos-avg | pos-all
    std::uint64_t seed = 0;
};

struct TrainingSection {
    std::string loss = "summarglh";
    int epochs = 2;
    int batch_size = 16;
    double learning_rate = 3e-5;
    bool in_batch_negatives = true;
    double weight_decay = 0.01;
    int dim = 64;
    int buckets = 2048;
    double init_scale = 0.1;
    double replug_temperature = 1.0;
    std::string labels = "llm";  // llm | human
};

struct CurriculumSection {
    double stage2_fraction = 0.2;
    int stage2_epochs = 1;
    bool lr_reinit = true;
    std::string stage2_pos_strategy = "pos-one";
};

struct EvalSection {
    std::string metrics = "mrr@10,recall@100,ndcg@10";
    int top_k_rag = 5;
    int depth = 100;
    std::string run_tag = "annoret";
};

struct PipelineConfig {
    PathsConfig paths;
    AnnotationConfig annotation;
    PoolSection pool;
    SamplingSection sampling;
    TrainingSection training;
    CurriculumSection curriculum;
    EvalSection eval;
};

// Parse a config file. Grammar: [section] headers, key = value lines,
// # comments, blank lines. Values are quoted strings, bare strings, numbers
// or true/false. Errors carry path:line.
PipelineConfig load_config(const std::filesystem::path& path);

// Apply one --set override, e.g. "training.epochs=4".
void apply_override(PipelineConfig& config, const std::string& assignment);

// Validate cross-field constraints and enum spellings; throws config_error.
void validate_config(const PipelineConfig& config);

// Deterministic "section.key = value" listing of every key, for hashing and
// `stats --dump-config`.
std::string canonical_config(const PipelineConfig& config);

// FNV-1a hash of the canonical listing, 16 hex digits. Embedded in output
// artifacts so results trace back to their exact configuration.
std::string config_hash(const PipelineConfig& config);

// Write `<artifact>.meta.json` next to an artifact: config hash, command,
// and seed, so artifacts are self-describing.
void write_meta_sidecar(const std::filesystem::path& artifact_path,
                        const PipelineConfig& config, const std::string& command);

}  // namespace annoret
