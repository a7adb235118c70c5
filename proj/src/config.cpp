#include "annoret/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "annoret/losses.hpp"
#include "annoret/pool.hpp"
#include "annoret/types.hpp"
#include "annoret/util.hpp"

namespace annoret {

namespace {

// One config key: how to read it for serialization and write it from a
// parsed value. `where` names the source (file:line or the --set argument)
// for error messages.
struct KeyBinding {
    const char* section;
    const char* key;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&, const std::string& where)> set;
};

[[noreturn]] void bad_value(const std::string& where, const std::string& key,
                            const std::string& value, const std::string& expected) {
    throw config_error(where + ": value '" + value + "' for " + key + " is not " + expected);
}

long long parse_int(const std::string& value, const std::string& where, const std::string& key) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0') {
        bad_value(where, key, value, "an integer");
    }
    return v;
}

double parse_float(const std::string& value, const std::string& where, const std::string& key) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (errno != 0 || end == value.c_str() || *end != '\0') {
        bad_value(where, key, value, "a number");
    }
    return v;
}

bool parse_bool(const std::string& value, const std::string& where, const std::string& key) {
    if (value == "true") return true;
    if (value == "false") return false;
    bad_value(where, key, value, "true or false");
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string join_comma(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ",";
        out += p;
    }
    return out;
}

std::vector<std::string> split_comma_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : split(s, ',')) {
        auto t = trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

#define STR_KEY(section_, key_, field)                                              \
    KeyBinding{#section_, #key_,                                                    \
               [](const PipelineConfig& c) { return quote(c.field); },              \
               [](PipelineConfig& c, const std::string& v, const std::string&) {    \
                   c.field = v;                                                     \
               }}

#define INT_KEY(section_, key_, field)                                              \
    KeyBinding{#section_, #key_,                                                    \
               [](const PipelineConfig& c) { return std::to_string(c.field); },     \
               [](PipelineConfig& c, const std::string& v, const std::string& w) {  \
                   c.field = (int)parse_int(v, w, #section_ "." #key_);             \
               }}

#define FLOAT_KEY(section_, key_, field)                                            \
    KeyBinding{#section_, #key_,                                                    \
               [](const PipelineConfig& c) { return format_double(c.field, 10); },  \
               [](PipelineConfig& c, const std::string& v, const std::string& w) {  \
                   c.field = parse_float(v, w, #section_ "." #key_);                \
               }}

#define BOOL_KEY(section_, key_, field)                                             \
    KeyBinding{#section_, #key_,                                                    \
               [](const PipelineConfig& c) {                                        \
                   return std::string(c.field ? "true" : "false");                  \
               },                                                                   \
               [](PipelineConfig& c, const std::string& v, const std::string& w) {  \
                   c.field = parse_bool(v, w, #section_ "." #key_);                 \
               }}

const std::vector<KeyBinding>& key_table() {
    static const std::vector<KeyBinding> table = {
        STR_KEY(paths, collection, paths.collection),
        STR_KEY(paths, queries, paths.queries),
        STR_KEY(paths, answers, paths.answers),
        STR_KEY(paths, qrels, paths.qrels),
        KeyBinding{"paths", "runs",
                   [](const PipelineConfig& c) { return quote(join_comma(c.paths.runs)); },
                   [](PipelineConfig& c, const std::string& v, const std::string&) {
                       c.paths.runs = split_comma_list(v);
                   }},
        STR_KEY(paths, pools, paths.pools),
        STR_KEY(paths, annotations, paths.annotations),
        STR_KEY(paths, checkpoint, paths.checkpoint),
        STR_KEY(paths, run_output, paths.run_output),
        STR_KEY(paths, generations, paths.generations),
        STR_KEY(paths, report, paths.report),
        STR_KEY(paths, log, paths.log),
        STR_KEY(paths, prompts_dir, paths.prompts_dir),

        STR_KEY(annotation, method, annotation.method),
        FLOAT_KEY(annotation, k_percent, annotation.k_percent),
        STR_KEY(annotation, backend, annotation.backend),
        INT_KEY(annotation, parallelism, annotation.parallelism),
        INT_KEY(annotation, retries, annotation.retries),
        INT_KEY(annotation, max_output_tokens, annotation.max_output_tokens),
        INT_KEY(annotation, window_size, annotation.window_size),

        INT_KEY(pool, n, pool.n),
        INT_KEY(pool, depth, pool.depth),
        STR_KEY(pool, inclusion_mode, pool.inclusion_mode),

        INT_KEY(sampling, m, sampling.m),
        STR_KEY(sampling, pos_strategy, sampling.pos_strategy),
        KeyBinding{"sampling", "seed",
                   [](const PipelineConfig& c) { return std::to_string(c.sampling.seed); },
                   [](PipelineConfig& c, const std::string& v, const std::string& w) {
                       long long parsed = parse_int(v, w, "sampling.seed");
                       if (parsed < 0) bad_value(w, "sampling.seed", v, "a non-negative integer");
                       c.sampling.seed = (std::uint64_t)parsed;
                   }},

        STR_KEY(training, loss, training.loss),
        INT_KEY(training, epochs, training.epochs),
        INT_KEY(training, batch_size, training.batch_size),
        FLOAT_KEY(training, learning_rate, training.learning_rate),
        BOOL_KEY(training, in_batch_negatives, training.in_batch_negatives),
        FLOAT_KEY(training, weight_decay, training.weight_decay),
        INT_KEY(training, dim, training.dim),
        INT_KEY(training, buckets, training.buckets),
        FLOAT_KEY(training, init_scale, training.init_scale),
        FLOAT_KEY(training, replug_temperature, training.replug_temperature),
        STR_KEY(training, labels, training.labels),

        FLOAT_KEY(curriculum, stage2_fraction, curriculum.stage2_fraction),
        INT_KEY(curriculum, stage2_epochs, curriculum.stage2_epochs),
        BOOL_KEY(curriculum, lr_reinit, curriculum.lr_reinit),
        STR_KEY(curriculum, stage2_pos_strategy, curriculum.stage2_pos_strategy),

        STR_KEY(eval, metrics, eval.metrics),
        INT_KEY(eval, top_k_rag, eval.top_k_rag),
        INT_KEY(eval, depth, eval.depth),
        STR_KEY(eval, run_tag, eval.run_tag),
    };
    return table;
}

#undef STR_KEY
#undef INT_KEY
#undef FLOAT_KEY
#undef BOOL_KEY

const KeyBinding* find_key(const std::string& section, const std::string& key) {
    for (const auto& b : key_table()) {
        if (section == b.section && key == b.key) return &b;
    }
    return nullptr;
}

bool known_section(const std::string& section) {
    for (const auto& b : key_table()) {
        if (section == b.section) return true;
    }
    return false;
}

// Strip a trailing # comment that is not inside double quotes.
std::string strip_comment(const std::string& line) {
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quotes = !in_quotes;
        if (line[i] == '#' && !in_quotes) return line.substr(0, i);
    }
    return line;
}

std::string unquote_value(const std::string& raw, const std::string& where) {
    std::string v = trim(raw);
    if (v.size() >= 2 && v.front() == '"') {
        if (v.back() != '"') throw config_error(where + ": unterminated string " + v);
        return v.substr(1, v.size() - 2);
    }
    if (!v.empty() && v.front() == '"') {
        throw config_error(where + ": unterminated string " + v);
    }
    return v;
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file: " + path.string());

    PipelineConfig config;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string where = path.string() + ":" + std::to_string(lineno);
        std::string body = trim(strip_comment(line));
        if (body.empty()) continue;

        if (body.front() == '[') {
            if (body.back() != ']') {
                throw config_error(where + ": malformed section header " + body);
            }
            section = trim(body.substr(1, body.size() - 2));
            if (!known_section(section)) {
                throw config_error(where + ": unknown config section [" + section + "]");
            }
            continue;
        }

        auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw config_error(where + ": expected key = value, got '" + body + "'");
        }
        std::string key = trim(body.substr(0, eq));
        std::string value = unquote_value(body.substr(eq + 1), where);
        if (section.empty()) {
            throw config_error(where + ": key '" + key + "' appears before any [section]");
        }
        const KeyBinding* binding = find_key(section, key);
        if (!binding) {
            throw config_error(where + ": unknown config key " + section + "." + key);
        }
        binding->set(config, value, where);
    }
    return config;
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
    std::string where = "--set " + assignment;
    auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw config_error(where + ": expected section.key=value");
    }
    std::string dotted = trim(assignment.substr(0, eq));
    std::string value = unquote_value(assignment.substr(eq + 1), where);
    auto dot = dotted.find('.');
    if (dot == std::string::npos) {
        throw config_error(where + ": expected section.key=value");
    }
    std::string section = dotted.substr(0, dot);
    std::string key = dotted.substr(dot + 1);
    const KeyBinding* binding = find_key(section, key);
    if (!binding) {
        throw config_error(where + ": unknown config key " + section + "." + key);
    }
    binding->set(config, value, where);
}

void validate_config(const PipelineConfig& config) {
    // Enum spellings reuse the canonical from_string parsers so the accepted
    // sets can never drift apart.
    try {
        annotation_method_from_string(config.annotation.method);
        inclusion_mode_from_string(config.pool.inclusion_mode);
        pos_strategy_from_string(config.sampling.pos_strategy);
        pos_strategy_from_string(config.curriculum.stage2_pos_strategy);
        loss_kind_from_string(config.training.loss);
    } catch (const std::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    if (config.training.labels != "llm" && config.training.labels != "human") {
        throw config_error("config: training.labels must be llm or human, got '" +
                           config.training.labels + "'");
    }
    if (config.annotation.k_percent <= 0.0 || config.annotation.k_percent > 100.0) {
        throw config_error("config: annotation.k_percent must be in (0, 100]");
    }
    if (config.annotation.retries < 0) throw config_error("config: annotation.retries must be >= 0");
    if (config.annotation.parallelism < 1) {
        throw config_error("config: annotation.parallelism must be >= 1");
    }
    if (config.annotation.window_size < 1) {
        throw config_error("config: annotation.window_size must be >= 1");
    }
    if (config.pool.n < 1) throw config_error("config: pool.n must be >= 1");
    if (config.pool.depth < 1) throw config_error("config: pool.depth must be >= 1");
    if (config.sampling.m < 1) throw config_error("config: sampling.m must be >= 1");
    if (config.training.epochs < 1) throw config_error("config: training.epochs must be >= 1");
    if (config.training.batch_size < 1) {
        throw config_error("config: training.batch_size must be >= 1");
    }
    if (config.training.learning_rate < 0.0) {
        throw config_error("config: training.learning_rate must be >= 0");
    }
    if (config.training.dim < 1) throw config_error("config: training.dim must be >= 1");
    if (config.training.buckets < 1) throw config_error("config: training.buckets must be >= 1");
    if (config.training.replug_temperature <= 0.0) {
        throw config_error("config: training.replug_temperature must be > 0");
    }
    if (config.curriculum.stage2_fraction < 0.0 || config.curriculum.stage2_fraction > 1.0) {
        throw config_error("config: curriculum.stage2_fraction must be in [0, 1]");
    }
    if (config.curriculum.stage2_epochs < 0) {
        throw config_error("config: curriculum.stage2_epochs must be >= 0");
    }
    if (config.eval.top_k_rag < 1) throw config_error("config: eval.top_k_rag must be >= 1");
    if (config.eval.depth < 1) throw config_error("config: eval.depth must be >= 1");
}

std::string canonical_config(const PipelineConfig& config) {
    std::string out;
    for (const auto& b : key_table()) {
        out += std::string(b.section) + "." + b.key + " = " + b.get(config) + "\n";
    }
    return out;
}

std::string config_hash(const PipelineConfig& config) {
    std::uint64_t h = fnv1a64(canonical_config(config));
    std::ostringstream hex;
    hex << std::hex;
    hex.width(16);
    hex.fill('0');
    hex << h;
    return hex.str();
}

void write_meta_sidecar(const std::filesystem::path& artifact_path,
                        const PipelineConfig& config, const std::string& command) {
    nlohmann::json j;
    j["artifact"] = artifact_path.filename().string();
    j["command"] = command;
    j["config_hash"] = config_hash(config);
    j["seed"] = config.sampling.seed;
    std::filesystem::path meta = artifact_path;
    meta += ".meta.json";
    write_file_atomic(meta, j.dump(2) + "\n");
}

}  // namespace annoret
