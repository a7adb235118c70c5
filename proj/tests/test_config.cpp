#include <doctest.h>

#include <filesystem>
#include <string>

#include "annoret/config.hpp"
#include "annoret/util.hpp"

using namespace annoret;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / "annoret_cfg_test";
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path file(const std::string& name) const { return path / name; }
};

std::filesystem::path write_config(const TempDir& dir, const std::string& body) {
    auto p = dir.file("config.toml");
    write_file_atomic(p, body);
    return p;
}

bool message_has(const std::exception& e, const std::string& needle) {
    return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("config files parse sections, comments and quoting") {
    TempDir dir;
    auto p = write_config(dir,
                          "# pipeline settings\n"
                          "[annotation]\n"
                          "method = \"utilrank\"  # trailing comment\n"
                          "k_percent = 25\n"
                          "\n"
                          "[pool]\n"
                          "n = 40\n"
                          "inclusion_mode = \"inclusion\"\n"
                          "\n"
                          "[training]\n"
                          "learning_rate = 0.001\n"
                          "in_batch_negatives = false\n"
                          "labels = \"human\"\n"
                          "\n"
                          "[paths]\n"
                          "runs = \"a.txt, b.txt\"\n"
                          "collection = \"docs # not a comment.tsv\"\n");
    auto cfg = load_config(p);
    CHECK(cfg.annotation.method == "utilrank");
    CHECK(cfg.annotation.k_percent == doctest::Approx(25.0));
    CHECK(cfg.pool.n == 40);
    CHECK(cfg.pool.inclusion_mode == "inclusion");
    CHECK(cfg.training.learning_rate == doctest::Approx(0.001));
    CHECK(cfg.training.in_batch_negatives == false);
    CHECK(cfg.training.labels == "human");
    CHECK(cfg.paths.runs == std::vector<std::string>{"a.txt", "b.txt"});
    CHECK(cfg.paths.collection == "docs # not a comment.tsv");
    // untouched keys keep their defaults
    CHECK(cfg.sampling.m == 15);
    CHECK(cfg.training.loss == "summarglh");
    CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("config parse errors carry file and line") {
    TempDir dir;

    SUBCASE("unknown section") {
        auto p = write_config(dir, "[annotation]\nmethod = \"utilsel\"\n[nonsense]\nx = 1\n");
        try {
            load_config(p);
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(message_has(e, "unknown config section [nonsense]"));
            CHECK(message_has(e, ":3"));
        }
    }
    SUBCASE("unknown key") {
        auto p = write_config(dir, "[annotation]\nmodel_name = \"gpt\"\n");
        try {
            load_config(p);
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(message_has(e, "unknown config key annotation.model_name"));
            CHECK(message_has(e, ":2"));
        }
    }
    SUBCASE("key before any section") {
        auto p = write_config(dir, "method = \"utilsel\"\n");
        try {
            load_config(p);
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(message_has(e, "key 'method' appears before any [section]"));
        }
    }
    SUBCASE("non-integer value") {
        auto p = write_config(dir, "[pool]\nn = lots\n");
        try {
            load_config(p);
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(message_has(e, "value 'lots'"));
            CHECK(message_has(e, "not an integer"));
        }
    }
    SUBCASE("missing equals sign") {
        auto p = write_config(dir, "[pool]\nn 30\n");
        CHECK_THROWS_AS(load_config(p), config_error);
    }
    SUBCASE("unterminated string") {
        auto p = write_config(dir, "[paths]\ncollection = \"half\n");
        CHECK_THROWS_AS(load_config(p), config_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_config(dir.file("absent.toml")), config_error);
    }
}

TEST_CASE("overrides use dotted section.key assignments") {
    PipelineConfig cfg;
    apply_override(cfg, "training.loss=jointlh");
    CHECK(cfg.training.loss == "jointlh");
    apply_override(cfg, "sampling.seed=42");
    CHECK(cfg.sampling.seed == 42);
    apply_override(cfg, "training.learning_rate=0.5");
    CHECK(cfg.training.learning_rate == doctest::Approx(0.5));
    apply_override(cfg, "paths.queries=\"my queries.tsv\"");
    CHECK(cfg.paths.queries == "my queries.tsv");

    SUBCASE("missing dot") {
        try {
            apply_override(cfg, "loss=jointlh");
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(message_has(e, "--set loss=jointlh"));
            CHECK(message_has(e, "expected section.key=value"));
        }
    }
    SUBCASE("unknown key") {
        CHECK_THROWS_AS(apply_override(cfg, "training.momentum=0.9"), config_error);
    }
    SUBCASE("missing equals") {
        CHECK_THROWS_AS(apply_override(cfg, "training.loss"), config_error);
    }
    SUBCASE("bad number") {
        CHECK_THROWS_AS(apply_override(cfg, "training.learning_rate=fast"), config_error);
    }
    SUBCASE("negative seed") {
        CHECK_THROWS_AS(apply_override(cfg, "sampling.seed=-1"), config_error);
    }
}

TEST_CASE("validation rejects out-of-range values") {
    PipelineConfig cfg;
    CHECK_NOTHROW(validate_config(cfg));  // defaults are valid

    SUBCASE("bad enum spellings") {
        auto bad = cfg;
        bad.annotation.method = "vote";
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.training.loss = "hinge";
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.pool.inclusion_mode = "sometimes";
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.sampling.pos_strategy = "pos-few";
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.training.labels = "gold";
        try {
            validate_config(bad);
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(message_has(e, "training.labels must be llm or human"));
        }
    }
    SUBCASE("numeric ranges") {
        auto bad = cfg;
        bad.annotation.k_percent = 0.0;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.annotation.k_percent = 100.5;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.pool.n = 0;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.training.learning_rate = -1.0;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.training.replug_temperature = 0.0;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.curriculum.stage2_fraction = 1.5;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.curriculum.stage2_epochs = -1;
        CHECK_THROWS_AS(validate_config(bad), config_error);
        bad = cfg;
        bad.eval.top_k_rag = 0;
        CHECK_THROWS_AS(validate_config(bad), config_error);
    }
}

TEST_CASE("canonical form and hash are stable and value-sensitive") {
    PipelineConfig a;
    PipelineConfig b;
    CHECK(canonical_config(a) == canonical_config(b));
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    for (char c : config_hash(a)) {
        CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
    }

    // Every line is section.key = value in the fixed table order.
    auto canon = canonical_config(a);
    CHECK(canon.find("training.loss = \"summarglh\"\n") != std::string::npos);
    CHECK(canon.find("sampling.m = 15\n") != std::string::npos);
    CHECK(canon.find("annotation.backend = \"mock:lexical:0\"\n") != std::string::npos);

    b.training.epochs = 3;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.paths.collection = "elsewhere.tsv";
    CHECK(config_hash(a) != config_hash(b));

    // The hash survives a round trip through a config file.
    TempDir dir;
    auto p = dir.file("roundtrip.toml");
    a.training.learning_rate = 0.000125;
    a.annotation.k_percent = 12.5;
    write_file_atomic(p, "[training]\nlearning_rate = 0.000125\n"
                         "[annotation]\nk_percent = 12.5\n");
    auto c = load_config(p);
    CHECK(config_hash(c) == config_hash(a));
}

TEST_CASE("meta sidecars name the artifact and hash") {
    TempDir dir;
    PipelineConfig cfg;
    auto artifact = dir.file("run_output.txt");
    write_file_atomic(artifact, "content\n");
    write_meta_sidecar(artifact, cfg, "retrieve");

    auto meta_path = dir.file("run_output.txt.meta.json");
    REQUIRE(std::filesystem::exists(meta_path));
    auto body = read_file(meta_path);
    CHECK(body.find("\"artifact\"") != std::string::npos);
    CHECK(body.find("run_output.txt") != std::string::npos);
    CHECK(body.find("\"command\"") != std::string::npos);
    CHECK(body.find("\"retrieve\"") != std::string::npos);
    CHECK(body.find(config_hash(cfg)) != std::string::npos);
    CHECK(body.find("\"seed\"") != std::string::npos);
}
