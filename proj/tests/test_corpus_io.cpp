#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "annoret/corpus_io.hpp"
#include "annoret/util.hpp"

using namespace annoret;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / "annoret_io_test";
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path file(const std::string& name) const { return path / name; }
};

bool message_has(const std::exception& e, const std::string& needle) {
    return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("collections round-trip through TSV") {
    TempDir dir;
    auto path = dir.file("collection.tsv");
    std::vector<Document> docs = {{"d1", "plain text"},
                                  {"d2", "text with spaces  and two"},
                                  {"d3", ""}};
    write_collection(docs, path);
    auto back = load_collection(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        CHECK(back[i].doc_id == docs[i].doc_id);
        CHECK(back[i].text == docs[i].text);
    }

    SUBCASE("missing tab separator") {
        write_file_atomic(path, "d1 no tab here\n");
        try {
            load_collection(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "missing tab separator"));
            CHECK(message_has(e, ":1"));
        }
    }
    SUBCASE("duplicate doc ids") {
        write_file_atomic(path, "d1\tone\nd1\ttwo\n");
        try {
            load_collection(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "duplicate doc_id d1 at line 2"));
        }
    }
    SUBCASE("empty doc id") {
        write_file_atomic(path, "\ttext\n");
        CHECK_THROWS_AS(load_collection(path), format_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_collection(dir.file("absent.tsv")), data_error);
    }
    SUBCASE("blank lines are skipped") {
        write_file_atomic(path, "d1\tone\n\nd2\ttwo\n");
        CHECK(load_collection(path).size() == 2);
    }
}

TEST_CASE("queries and gold answers round-trip") {
    TempDir dir;
    auto qpath = dir.file("queries.tsv");
    auto apath = dir.file("answers.jsonl");
    std::vector<Query> queries = {{"q1", "what is a fox", {"a small canid"}},
                                  {"q2", "capital of france", {"Paris", "paris"}},
                                  {"q3", "no answers here", {}}};
    write_queries(queries, qpath);
    write_gold_answers(queries, apath);

    auto back = load_queries(qpath);
    REQUIRE(back.size() == 3);
    CHECK(back[0].text == "what is a fox");
    CHECK(back[0].gold_answers.empty());

    load_gold_answers(apath, back);
    CHECK(back[0].gold_answers == std::vector<std::string>{"a small canid"});
    CHECK(back[1].gold_answers == std::vector<std::string>{"Paris", "paris"});
    CHECK(back[2].gold_answers.empty());

    SUBCASE("duplicate query ids") {
        write_file_atomic(qpath, "q1\tone\nq1\ttwo\n");
        try {
            load_queries(qpath);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "duplicate query_id q1 at line 2"));
        }
    }
    SUBCASE("answers for unknown query ids are ignored") {
        write_file_atomic(apath, "{\"query_id\": \"ghost\", \"answers\": [\"x\"]}\n");
        auto qs = load_queries(qpath);
        load_gold_answers(apath, qs);
        for (const auto& q : qs) CHECK(q.gold_answers.empty());
    }
    SUBCASE("malformed answer record") {
        write_file_atomic(apath, "{\"query_id\": \"q1\"}\n");
        auto qs = load_queries(qpath);
        CHECK_THROWS_AS(load_gold_answers(apath, qs), format_error);
    }
}

TEST_CASE("qrels round-trip in four-column form") {
    TempDir dir;
    auto path = dir.file("qrels.txt");
    RelevanceJudgments qrels;
    qrels.set("q1", "d1", 1);
    qrels.set("q1", "d2", 0);
    qrels.set("q2", "d3", 2);
    write_qrels(qrels, path);
    auto back = load_qrels(path);
    CHECK(back.grade("q1", "d1") == 1);
    CHECK(back.grade("q1", "d2") == 0);
    CHECK(back.grade("q2", "d3") == 2);
    CHECK(back.grade("q2", "d9") == 0);  // absent pairs are grade 0
    CHECK(back.positives("q1") == std::vector<std::string>{"d1"});

    SUBCASE("short line") {
        write_file_atomic(path, "q1 0 d1\n");
        try {
            load_qrels(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "expected `query_id 0 doc_id grade`"));
        }
    }
    SUBCASE("non-integer grade") {
        write_file_atomic(path, "q1 0 d1 high\n");
        try {
            load_qrels(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "non-integer grade \"high\""));
        }
    }
    SUBCASE("trailing junk on the grade") {
        write_file_atomic(path, "q1 0 d1 1x\n");
        CHECK_THROWS_AS(load_qrels(path), format_error);
    }
    SUBCASE("negative grade") {
        write_file_atomic(path, "q1 0 d1 -1\n");
        try {
            load_qrels(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "negative grade"));
        }
    }
}

TEST_CASE("runs round-trip in six-column form") {
    TempDir dir;
    auto path = dir.file("run.txt");
    RunFile run;
    run.tag = "sys1";
    run.add("q1", {"d3", 9.25});
    run.add("q1", {"d1", 7.5});
    run.add("q2", {"d2", 1.0});
    write_run(run, path);

    auto back = read_run(path);
    CHECK(back.tag == "sys1");
    REQUIRE(back.has_query("q1"));
    CHECK(back.ranking("q1").size() == 2);
    CHECK(back.ranking("q1")[0].doc_id == "d3");
    CHECK(back.ranking("q1")[0].score == doctest::Approx(9.25));
    CHECK(back.ranking("q1")[1].doc_id == "d1");
    CHECK(back.ranking("q2")[0].doc_id == "d2");
    CHECK(back.query_order == std::vector<std::string>{"q1", "q2"});

    SUBCASE("an empty tag is written as a default") {
        RunFile untagged;
        untagged.add("q1", {"d1", 1.0});
        write_run(untagged, path);
        CHECK(read_run(path).tag == "annoret");
    }
    SUBCASE("rank gaps are rejected") {
        write_file_atomic(path, "q1 Q0 d1 1 2.0 t\nq1 Q0 d2 3 1.0 t\n");
        try {
            read_run(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "rank sequence for query q1"));
            CHECK(message_has(e, "got 3, expected 2"));
        }
    }
    SUBCASE("ranks must start at one per query") {
        write_file_atomic(path, "q1 Q0 d1 2 2.0 t\n");
        CHECK_THROWS_AS(read_run(path), format_error);
    }
    SUBCASE("duplicate docs within a query are rejected") {
        write_file_atomic(path, "q1 Q0 d1 1 2.0 t\nq1 Q0 d1 2 1.0 t\n");
        try {
            read_run(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "duplicate doc_id in run: d1 for query q1"));
        }
    }
    SUBCASE("short line") {
        write_file_atomic(path, "q1 Q0 d1 1 2.0\n");
        try {
            read_run(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "expected `query_id Q0 doc_id rank score tag`"));
        }
    }
    SUBCASE("bad rank token") {
        write_file_atomic(path, "q1 Q0 d1 one 2.0 t\n");
        try {
            read_run(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "bad rank or score"));
        }
    }
    SUBCASE("interleaved queries keep independent rank counters") {
        write_file_atomic(path, "q1 Q0 d1 1 3.0 t\nq2 Q0 d2 1 3.0 t\nq1 Q0 d3 2 2.0 t\n");
        auto r = read_run(path);
        CHECK(r.ranking("q1").size() == 2);
        CHECK(r.ranking("q2").size() == 1);
    }
}

TEST_CASE("annotation records round-trip through JSONL") {
    TempDir dir;
    auto path = dir.file("annotations.jsonl");
    AnnotationRecord a;
    a.query_id = "q1";
    a.method = AnnotationMethod::UtilSel;
    a.candidate_ids = {"d1", "d2", "d3"};
    a.positive_ids = {"d2"};
    a.pseudo_answer = "short answer";
    a.raw_responses = {"[2]", "short answer", "[1]"};
    a.annotator_tag = "mock:lexical:0";
    AnnotationRecord b;
    b.query_id = "q2";
    b.method = AnnotationMethod::RelSel;
    b.candidate_ids = {"d4"};
    b.positive_ids = {};

    write_annotations({a, b}, path);
    auto back = read_annotations(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].query_id == "q1");
    CHECK(back[0].method == AnnotationMethod::UtilSel);
    CHECK(back[0].positive_ids == a.positive_ids);
    CHECK(back[0].candidate_ids == a.candidate_ids);
    CHECK(back[0].pseudo_answer.value() == "short answer");
    CHECK(back[0].raw_responses == a.raw_responses);
    CHECK(back[0].annotator_tag == a.annotator_tag);
    CHECK(back[1].method == AnnotationMethod::RelSel);
    CHECK_FALSE(back[1].pseudo_answer.has_value());

    SUBCASE("records violating their invariants are rejected on read") {
        // positive_ids must be a subset of candidate_ids
        write_file_atomic(path,
                          "{\"query_id\":\"q\",\"method\":\"utilsel\",\"positive_ids\":[\"x\"],"
                          "\"candidate_ids\":[\"d1\"],\"pseudo_answer\":null}\n");
        CHECK_THROWS_AS(read_annotations(path), data_error);
    }
    SUBCASE("bad JSON names the line") {
        write_file_atomic(path, "{not json\n");
        try {
            read_annotations(path);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(message_has(e, "bad annotation record"));
            CHECK(message_has(e, ":1"));
        }
    }
    SUBCASE("write refuses invalid records") {
        AnnotationRecord bad;
        bad.query_id = "q";
        bad.positive_ids = {"ghost"};
        bad.candidate_ids = {"d1"};
        CHECK_THROWS_AS(write_annotations({bad}, path), data_error);
    }
}

TEST_CASE("validate_record enforces the per-record invariants") {
    AnnotationRecord r;
    r.query_id = "q";
    r.candidate_ids = {"d1", "d2"};
    r.positive_ids = {"d1"};
    CHECK_NOTHROW(validate_record(r));

    SUBCASE("duplicate positives") {
        r.positive_ids = {"d1", "d1"};
        CHECK_THROWS_AS(validate_record(r), data_error);
    }
    SUBCASE("positive outside the candidates") {
        r.positive_ids = {"d9"};
        try {
            validate_record(r);
            FAIL("expected data_error");
        } catch (const data_error& e) {
            CHECK(message_has(e, "positive_id d9 not among candidate_ids"));
        }
    }
}
