#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "annoret/evaluator.hpp"
#include "annoret/rng.hpp"
#include "annoret/util.hpp"

using namespace annoret;

namespace {

struct WarningsOff {
    WarningsOff() { set_warnings_enabled(false); }
    ~WarningsOff() { set_warnings_enabled(true); }
};

// Encoder whose score(q, d) is a number planted in the doc text, so rankings
// are chosen by the test rather than learned.
struct PlantedScores : EncoderModel {
    int dim() const override { return 1; }
    std::vector<double> encode_query(const std::string&) const override { return {1.0}; }
    std::vector<double> encode_doc(const std::string& text) const override {
        return {std::stod(text)};
    }
};

RunFile make_run(const std::string& qid, const std::vector<std::string>& docs) {
    RunFile run;
    run.tag = "t";
    double score = (double)docs.size();
    for (const auto& d : docs) run.add(qid, {d, score--});
    return run;
}

// Reference metric implementations, written independently of the library's.
double oracle_mrr(const std::vector<std::string>& ranking, const RelevanceJudgments& qrels,
                  const std::string& qid, int k) {
    for (int i = 0; i < (int)ranking.size() && i < k; ++i) {
        if (qrels.grade(qid, ranking[i]) > 0) return 1.0 / (double)(i + 1);
    }
    return 0.0;
}

double oracle_recall(const std::vector<std::string>& ranking, const RelevanceJudgments& qrels,
                     const std::string& qid, int k) {
    auto pos = qrels.positives(qid);
    if (pos.empty()) return -1.0;
    std::set<std::string> pos_set(pos.begin(), pos.end());
    int hit = 0;
    for (int i = 0; i < (int)ranking.size() && i < k; ++i) {
        if (pos_set.count(ranking[i])) ++hit;
    }
    return (double)hit / (double)pos.size();
}

double oracle_ndcg(const std::vector<std::string>& ranking, const RelevanceJudgments& qrels,
                   const std::string& qid, int k) {
    // Ideal ranking = the full retrieved list reordered by grade, cut at k.
    std::vector<int> grades;
    double dcg = 0.0;
    for (int i = 0; i < (int)ranking.size(); ++i) {
        int g = qrels.grade(qid, ranking[i]);
        grades.push_back(g);
        if (i < k) dcg += (std::pow(2.0, g) - 1.0) / std::log2((double)i + 2.0);
    }
    std::sort(grades.rbegin(), grades.rend());
    double idcg = 0.0;
    for (int i = 0; i < (int)grades.size() && i < k; ++i) {
        idcg += (std::pow(2.0, grades[i]) - 1.0) / std::log2((double)i + 2.0);
    }
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

}  // namespace

TEST_CASE("exhaustive retrieval ranks by score with doc_id tie-break") {
    PlantedScores enc;
    std::vector<Query> queries = {{"q1", "irrelevant", {}}};

    SUBCASE("scores order the ranking") {
        std::vector<Document> docs = {{"d1", "2.0"}, {"d2", "5.0"}, {"d3", "1.0"}};
        auto run = retrieve_full(enc, queries, docs, 2, "x");
        CHECK(run.tag == "x");
        REQUIRE(run.ranking("q1").size() == 2);
        CHECK(run.ranking("q1")[0].doc_id == "d2");
        CHECK(run.ranking("q1")[0].score == doctest::Approx(5.0));
        CHECK(run.ranking("q1")[1].doc_id == "d1");
    }
    SUBCASE("equal scores fall back to ascending doc_id") {
        std::vector<Document> docs = {{"db", "1.0"}, {"da", "1.0"}, {"dc", "1.0"}};
        auto run = retrieve_full(enc, queries, docs, 3);
        CHECK(run.ranking("q1")[0].doc_id == "da");
        CHECK(run.ranking("q1")[1].doc_id == "db");
        CHECK(run.ranking("q1")[2].doc_id == "dc");
    }
    SUBCASE("depth beyond the corpus returns everything") {
        std::vector<Document> docs = {{"d1", "2.0"}, {"d2", "1.0"}};
        auto run = retrieve_full(enc, queries, docs, 100);
        CHECK(run.ranking("q1").size() == 2);
    }
    SUBCASE("degenerate inputs") {
        std::vector<Document> docs = {{"d1", "1.0"}};
        CHECK_THROWS_AS(retrieve_full(enc, queries, {}, 10), data_error);
        CHECK_THROWS_AS(retrieve_full(enc, queries, docs, 0), data_error);
    }
}

TEST_CASE("rank metrics, pinned values") {
    RelevanceJudgments qrels;
    qrels.set("q1", "rel", 1);

    SUBCASE("reciprocal rank of position 3") {
        auto run = make_run("q1", {"a", "b", "rel"});
        auto r = mrr_at_k(run, qrels, 10);
        CHECK(r.mean == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(r.per_query.at("q1") == doctest::Approx(1.0 / 3.0));
        CHECK(r.metric == "mrr@10");
        CHECK(r.query_count == 1);
    }
    SUBCASE("relevant doc below the cutoff scores zero") {
        std::vector<std::string> docs;
        for (int i = 0; i < 10; ++i) docs.push_back("f" + std::to_string(i));
        docs.push_back("rel");  // rank 11
        auto r = mrr_at_k(make_run("q1", docs), qrels, 10);
        CHECK(r.mean == doctest::Approx(0.0));
    }
    SUBCASE("rank 1 is a perfect score") {
        auto r = mrr_at_k(make_run("q1", {"rel", "a"}), qrels, 10);
        CHECK(r.mean == doctest::Approx(1.0));
    }
    SUBCASE("a query absent from the run counts as zero and is reported") {
        WarningsOff quiet;
        qrels.set("q2", "other", 1);
        auto run = make_run("q1", {"rel"});
        auto r = mrr_at_k(run, qrels, 10);
        CHECK(r.mean == doctest::Approx(0.5));  // (1 + 0) / 2
        CHECK(r.missing_from_run == std::vector<std::string>{"q2"});
        CHECK(r.query_count == 2);
    }
    SUBCASE("recall counts retrieved positives over all positives") {
        qrels.set("q1", "rel2", 1);
        auto r = recall_at_k(make_run("q1", {"rel", "x", "y"}), qrels, 3);
        CHECK(r.mean == doctest::Approx(0.5));
    }
    SUBCASE("recall skips queries with no positives") {
        WarningsOff quiet;
        qrels.set("q3", "junk", 0);
        auto run = make_run("q1", {"rel"});
        run.add("q3", {"junk", 1.0});
        auto r = recall_at_k(run, qrels, 10);
        CHECK(r.mean == doctest::Approx(1.0));  // only q1 counts
        CHECK(r.skipped == std::vector<std::string>{"q3"});
        CHECK(r.query_count == 1);
    }
    SUBCASE("ndcg with a mid-list positive and one unretrieved positive") {
        // Retrieved: rel at 1, miss at 2, rel2 at 3; a third positive exists
        // but is never retrieved. DCG = 1 + 0 + 1/2 = 1.5 and the ideal
        // ordering of the retrieved grades [1,1,0] gives 1 + 1/log2(3).
        qrels.set("q1", "rel2", 1);
        qrels.set("q1", "unret", 1);
        auto r = ndcg_at_k(make_run("q1", {"rel", "miss", "rel2"}), qrels, 10);
        double idcg = 1.0 + 1.0 / std::log2(3.0);
        CHECK(r.mean == doctest::Approx(1.5 / idcg).epsilon(1e-12));
        CHECK(r.mean == doctest::Approx(0.9197).epsilon(1e-4));
    }
    SUBCASE("perfect ranking has ndcg 1") {
        qrels.set("q1", "rel2", 1);
        auto r = ndcg_at_k(make_run("q1", {"rel", "rel2", "x"}), qrels, 10);
        CHECK(r.mean == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("graded gains reward higher grades up front") {
        RelevanceJudgments graded;
        graded.set("q1", "lo", 1);
        graded.set("q1", "hi", 2);
        auto good = ndcg_at_k(make_run("q1", {"hi", "lo"}), graded, 10);
        auto bad = ndcg_at_k(make_run("q1", {"lo", "hi"}), graded, 10);
        CHECK(good.mean == doctest::Approx(1.0));
        CHECK(bad.mean < 1.0);
    }
}

TEST_CASE("rank metrics match the brute-force oracle on random instances") {
    WarningsOff quiet;
    DetRng rng(41);
    for (int t = 0; t < 50; ++t) {
        int n_queries = 1 + (int)rng.below(5);
        int k = 1 + (int)rng.below(12);
        RunFile run;
        run.tag = "r";
        RelevanceJudgments qrels;
        std::vector<std::string> qids;
        for (int qi = 0; qi < n_queries; ++qi) {
            std::string qid = "q" + std::to_string(qi);
            qids.push_back(qid);
            int n_docs = 1 + (int)rng.below(20);
            std::set<std::string> used;
            std::vector<std::string> ranking;
            for (int d = 0; d < n_docs; ++d) {
                std::string did = "d" + std::to_string(rng.below(30));
                if (!used.insert(did).second) continue;
                ranking.push_back(did);
                run.add(qid, {did, 100.0 - (double)d});
            }
            for (const auto& did : ranking) {
                if (rng.uniform() < 0.25) qrels.set(qid, did, 1 + (int)rng.below(3));
            }
            if (rng.uniform() < 0.3) qrels.set(qid, "unretrieved", 1);
            if (!qrels.has_query(qid)) qrels.set(qid, ranking.front(), 0);
        }

        double mrr_sum = 0.0, ndcg_sum = 0.0, recall_sum = 0.0;
        int recall_n = 0;
        for (const auto& qid : qids) {
            std::vector<std::string> ranking;
            for (const auto& e : run.ranking(qid)) ranking.push_back(e.doc_id);
            mrr_sum += oracle_mrr(ranking, qrels, qid, k);
            ndcg_sum += oracle_ndcg(ranking, qrels, qid, k);
            double rec = oracle_recall(ranking, qrels, qid, k);
            if (rec >= 0.0) {
                recall_sum += rec;
                ++recall_n;
            }
        }

        CHECK(mrr_at_k(run, qrels, k).mean ==
              doctest::Approx(mrr_sum / n_queries).epsilon(1e-9));
        CHECK(ndcg_at_k(run, qrels, k).mean ==
              doctest::Approx(ndcg_sum / n_queries).epsilon(1e-9));
        if (recall_n > 0) {
            CHECK(recall_at_k(run, qrels, k).mean ==
                  doctest::Approx(recall_sum / recall_n).epsilon(1e-9));
        }
    }
}

TEST_CASE("metric report serializes to JSON") {
    RelevanceJudgments qrels;
    qrels.set("q1", "rel", 1);
    auto r = mrr_at_k(make_run("q1", {"rel"}), qrels, 10);
    auto json = r.to_json();
    CHECK(json.find("\"metric\"") != std::string::npos);
    CHECK(json.find("\"mrr@10\"") != std::string::npos);
    CHECK(json.find("\"mean\"") != std::string::npos);
    CHECK(json.find("\"per_query\"") != std::string::npos);
}

TEST_CASE("answer normalization and EM/F1, pinned values") {
    CHECK(normalize_answer("The Quick  Fox!") == "quick fox");
    CHECK(normalize_answer("The Quick Fox!", false) == "the quick fox");
    CHECK(normalize_answer("a an the") == "");
    CHECK(normalize_answer("it's U.S.A.") == "its usa");

    SUBCASE("case and punctuation do not matter") {
        auto r = answer_em_f1("Barack Obama", {"barack obama."});
        CHECK(r.em == 1);
        CHECK(r.f1 == doctest::Approx(1.0));
    }
    SUBCASE("partial overlap earns partial F1") {
        auto r = answer_em_f1("the Eiffel Tower in Paris", {"Eiffel Tower"});
        CHECK(r.em == 0);
        CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    }
    SUBCASE("best gold wins") {
        auto r = answer_em_f1("paris", {"London", "Paris!"});
        CHECK(r.em == 1);
        CHECK(r.f1 == doctest::Approx(1.0));
    }
    SUBCASE("empty prediction scores zero") {
        auto r = answer_em_f1("", {"Paris"});
        CHECK(r.em == 0);
        CHECK(r.f1 == doctest::Approx(0.0));
    }
    SUBCASE("prediction and gold both normalizing to empty match exactly") {
        auto r = answer_em_f1("the", {"a"});
        CHECK(r.em == 1);
        CHECK(r.f1 == doctest::Approx(1.0));
    }
    SUBCASE("no gold answers is a data error") {
        CHECK_THROWS_AS(answer_em_f1("x", {}), data_error);
    }
    SUBCASE("duplicate tokens use multiset overlap") {
        // prediction {x, x, y} vs gold {x, y, y}: overlap 2, P = R = 2/3
        auto r = answer_em_f1("x x y", {"x y y"});
        CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    }
}

TEST_CASE("rouge-l, pinned values") {
    CHECK(rouge_l("a b c", "a b c") == doctest::Approx(1.0));
    CHECK(rouge_l("a b c", "d e f") == doctest::Approx(0.0));
    CHECK(rouge_l("", "a b") == doctest::Approx(0.0));
    CHECK(rouge_l("a b", "") == doctest::Approx(0.0));
    SUBCASE("common subsequence of two out of three tokens") {
        // LCS("a b c", "a c d") = "a c", P = R = 2/3, so F = 2/3 at any beta.
        CHECK(rouge_l("a b c", "a c d") == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    }
    SUBCASE("articles are kept as tokens") {
        // "the" counts: LCS("the fox", "fox") = 1, P = 1, R = 1/2.
        double p = 1.0, r = 0.5, beta = 1.2;
        double expect = (1.0 + beta * beta) * p * r / (r + beta * beta * p);
        CHECK(rouge_l("fox", "the fox") == doctest::Approx(expect).epsilon(1e-9));
    }
    SUBCASE("asymmetric beta favors recall") {
        CHECK(rouge_l("fox", "the fox") != doctest::Approx(rouge_l("the fox", "fox")));
    }
}

TEST_CASE("rag generation builds records from the run") {
    PromptLibrary prompts;
    MockBackend backend("lexical", 0);
    std::vector<Document> docs = {{"d1", "Paris is the capital. More text."},
                                  {"d2", "Other passage."},
                                  {"d3", "Third passage."}};
    auto lookup = make_doc_lookup(docs);
    Query q{"q1", "capital of france", {"Paris"}};
    auto run = make_run("q1", {"d1", "d2", "d3"});

    SUBCASE("top-k passages feed the answer prompt") {
        auto rec = rag_generate(q, run, lookup, 2, backend, prompts);
        CHECK(rec.query_id == "q1");
        CHECK(rec.passages_used == std::vector<std::string>{"d1", "d2"});
        CHECK(rec.generated_answer == "Paris is the capital.");
        CHECK(rec.gold_answers == std::vector<std::string>{"Paris"});
        CHECK_FALSE(rec.failed);
    }
    SUBCASE("a short run is a data error") {
        try {
            rag_generate(q, run, lookup, 5, backend, prompts);
            FAIL("expected data_error");
        } catch (const data_error& e) {
            CHECK(std::string(e.what()).find("only 3 entries") != std::string::npos);
        }
    }
    SUBCASE("a query missing from the run is a data error") {
        Query other{"q9", "whatever", {}};
        CHECK_THROWS_AS(rag_generate(other, run, lookup, 2, backend, prompts), data_error);
    }
    SUBCASE("persistent backend failure marks the record failed") {
        WarningsOff quiet;
        struct Failing : LLMBackend {
            std::string name() const override { return "failing"; }
            std::string complete(const std::string&, int) override {
                throw backend_error("down");
            }
        } failing;
        auto rec = rag_generate(q, run, lookup, 2, failing, prompts);
        CHECK(rec.failed);
        CHECK(rec.generated_answer.empty());
    }
    SUBCASE("records round-trip through JSONL") {
        auto rec = rag_generate(q, run, lookup, 2, backend, prompts);
        GenerationRecord failed;
        failed.query_id = "q2";
        failed.failed = true;
        auto path = std::filesystem::temp_directory_path() / "annoret_test_gens.jsonl";
        write_generations({rec, failed}, path);
        auto back = read_generations(path);
        REQUIRE(back.size() == 2);
        CHECK(back[0].query_id == "q1");
        CHECK(back[0].passages_used == rec.passages_used);
        CHECK(back[0].generated_answer == rec.generated_answer);
        CHECK(back[0].gold_answers == rec.gold_answers);
        CHECK_FALSE(back[0].failed);
        CHECK(back[1].failed);
        std::filesystem::remove(path);
    }
}

TEST_CASE("hybrid qrels union human and selected positives") {
    WarningsOff quiet;
    PromptLibrary prompts;
    MockBackend backend("lexical", 0);
    std::vector<Document> docs = {{"d1", "Paris is the capital of France."},
                                  {"d2", "London is in England."},
                                  {"d3", "The capital is Paris, of course."},
                                  {"d4", "Unrelated filler text."}};
    auto lookup = make_doc_lookup(docs);
    std::vector<Query> queries = {{"q1", "capital of france", {"Paris"}}};
    RelevanceJudgments human;
    human.set("q1", "d2", 1);

    std::vector<RunFile> runs = {make_run("q1", {"d1", "d2", "d3", "d4"})};
    auto hybrid = build_hybrid_qrels(runs, human, queries, lookup, backend, prompts);

    // The mock keeps passages containing "Paris"; human's d2 stays graded.
    CHECK(hybrid.grade("q1", "d1") == 1);
    CHECK(hybrid.grade("q1", "d3") == 1);
    CHECK(hybrid.grade("q1", "d2") == 1);
    CHECK(hybrid.grade("q1", "d4") == 0);

    SUBCASE("the union is a superset of the human positives") {
        for (const auto& did : human.positives("q1")) {
            CHECK(hybrid.grade("q1", did) > 0);
        }
    }
    SUBCASE("queries without gold answers are skipped entirely") {
        std::vector<Query> no_gold = {{"q1", "capital of france", {}}};
        auto h = build_hybrid_qrels(runs, human, no_gold, lookup, backend, prompts);
        CHECK(h.positives("q1").empty());
    }
    SUBCASE("annotation failure keeps the human positives") {
        MockBackend refuse("refuse", 0);
        auto h = build_hybrid_qrels(runs, human, queries, lookup, refuse, prompts);
        CHECK(h.positives("q1") == std::vector<std::string>{"d2"});
    }
}
