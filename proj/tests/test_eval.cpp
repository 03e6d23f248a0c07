#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dse/eval.hpp"

using namespace dse;

namespace {

DocumentRecord doc(const std::string& id, const std::string& text) {
    DocumentRecord d;
    d.doc_id = id;
    d.text_mirror = text;
    d.image = PixelGrid(8, 8, 1, 0);
    return d;
}

RunList run_of(const std::string& qid,
               std::vector<std::pair<std::string, Scalar>> entries) {
    RunList run{qid, {}};
    for (auto& [id, s] : entries) run.entries.push_back({id, s});
    eval::sort_run(run);
    return run;
}

}  // namespace

TEST_CASE("has_answer token-boundary semantics") {
    CHECK(eval::has_answer("The Eiffel Tower is in Paris.", {"Paris"}));
    CHECK_FALSE(eval::has_answer("Parisian cafes", {"Paris"}));
    CHECK(eval::has_answer("born in new york city", {"New York City"}));
    CHECK_FALSE(eval::has_answer("new york state", {"New York City"}));
    CHECK_FALSE(eval::has_answer("anything", {}));
    CHECK_FALSE(eval::has_answer("", {"x"}));
}

TEST_CASE("topk_accuracy hand counts") {
    const std::vector<DocumentRecord> corpus = {
        doc("d1", "contains alpha"), doc("d2", "contains beta"),
        doc("d3", "nothing"),        doc("d4", "contains gamma"),
        doc("d5", "nothing again")};
    const std::vector<QueryRecord> queries = {{"q1", "find alpha", {"alpha"}},
                                              {"q2", "find zebra", {"zebra"}},
                                              {"q3", "find gamma", {"gamma"}}};

    SUBCASE("hit at rank 1 and total miss") {
        const std::vector<RunList> runs = {
            run_of("q1", {{"d1", 3.0}, {"d3", 2.0}}),
            run_of("q2", {{"d3", 3.0}, {"d5", 2.0}}),
        };
        const auto report =
            eval::topk_accuracy(runs, queries, corpus, {1, 20});
        CHECK(report.macro.at("top1_accuracy") == doctest::Approx(0.5));
        CHECK(report.macro.at("top20_accuracy") == doctest::Approx(0.5));
    }
    SUBCASE("hit exactly at rank 5") {
        const std::vector<RunList> runs = {run_of(
            "q3", {{"d1", 5}, {"d2", 4}, {"d3", 3}, {"d5", 2}, {"d4", 1}})};
        const auto report = eval::topk_accuracy(runs, queries, corpus, {1, 5});
        CHECK(report.macro.at("top1_accuracy") == doctest::Approx(0.0));
        CHECK(report.macro.at("top5_accuracy") == doctest::Approx(1.0));
    }
    SUBCASE("queries without answers are excluded and counted") {
        const std::vector<QueryRecord> qs = {{"q1", "find alpha", {"alpha"}},
                                             {"qa", "no answers", {}}};
        const std::vector<RunList> runs = {run_of("q1", {{"d1", 1.0}}),
                                           run_of("qa", {{"d1", 1.0}})};
        const auto report = eval::topk_accuracy(runs, qs, corpus, {1});
        CHECK(report.excluded_queries == 1);
        CHECK(report.macro.at("top1_accuracy") == doctest::Approx(1.0));
    }
    SUBCASE("empty run is a miss, not an error") {
        const std::vector<RunList> runs = {{"q1", {}}};
        const auto report = eval::topk_accuracy(runs, queries, corpus, {1, 10});
        CHECK(report.macro.at("top10_accuracy") == doctest::Approx(0.0));
    }
}

TEST_CASE("topk accuracy is monotone in k on randomized runs") {
    std::mt19937_64 rng(31);
    std::vector<DocumentRecord> corpus;
    for (int i = 0; i < 20; ++i)
        corpus.push_back(doc("d" + std::to_string(i),
                             i % 3 == 0 ? "the magic token" : "plain text"));
    std::vector<QueryRecord> queries;
    std::vector<RunList> runs;
    for (int q = 0; q < 100; ++q) {
        queries.push_back({"q" + std::to_string(q), "anything", {"magic token"}});
        RunList run{"q" + std::to_string(q), {}};
        std::vector<int> order(20);
        for (int i = 0; i < 20; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        for (int i = 0; i < 20; ++i)
            run.entries.push_back({"d" + std::to_string(order[i]), static_cast<Scalar>(20 - i)});
        runs.push_back(std::move(run));
    }
    const std::vector<int> ks = {1, 2, 3, 5, 8, 13, 20};
    const auto report = eval::topk_accuracy(runs, queries, corpus, ks);
    for (std::size_t i = 1; i < ks.size(); ++i)
        CHECK(report.macro.at("top" + std::to_string(ks[i]) + "_accuracy") >=
              report.macro.at("top" + std::to_string(ks[i - 1]) + "_accuracy"));
}

TEST_CASE("ndcg analytic values") {
    const std::map<std::string, int> judgments = {{"rel", 1}};
    SUBCASE("sole relevant at rank 1") {
        CHECK(eval::ndcg_at_k(run_of("q", {{"rel", 3}, {"x", 2}}), judgments) ==
              doctest::Approx(1.0));
    }
    SUBCASE("sole relevant at rank 2") {
        CHECK(eval::ndcg_at_k(run_of("q", {{"x", 3}, {"rel", 2}}), judgments) ==
              doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-9));
    }
    SUBCASE("sole relevant at rank 3") {
        CHECK(eval::ndcg_at_k(run_of("q", {{"x", 3}, {"y", 2}, {"rel", 1}}),
                              judgments) == doctest::Approx(0.5));
    }
    SUBCASE("no judgments gives 0, not an exception") {
        CHECK(eval::ndcg_at_k(run_of("q", {{"x", 1}}), {}) == 0.0);
        CHECK(eval::ndcg_at_k({"q", {}}, judgments) == 0.0);
    }
    SUBCASE("graded gains favor higher grades up front") {
        const std::map<std::string, int> graded = {{"a", 2}, {"b", 1}};
        const auto best = eval::ndcg_at_k(run_of("q", {{"a", 2}, {"b", 1}}), graded);
        const auto worse = eval::ndcg_at_k(run_of("q", {{"b", 2}, {"a", 1}}), graded);
        CHECK(best == doctest::Approx(1.0));
        CHECK(worse < best);
    }
}

TEST_CASE("recall analytic values") {
    const std::map<std::string, int> judgments = {{"r1", 1}, {"r2", 1}};
    CHECK(eval::recall_at_k(run_of("q", {{"r1", 2}, {"x", 1}}), judgments) ==
          doctest::Approx(0.5));
    CHECK(eval::recall_at_k(run_of("q", {{"r1", 2}, {"r2", 1}}), judgments) ==
          doctest::Approx(1.0));
    CHECK(eval::recall_at_k(run_of("q", {{"x", 1}}), judgments) == doctest::Approx(0.0));
    CHECK(eval::recall_at_k({"q", {}}, {}) == 0.0);
}

TEST_CASE("metrics ignore permutations below the cutoff") {
    const std::map<std::string, int> judgments = {{"rel", 1}};
    RunList a{"q", {}}, b{"q", {}};
    for (int i = 0; i < 15; ++i)
        a.entries.push_back({"d" + std::to_string(i), static_cast<Scalar>(30 - i)});
    a.entries[3] = {"rel", a.entries[3].score};
    b = a;
    std::swap(b.entries[11], b.entries[13]);  // below k=10
    CHECK(eval::ndcg_at_k(a, judgments, 10) == eval::ndcg_at_k(b, judgments, 10));
    CHECK(eval::recall_at_k(a, judgments, 10) == eval::recall_at_k(b, judgments, 10));
}

TEST_CASE("fuse_runs boundaries and tie rule") {
    const auto dense = run_of("q", {{"d1", 1.0}, {"d2", 0.0}, {"d3", 0.4}});
    const auto lex = run_of("q", {{"d2", 9.0}, {"d1", 3.0}, {"d4", 5.0}});

    SUBCASE("alpha=1 reproduces the dense ordering on the pool") {
        const auto fused = eval::fuse_runs(dense, lex, 1.0, 10);
        std::vector<std::string> dense_order = {"d1", "d3", "d2"};
        // d4 is pooled from lexical with dense score 0, tied with d2
        REQUIRE(fused.entries.size() == 4);
        CHECK(fused.entries[0].doc_id == "d1");
        CHECK(fused.entries[1].doc_id == "d3");
        CHECK(fused.entries[2].doc_id == "d2");  // id tie-break d2 < d4
        CHECK(fused.entries[3].doc_id == "d4");
    }
    SUBCASE("alpha=0 reproduces the lexical ordering on the pool") {
        const auto fused = eval::fuse_runs(dense, lex, 0.0, 10);
        CHECK(fused.entries[0].doc_id == "d2");
        CHECK(fused.entries[1].doc_id == "d4");
        CHECK(fused.entries[2].doc_id == "d1");
    }
    SUBCASE("symmetric opposite scores tie and break by id") {
        const auto d = run_of("q", {{"d1", 1.0}, {"d2", 0.0}});
        const auto l = run_of("q", {{"d2", 1.0}, {"d1", 0.0}});
        const auto fused = eval::fuse_runs(d, l, 0.5, 10);
        REQUIRE(fused.entries.size() == 2);
        CHECK(fused.entries[0].doc_id == "d1");
        CHECK(fused.entries[0].score == doctest::Approx(0.5));
        CHECK(fused.entries[1].score == doctest::Approx(0.5));
    }
    SUBCASE("degenerate normalization contributes constant 1") {
        const auto d = run_of("q", {{"d1", 0.7}, {"d2", 0.7}});
        const auto fused = eval::fuse_runs(d, lex, 1.0, 10);
        for (const auto& e : fused.entries)
            if (e.doc_id == "d1" || e.doc_id == "d2")
                CHECK(e.score == doctest::Approx(1.0));
    }
    SUBCASE("query mismatch rejected") {
        const auto other = run_of("other", {{"d1", 1.0}});
        CHECK_THROWS_AS(eval::fuse_runs(dense, other, 0.5, 10), ValidationError);
    }
}

TEST_CASE("run files round-trip through TREC format") {
    std::vector<RunList> runs = {run_of("q1", {{"d1", 0.75}, {"d2", 0.25}}),
                                 run_of("q2", {{"d3", 1.5}})};
    const auto path = std::filesystem::temp_directory_path() / "dse_run.trec";
    eval::save_runs(runs, path, "tagged");
    const auto loaded = eval::load_runs(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].query_id == "q1");
    CHECK(loaded[0].entries[0].doc_id == "d1");
    CHECK(loaded[0].entries[0].score == doctest::Approx(0.75));
    CHECK(loaded[1].entries[0].doc_id == "d3");
}
