#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dse/corpus.hpp"
#include "dse/training.hpp"

using namespace dse;
using encoder::EncoderConfig;
using encoder::EncoderParams;
using training::TrainingConfig;
using training::TrainingExample;

namespace {

EncoderConfig tiny_config(int embed_dim = 6, int vocab = 32) {
    EncoderConfig cfg;
    cfg.embed_dim = embed_dim;
    cfg.vocab_size = vocab;
    cfg.crop = {1, 1, 16, 8, 4};
    cfg.seed = 3;
    return cfg;
}

// Small corpus of distinct rendered documents + queries.
struct Fixture {
    std::vector<DocumentRecord> docs;
    std::vector<QueryRecord> queries;
    training::BatchData data;

    explicit Fixture(int n_docs = 6, int n_queries = 4) {
        for (int i = 0; i < n_docs; ++i) {
            DocumentRecord d;
            d.doc_id = "d" + std::to_string(i);
            d.text_mirror = "doc word" + std::to_string(i);
            d.image = corpus::render_text_screenshot(d.text_mirror, 24, 24, 0);
            docs.push_back(std::move(d));
        }
        for (int i = 0; i < n_queries; ++i) {
            queries.push_back({"q" + std::to_string(i),
                               "query term" + std::to_string(i),
                               {"word" + std::to_string(i)}});
        }
        for (const auto& q : queries) data.query_texts[q.query_id] = q.text;
        for (const auto& d : docs) data.document_images[d.doc_id] = &d.image;
    }
};

}  // namespace

TEST_CASE("cosine_sim basics") {
    encoder::Vector a(2), b(2), c(2);
    a << 1, 0;
    b << 0, 1;
    c << -1, 0;
    CHECK(training::cosine_sim(a, a) == doctest::Approx(1.0));
    CHECK(training::cosine_sim(a, b) == doctest::Approx(0.0));
    CHECK(training::cosine_sim(a, c) == doctest::Approx(-1.0));
    encoder::Vector d(3);
    CHECK_THROWS_AS(training::cosine_sim(a, d), ConfigError);
}

TEST_CASE("info_nce_loss closed forms") {
    CHECK(training::info_nce_loss(0.37, {}, 0.02) == doctest::Approx(0.0));
    CHECK(training::info_nce_loss(0.5, {0.5}, 0.02) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const std::vector<Scalar> negs(63, 0.1);
    CHECK(training::info_nce_loss(0.1, negs, 0.02) ==
          doctest::Approx(std::log(64.0)).epsilon(1e-12));
}

TEST_CASE("info_nce_loss invariances") {
    std::vector<Scalar> negs = {0.3, -0.2, 0.9, 0.05};
    const Scalar base = training::info_nce_loss(0.4, negs, 0.05);

    SUBCASE("permutation of negatives") {
        std::vector<Scalar> shuffled = {0.05, 0.9, -0.2, 0.3};
        CHECK(training::info_nce_loss(0.4, shuffled, 0.05) == doctest::Approx(base));
    }
    SUBCASE("constant shift of all similarities") {
        std::vector<Scalar> shifted;
        for (Scalar s : negs) shifted.push_back(s + 5.0);
        CHECK(training::info_nce_loss(0.4 + 5.0, shifted, 0.05) ==
              doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("monotone in sim_pos and sim_negs") {
        const Scalar eps = 1e-6;
        CHECK(training::info_nce_loss(0.4 + eps, negs, 0.05) < base);
        auto bumped = negs;
        bumped[2] += eps;
        CHECK(training::info_nce_loss(0.4, bumped, 0.05) > base);
    }
    SUBCASE("extreme sims stay finite") {
        CHECK(std::isfinite(training::info_nce_loss(1.0, {-1.0, 1.0}, 0.001)));
    }
}

TEST_CASE("batch of 1 with zeroed mixer reduces to uniform softmax") {
    const auto cfg = tiny_config();
    auto params = EncoderParams::init(cfg);
    for (auto& l : params.layers) {
        l.w_q.setZero();
        l.w_k.setZero();
        l.w_v.setZero();
        l.w_o.setZero();
        l.ff1.setZero();
        l.ff2.setZero();
    }
    Fixture fx;
    const std::vector<TrainingExample> batch = {{"q0", "d0", {"d1", "d2", "d3"}}};
    const auto [loss, grads] =
        training::batch_loss_and_grads(batch, fx.data, params, cfg, {});
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("unresolvable doc id is a data error naming the id") {
    const auto cfg = tiny_config();
    const auto params = EncoderParams::init(cfg);
    Fixture fx;
    const std::vector<TrainingExample> batch = {{"q0", "ghost", {"d1"}}};
    CHECK_THROWS_WITH_AS(
        training::batch_loss_and_grads(batch, fx.data, params, cfg, {}),
        doctest::Contains("ghost"), ValidationError);
}

TEST_CASE("duplicating an example with cross-use strictly increases loss") {
    const auto cfg = tiny_config();
    const auto params = EncoderParams::init(cfg);
    Fixture fx;
    const std::vector<TrainingExample> single = {{"q0", "d0", {"d1"}}};
    // q1 reuses d0 as its negative, and q0's example repeats in spirit via q1
    const std::vector<TrainingExample> doubled = {{"q0", "d0", {"d1"}},
                                                  {"q1", "d2", {"d0"}}};
    const Scalar l1 =
        training::batch_loss_and_grads(single, fx.data, params, cfg, {}).first;
    const Scalar l2 =
        training::batch_loss_and_grads(doubled, fx.data, params, cfg, {}).first;
    CHECK(l2 > l1);
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto cfg = tiny_config();
    auto params = EncoderParams::init(cfg);
    Fixture fx;
    const std::vector<TrainingExample> batch = {{"q0", "d0", {"d1"}},
                                                {"q1", "d2", {"d3"}}};
    // smooth temperature keeps finite-difference truncation error well
    // below the tolerance; the analytic path is temperature-agnostic
    TrainingConfig tc;
    tc.temperature = 1.0;

    const auto [loss, grads] =
        training::batch_loss_and_grads(batch, fx.data, params, cfg, tc);
    CHECK(loss > 0);

    auto loss_at = [&](EncoderParams& p) {
        return training::batch_loss_and_grads(batch, fx.data, p, cfg, tc).first;
    };

    const Scalar eps = 1e-3;
    Scalar max_rel_err = 0;
    auto g_named = const_cast<EncoderParams&>(grads).named_tensors();
    auto p_named = params.named_tensors();
    for (std::size_t t = 0; t < p_named.size(); ++t) {
        auto& pm = *p_named[t].second;
        const auto& gm = *g_named[t].second;
        for (Eigen::Index i = 0; i < pm.rows(); ++i)
            for (Eigen::Index j = 0; j < pm.cols(); ++j) {
                const Scalar orig = pm(i, j);
                pm(i, j) = orig + eps;
                const Scalar lp = loss_at(params);
                pm(i, j) = orig - eps;
                const Scalar lm = loss_at(params);
                pm(i, j) = orig;
                const Scalar fd = (lp - lm) / (2 * eps);
                const Scalar rel = std::abs(fd - gm(i, j)) /
                                   std::max({std::abs(fd), std::abs(gm(i, j)), 1e-3});
                max_rel_err = std::max(max_rel_err, rel);
            }
    }
    CHECK(max_rel_err <= 1e-4);
}

TEST_CASE("zero learning rate leaves params unchanged with flat loss") {
    const auto cfg = tiny_config();
    Fixture fx;
    const std::vector<TrainingExample> examples = {{"q0", "d0", {"d1"}},
                                                   {"q1", "d2", {"d3"}}};
    TrainingConfig tc;
    tc.learning_rate = 0;
    tc.epochs = 3;
    tc.batch_size = 2;
    tc.optimizer = training::Optimizer::kSgd;
    const auto result = training::train(fx.docs, fx.queries, examples, tc, cfg);
    const auto untouched = EncoderParams::init(cfg);
    CHECK(result.params.patch_proj == untouched.patch_proj);
    CHECK(result.params.token_table == untouched.token_table);
    for (std::size_t i = 1; i < result.loss_log.size(); ++i)
        CHECK(result.loss_log[i].loss ==
              doctest::Approx(result.loss_log[0].loss).epsilon(1e-12));
}

TEST_CASE("seeded training is bit-identical") {
    const auto cfg = tiny_config();
    Fixture fx;
    const std::vector<TrainingExample> examples = {
        {"q0", "d0", {"d1"}}, {"q1", "d2", {"d3"}}, {"q2", "d4", {"d5"}}};
    TrainingConfig tc;
    tc.epochs = 2;
    tc.batch_size = 2;
    tc.seed = 99;
    const auto a = training::train(fx.docs, fx.queries, examples, tc, cfg);
    const auto b = training::train(fx.docs, fx.queries, examples, tc, cfg);
    REQUIRE(a.loss_log.size() == b.loss_log.size());
    for (std::size_t i = 0; i < a.loss_log.size(); ++i)
        CHECK(a.loss_log[i].loss == b.loss_log[i].loss);
}

TEST_CASE("training examples validate and round-trip") {
    TrainingExample bad{"q", "d0", {"d0"}};
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    const std::vector<TrainingExample> examples = {{"q0", "d0", {"d1", "d2"}}};
    const auto path = std::filesystem::temp_directory_path() / "dse_examples.jsonl";
    training::save_examples(examples, path);
    const auto loaded = training::load_examples(path);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].query_id == "q0");
    CHECK(loaded[0].hard_negative_doc_ids == std::vector<std::string>{"d1", "d2"});
}
