#include <doctest.h>

#include <cmath>
#include <random>

#include "csranker/batch_solver.hpp"
#include "csranker/evaluation.hpp"
#include "csranker/online_solver.hpp"
#include "csranker/text_util.hpp"
#include "test_util.hpp"

using namespace csranker;

namespace {

ModelParams params_for_tests() {
    ModelParams p;
    p.c1 = 2.0;
    p.c2 = 1.0;
    p.lambda = 0.5;
    return p;
}

OnlineConfig small_config() {
    OnlineConfig cfg;
    cfg.min_active = 20;
    cfg.clean_period = 50;
    cfg.clean_max_removed = 30;
    return cfg;
}

}  // namespace

TEST_CASE("a single decoy round lands at the clipped one-variable optimum") {
    std::vector<PsmRecord> recs(1);
    recs[0].id = "d1";
    recs[0].label = -1;
    recs[0].features.fill(0.25);
    Dataset d = normalize_and_weight(mark_all_train(Dataset(recs)));

    ModelParams p = params_for_tests();
    const OnlineResult r = run_online(d, p, small_config());
    REQUIRE(r.model.alpha.size() == 1);
    CHECK(r.model.alpha[0] == doctest::Approx(std::max(-p.c1, -1.0)).epsilon(1e-12));
    CHECK(r.final_active_size == 1);
}

TEST_CASE("fixed seeds reproduce the discriminant exactly") {
    const Dataset d = csranker::testing::make_training_data({150, 150, 0.4, 4.0, 91}, 3);
    ModelParams p = params_for_tests();
    OnlineConfig cfg = small_config();
    cfg.seed = 17;
    const OnlineResult a = run_online(d, p, cfg);
    const OnlineResult b = run_online(d, p, cfg);
    REQUIRE(a.model.alpha.size() == b.model.alpha.size());
    for (std::size_t j = 0; j < a.model.alpha.size(); ++j) {
        CHECK(a.model.alpha[j] == b.model.alpha[j]);
        CHECK(a.model.support_rows[j] == b.model.support_rows[j]);
    }

    cfg.seed = 18;  // different order, different path
    const OnlineResult c = run_online(d, p, cfg);
    CHECK(c.final_violation <= cfg.tau);
}

TEST_CASE("process seeds gradients and leaves untouched coordinates alone") {
    const Dataset d = csranker::testing::make_training_data({30, 30, 0.5, 3.0, 19}, 5);
    ModelParams p = params_for_tests();
    OnlineSession session(d, p, small_config());
    FeatureMatrixView x{d.weighted_matrix().data(), d.size(), kFeatureCount};

    const auto train = d.train_rows();
    // empty S: g of the first insert is its own label
    const int first = train[0];
    const int pos0 = session.insert(first);
    session.process(pos0);
    CHECK(session.state().grad[static_cast<std::size_t>(pos0)] ==
          static_cast<double>(d.records()[static_cast<std::size_t>(first)].label));

    // no eta flips: inserting more leaves existing gradients consistent
    for (std::size_t k = 1; k < 12; ++k) {
        const int pos = session.insert(train[k]);
        session.process(pos);
    }
    CHECK(csranker::testing::max_gradient_drift(session.state(), x, p.kernel) <=
          1e-8);

    // drive some alpha mass in, force eta flips, re-check consistency
    while (!session.reprocess()) {
    }
    auto& st = session.mutable_state();
    for (std::size_t pos = 0; pos < st.size(); ++pos) {
        if (st.y[pos] != 1) continue;
        st.eta[pos] ^= 1;
        const BoxBounds b = compute_bounds(1, st.eta[pos], p);
        st.lo[pos] = b.lo;
        st.hi[pos] = b.hi;
        st.pending_resets.push_back(static_cast<int>(pos));
    }
    session.process(-1);
    for (std::size_t pos = 0; pos < st.size(); ++pos) {
        CHECK(st.alpha[pos] >= st.lo[pos]);
        CHECK(st.alpha[pos] <= st.hi[pos]);
    }
    CHECK(csranker::testing::max_gradient_drift(st, x, p.kernel) <= 1e-8);
}

TEST_CASE("reprocess honours the termination test and ascends the dual") {
    const Dataset d = csranker::testing::make_training_data({40, 40, 0.5, 3.0, 23}, 7);
    ModelParams p = params_for_tests();
    FeatureMatrixView x{d.weighted_matrix().data(), d.size(), kFeatureCount};
    OnlineConfig cfg = small_config();
    OnlineSession session(d, p, cfg);

    const auto train = d.train_rows();
    for (std::size_t k = 0; k < 20; ++k) {
        const int pos = session.insert(train[k]);
        session.refresh_eta();
        session.process(pos);
        double g_before = dual_objective(session.state(), p, x);
        while (!session.reprocess()) {
            const double g_after = dual_objective(session.state(), p, x);
            CHECK(g_after >= g_before - 1e-12);
            g_before = g_after;
        }
        CHECK(session.kkt() <= cfg.tau);
        // exit leaves the state untouched
        const std::vector<double> alpha_at_exit = session.state().alpha;
        CHECK(session.reprocess());
        CHECK(session.state().alpha == alpha_at_exit);
    }
}

TEST_CASE("reprocess takes the unconstrained coordinate optimum when free") {
    std::vector<PsmRecord> recs(1);
    recs[0].id = "t1";
    recs[0].label = 1;
    recs[0].features.fill(0.0);
    Dataset d = normalize_and_weight(mark_all_train(Dataset(recs)));

    ModelParams p = params_for_tests();
    OnlineConfig cfg = small_config();
    OnlineSession session(d, p, cfg);
    const int pos = session.insert(0);
    session.process(pos);
    // target at alpha = 0 = lo, g = 1, K = 1, hi - alpha = c2 = 1 > g? No:
    // step = min(hi - alpha, g) = min(1, 1) lands exactly at the optimum.
    CHECK_FALSE(session.reprocess());
    CHECK(session.state().alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(session.state().grad[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(session.reprocess());  // now within tau
}

TEST_CASE("clean removes only zero-alpha vectors and keeps f intact") {
    const Dataset d = csranker::testing::make_training_data({80, 80, 0.4, 4.0, 29}, 9);
    ModelParams p = params_for_tests();
    OnlineConfig cfg = small_config();
    cfg.clean_period = 1000000;  // manual cleaning only
    OnlineSession session(d, p, cfg);

    const auto train = d.train_rows();
    for (std::size_t k = 0; k < 60; ++k) session.round(train[k]);

    const DualState& st = session.state();
    std::size_t zeros = 0;
    for (std::size_t pos = 0; pos < st.size(); ++pos)
        zeros += st.alpha[pos] == 0.0;
    const std::size_t nonzeros = st.size() - zeros;

    // Probe f before cleaning.
    TrainedModel before = make_trained_model(d, p, st);
    const Discriminant f_before = before.discriminant();
    std::vector<double> probes;
    for (std::size_t i = 0; i < 50 && i < d.size(); ++i)
        probes.push_back(f_before.evaluate(d.weighted_row(i)));

    SUBCASE("all zero-alpha vectors fit the budget") {
        session.clean();
        CHECK(session.state().size() == nonzeros);
        TrainedModel after = make_trained_model(d, p, session.state());
        const Discriminant f_after = after.discriminant();
        for (std::size_t i = 0; i < probes.size(); ++i)
            CHECK(std::abs(f_after.evaluate(d.weighted_row(i)) - probes[i]) <=
                  1e-12);
    }
    SUBCASE("budget smaller than the zero set removes exactly m") {
        REQUIRE(zeros >= 3);
        OnlineConfig tight = cfg;
        tight.clean_max_removed = 3;
        OnlineSession s2(d, p, tight);
        for (std::size_t k = 0; k < 60; ++k) s2.round(train[k]);
        const std::size_t size_before = s2.state().size();
        std::size_t zero_before = 0;
        for (std::size_t pos = 0; pos < s2.state().size(); ++pos)
            zero_before += s2.state().alpha[pos] == 0.0;
        s2.clean();
        const std::size_t removed = size_before - s2.state().size();
        CHECK(removed == std::min<std::size_t>(3, zero_before));
    }
    SUBCASE("no zero alphas, no removal") {
        OnlineSession s3(d, p, cfg);
        const int row = train[0];
        s3.round(row);
        // single active decoy/target carries nonzero alpha after its round
        if (s3.state().alpha[0] != 0.0) {
            const std::size_t size_before = s3.state().size();
            s3.clean();
            CHECK(s3.state().size() == size_before);
        }
    }
}

TEST_CASE("online runs terminate at the kkt tolerance on the survivors") {
    ModelParams p = params_for_tests();
    for (std::uint64_t seed : {5u, 6u}) {
        const Dataset d = csranker::testing::make_training_data(
            {200, 200, 0.35, 5.0, seed * 7}, seed);
        OnlineConfig cfg = small_config();
        cfg.seed = seed;
        const OnlineResult r = run_online(d, p, cfg);
        CHECK(r.final_violation <= cfg.tau);
        CHECK(r.support_count > 0);
        CHECK(r.rounds == d.train_rows().size());
    }
}

TEST_CASE("the expansion agrees with the gradient identity f = y - g") {
    const Dataset d = csranker::testing::make_training_data({100, 100, 0.4, 5.0, 83}, 2);
    ModelParams p = params_for_tests();
    OnlineConfig cfg = small_config();
    OnlineSession session(d, p, cfg);
    for (int row : d.train_rows()) session.round(row);
    const OnlineResult r = session.finish();

    const Discriminant f = r.model.discriminant();
    const DualState& st = session.state();
    for (std::size_t pos = 0; pos < st.size(); ++pos) {
        const double via_g = discriminant_value_at(st, static_cast<int>(pos));
        const double via_f = f.evaluate(
            d.weighted_row(static_cast<std::size_t>(st.rows[pos])));
        CHECK(std::abs(via_g - via_f) <= 1e-8);
    }
}

TEST_CASE("multiple epochs revisit samples without duplicating them") {
    const Dataset d = csranker::testing::make_training_data({80, 80, 0.4, 5.0, 89}, 6);
    ModelParams p = params_for_tests();
    OnlineConfig cfg = small_config();
    cfg.epochs = 2;
    const OnlineResult r = run_online(d, p, cfg);
    CHECK(r.rounds == 2 * d.train_rows().size());
    CHECK(r.final_active_size <= d.train_rows().size());  // no duplicates
    CHECK(r.final_violation <= cfg.tau);

    const OnlineResult again = run_online(d, p, cfg);
    CHECK(again.model.alpha == r.model.alpha);
}

TEST_CASE("progress log emits one row per round") {
    const Dataset d = csranker::testing::make_training_data({60, 60, 0.4, 5.0, 87}, 4);
    ModelParams p = params_for_tests();
    OnlineConfig cfg = small_config();
    std::ostringstream log;
    cfg.progress = &log;
    const OnlineResult r = run_online(d, p, cfg);

    std::istringstream in(log.str());
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto cells = split_tabs(line);
        REQUIRE(cells.size() == 5);  // round, |S|, #eta, violation, kernel evals
    }
    CHECK(rows == r.rounds);
}

TEST_CASE("feasibility and gradient consistency under fuzzed subroutines") {
    const Dataset d = csranker::testing::make_training_data({120, 120, 0.4, 4.0, 61}, 11);
    ModelParams p = params_for_tests();
    FeatureMatrixView x{d.weighted_matrix().data(), d.size(), kFeatureCount};
    OnlineConfig cfg = small_config();
    OnlineSession session(d, p, cfg);

    std::mt19937_64 rng(99);
    const auto train = d.train_rows();
    std::size_t next_insert = 0;
    for (int step = 0; step < 4000; ++step) {
        const auto dice = rng() % 10;
        if (dice < 4 && next_insert < train.size()) {
            const int pos = session.insert(train[next_insert++]);
            session.refresh_eta();
            session.process(pos);
        } else if (dice < 8 && session.state().size() > 0) {
            session.reprocess();
        } else if (session.state().size() > 0) {
            if (dice == 8)
                session.clean();
            else {
                session.refresh_eta();
                session.process(-1);
            }
        }
        const DualState& st = session.state();
        for (std::size_t pos = 0; pos < st.size(); ++pos) {
            REQUIRE(st.alpha[pos] >= st.lo[pos]);
            REQUIRE(st.alpha[pos] <= st.hi[pos]);
        }
        if (step % 400 == 0)
            REQUIRE(csranker::testing::max_gradient_drift(st, x, p.kernel) <= 1e-8);
    }
}

TEST_CASE("online and batch accept similar sets on the same data") {
    const Dataset d = csranker::testing::make_training_data({400, 400, 0.35, 5.0, 101}, 13);
    ModelParams p = params_for_tests();

    OnlineConfig oc = small_config();
    oc.min_active = 100;
    const OnlineResult online = run_online(d, p, oc);
    BatchConfig bc;
    const BatchResult batch = cccp_solve(d, p, bc);

    const FdrResult f_online =
        fdr_threshold(score_all(d, online.model.discriminant()), 0.05);
    const FdrResult f_batch =
        fdr_threshold(score_all(d, batch.model.discriminant()), 0.05);
    REQUIRE(f_batch.accepted_targets > 0);
    const double rel =
        std::abs(static_cast<double>(f_online.accepted_targets) -
                 static_cast<double>(f_batch.accepted_targets)) /
        static_cast<double>(f_batch.accepted_targets);
    CHECK(rel <= 0.05);
}
