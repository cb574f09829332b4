#include <cmath>

#include "doctest.h"
#include "dass/error.hpp"
#include "dass/pipeline.hpp"
#include "dass/stats.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dass;

namespace {

Eigen::MatrixXd table_design(int a, int b, int c, int d, std::vector<int>& y) {
    Eigen::MatrixXd x(a + b + c + d, 2);
    int row = 0;
    auto add = [&](int count, double e, int yy) {
        for (int i = 0; i < count; ++i, ++row) {
            x.row(row) << 1.0, e;
            y.push_back(yy);
        }
    };
    add(a, 1, 1), add(b, 1, 0), add(c, 0, 1), add(d, 0, 0);
    return x;
}

ClusterModel manual_model(std::vector<int> assignments, int k) {
    ClusterModel m;
    m.params.k = k;
    m.assignments = std::move(assignments);
    m.rank_order.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) m.rank_order[static_cast<std::size_t>(i)] = i;
    m.sizes.assign(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < m.assignments.size(); ++i) {
        m.patient_rows.push_back(i);
        ++m.sizes[static_cast<std::size_t>(m.assignments[i])];
    }
    return m;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("binarize is strict at the threshold") {
    const Cohort c = testing::rating_cohort({"6mo_post"}, {{5}, {4}, {std::nullopt}, {10}}, {1, 2, 3, 4});
    const BinaryOutcome b = binarize_outcome(c, OutcomeSpec{});
    CHECK(b.values == std::vector<int>{1, 0, 1});
    CHECK(b.patients == std::vector<std::size_t>{0, 1, 3});
    CHECK(b.excluded == std::vector<std::size_t>{2});
    OutcomeSpec bad;
    bad.symptom = "nausea";
    CHECK_THROWS_AS(binarize_outcome(c, bad), ValidationError);
    bad = OutcomeSpec{};
    bad.time_point = "wk3";
    CHECK_THROWS_AS(binarize_outcome(c, bad), ValidationError);
}

TEST_CASE("2x2 logistic coefficient is the log cross-product ratio") {
    std::vector<int> y;
    const Eigen::MatrixXd x = table_design(30, 10, 10, 30, y);
    const LogisticFit fit = fit_logistic(x, y);
    CHECK(fit.converged);
    CHECK(std::abs(fit.coefficients[1] - std::log(9.0)) < 1e-6);
    CHECK(std::abs(std::exp(fit.coefficients[1]) - oracle::odds_ratio_2x2(30, 10, 10, 30)) < 1e-6);
}

TEST_CASE("logistic pathologies") {
    std::vector<int> y(10, 0);
    Eigen::MatrixXd x(10, 2);
    for (int i = 0; i < 10; ++i) x.row(i) << 1.0, i;
    CHECK_THROWS_AS(fit_logistic(x, y), ValidationError);

    for (int i = 0; i < 10; ++i) y[static_cast<std::size_t>(i)] = i >= 5;
    const LogisticFit sep = fit_logistic(x, y);
    CHECK(sep.separated);
    CHECK(!sep.converged);

    y = {0, 1, 0, 1, 1, 0, 1, 0, 0, 1};
    Eigen::MatrixXd dup(10, 3);
    dup << x, 2.0 * x.col(1);
    const LogisticFit fit = fit_logistic(dup, y);
    CHECK(fit.dropped_columns == std::vector<int>{2});
    CHECK(fit.coefficients[2] == 0.0);
    CHECK(fit.log_likelihood == doctest::Approx(fit_logistic(x, y).log_likelihood).epsilon(1e-12));
}

TEST_CASE("chi-square tail") {
    CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_sf(0.0, 1) == 1.0);
    CHECK(chi_square_sf(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("evidence labels") {
    CHECK(bic_evidence(-6.0) == Evidence::strong);
    CHECK(bic_evidence(-2.0) == Evidence::reasonable);
    CHECK(bic_evidence(-1.9) == Evidence::none);
}

TEST_CASE("lrt report identities") {
    const SyntheticCohort sc = generate_synthetic_cohort(SyntheticConfig{}, 3);
    Analysis a;
    a.confounders = {"hpv_positive"};
    const ClusterModel m = fit_model(sc.cohort, a);
    const LrtReport r = lrt_clusters(sc.cohort, m, a.outcome, a.confounders);
    REQUIRE(r.clusters.size() == 3);
    const double ln_n = std::log(static_cast<double>(r.n));
    std::size_t total = 0;
    for (const ClusterTest& t : r.clusters) {
        total += t.size;
        CHECK(t.lr_statistic >= -1e-8);
        CHECK(t.p_value >= 0.0);
        CHECK(t.p_value <= 1.0);
        CHECK(t.odds_ratio > 0.0);
        CHECK(t.odds_ratio == doctest::Approx(std::exp(t.coefficient)));
        CHECK(t.bic_full - t.bic_base == doctest::Approx(t.delta_bic));
        CHECK(t.delta_bic - t.delta_aic == doctest::Approx(ln_n - 2.0));
        CHECK(t.aic_base == doctest::Approx(2.0 * 2 - 2.0 * r.base_log_likelihood));
        CHECK(t.p_value == doctest::Approx(chi_square_sf(t.lr_statistic, 1)));
    }
    CHECK(total == r.n);
    CHECK(r.prevalence == doctest::Approx(static_cast<double>(r.severe) / static_cast<double>(r.n)));
    CHECK_THROWS_AS(lrt_clusters(sc.cohort, m, a.outcome, {"smoker"}), ValidationError);
}

TEST_CASE("factor mode adds an overall k-1 df test") {
    const SyntheticCohort sc = generate_synthetic_cohort(SyntheticConfig{}, 3);
    Analysis a;
    const ClusterModel m = fit_model(sc.cohort, a);
    LrtOptions opts;
    opts.factor = true;
    const LrtReport r = lrt_clusters(sc.cohort, m, a.outcome, {}, opts);
    REQUIRE(r.overall.has_value());
    CHECK(r.overall->df == 2);
    CHECK(r.clusters[0].reference);
    CHECK(r.overall->p_value == doctest::Approx(chi_square_sf(r.overall->lr_statistic, 2)));
}

TEST_CASE("threshold sweep keeps order and isolates failures") {
    const Cohort c = testing::rating_cohort({"6mo_post"}, {{1}, {5}, {2}, {4}, {0}, {3}, {5}, {1}},
                                            {10, 12, 30, 32, 50, 52, 11, 31});
    const ClusterModel m = manual_model({0, 0, 1, 1, 1, 1, 0, 1}, 2);
    const std::vector<int> thresholds{3, 6, 1};
    const auto sweep = lrt_threshold_sweep(c, m, OutcomeSpec{}, thresholds, {});
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[0].threshold == 3);
    CHECK(sweep[0].report.has_value());
    CHECK(!sweep[1].report.has_value());
    CHECK(sweep[1].error.find("single-class") != std::string::npos);
    CHECK(sweep[2].report.has_value());
}

TEST_CASE("planted link is detected in the highest-dose cluster") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SyntheticCohort sc = generate_synthetic_cohort(SyntheticConfig{}, seed);
        Analysis a;
        a.params.seed = seed;
        const ClusterModel m = fit_model(sc.cohort, a);
        hits += lrt_clusters(sc.cohort, m, a.outcome, a.confounders).clusters.back().p_value < 0.05;
    }
    CHECK(hits >= 18);
}

TEST_CASE("outcome grid hand fixture") {
    const Cohort c = testing::rating_cohort({"t0", "t1", "t2", "t3", "t4"},
                                            {{0, 1, 2, 3, 4},
                                             {9, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
                                             {5, 5, 5, 5, 5},
                                             {10, 8, 6, 4, 2},
                                             {1, 1, 1, 1, 1},
                                             {std::nullopt, 7, 7, 7, 0}},
                                            {1, 2, 3, 4, 5, 6});
    const ClusterModel m = manual_model({0, 0, 0, 1, 1, 1}, 2);
    const OutcomeGrid g = outcome_grid(c, m, 1, "drymouth");
    REQUIRE(g.date_bins.size() == 5);
    CHECK(g.rating_bins == std::vector<std::string>{"0-1", "2-3", "4-5", "6-7", "8-10"});
    CHECK(g.in_count[0] == 2);
    CHECK(g.in_fraction[0] == std::vector<double>{0.5, 0, 0, 0, 0.5});
    CHECK(g.out_count[0] == 3);
    CHECK(g.out_fraction[0][0] == doctest::Approx(1.0 / 3));
    CHECK(g.out_fraction[0][2] == doctest::Approx(1.0 / 3));
    CHECK(g.out_fraction[0][4] == doctest::Approx(1.0 / 3));
    CHECK(g.in_fraction[1][0] == doctest::Approx(1.0 / 3));
    CHECK(g.in_fraction[1][3] == doctest::Approx(1.0 / 3));
    CHECK(g.in_fraction[1][4] == doctest::Approx(1.0 / 3));
    CHECK(g.out_count[1] == 2);
    CHECK(g.out_fraction[1] == std::vector<double>{0.5, 0, 0.5, 0, 0});
    CHECK(g.in_fraction[4] == std::vector<double>{2.0 / 3, 1.0 / 3, 0, 0, 0});
    REQUIRE(g.mean_rating[1][0].has_value());
    CHECK(*g.mean_rating[1][0] == doctest::Approx(5.5));
    CHECK(*g.mean_rating[0][0] == doctest::Approx(14.0 / 3));
}

TEST_CASE("outcome grid on a real cohort") {
    const SyntheticCohort sc = generate_synthetic_cohort(SyntheticConfig{}, 1);
    Analysis a;
    const ClusterModel m = fit_model(sc.cohort, a);
    const OutcomeGrid g = outcome_grid(sc.cohort, m, 2, "drymouth");
    std::size_t tps = 0;
    for (const auto& bin : g.date_bins) {
        CHECK(!bin.empty());
        tps += bin.size();
    }
    CHECK(tps == sc.cohort.time_points.size());
    for (std::size_t b = 0; b < g.date_bins.size(); ++b) {
        double in = 0, out = 0;
        for (double v : g.in_fraction[b]) in += v;
        for (double v : g.out_fraction[b]) out += v;
        if (g.in_count[b]) CHECK(std::abs(in - 1.0) < 1e-9);
        if (g.out_count[b]) CHECK(std::abs(out - 1.0) < 1e-9);
    }
    const Cohort quiet = testing::rating_cohort({"a", "b"}, {{0, 0}, {0, 0}, {0, 0}, {0, 0}}, {1, 2, 3, 4});
    ClusterModel two = manual_model({0, 0, 1, 1}, 2);
    const OutcomeGrid q = outcome_grid(quiet, two, 1, "drymouth", {2, {0, 2, 4, 6, 8}});
    for (const auto& row : q.in_fraction) CHECK(row[0] == 1.0);
    CHECK_THROWS_AS(outcome_grid(quiet, two, 2, "drymouth"), ValidationError);
}

}
