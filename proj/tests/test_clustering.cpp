#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "dass/clustering.hpp"
#include "dass/error.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dass;

namespace {

struct Blobs {
    FeatureMatrix matrix;
    std::vector<int> labels;
};

Blobs blobs(std::uint64_t seed, int per = 40, int dims = 3, double separation = 8.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Blobs b;
    b.matrix.values.resize(3 * per, dims);
    for (int g = 0; g < 3; ++g)
        for (int i = 0; i < per; ++i) {
            const int row = g * per + i;
            for (int d = 0; d < dims; ++d) b.matrix.values(row, d) = z(rng) + (d == g % dims ? separation * g : 0.0);
            b.labels.push_back(g);
        }
    b.matrix.patient_rows.resize(static_cast<std::size_t>(3 * per));
    std::iota(b.matrix.patient_rows.begin(), b.matrix.patient_rows.end(), std::size_t{0});
    return b;
}

ClusterParams with(ClusterMethod m, std::uint64_t seed = 0) {
    ClusterParams p;
    p.method = m;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("separated blobs are recovered by every method") {
    for (ClusterMethod m : {ClusterMethod::kmeans, ClusterMethod::ward_hierarchical, ClusterMethod::bayesian_gmm})
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Blobs b = blobs(seed);
            const ClusterModel model = cluster_cohort(b.matrix, with(m, seed));
            INFO(to_string(m), " seed ", seed);
            CHECK(oracle::adjusted_rand_index(model.assignments, b.labels) >= 0.99);
        }
}

TEST_CASE("full covariance mixture also recovers blobs") {
    ClusterParams p = with(ClusterMethod::bayesian_gmm, 3);
    p.covariance = CovarianceType::full;
    const Blobs b = blobs(3);
    CHECK(oracle::adjusted_rand_index(cluster_cohort(b.matrix, p).assignments, b.labels) >= 0.99);
}

TEST_CASE("duplicated rows share assignments") {
    Blobs b = blobs(5, 15);
    const Eigen::Index n = b.matrix.values.rows();
    Eigen::MatrixXd doubled(2 * n, b.matrix.values.cols());
    doubled << b.matrix.values, b.matrix.values;
    FeatureMatrix m;
    m.values = doubled;
    m.patient_rows.resize(static_cast<std::size_t>(2 * n));
    std::iota(m.patient_rows.begin(), m.patient_rows.end(), std::size_t{0});
    for (ClusterMethod method : {ClusterMethod::kmeans, ClusterMethod::ward_hierarchical, ClusterMethod::bayesian_gmm}) {
        const ClusterModel model = cluster_cohort(m, with(method));
        for (Eigen::Index i = 0; i < n; ++i)
            CHECK(model.assignments[static_cast<std::size_t>(i)] == model.assignments[static_cast<std::size_t>(i + n)]);
    }
}

TEST_CASE("fits are deterministic") {
    const Blobs b = blobs(9, 30, 4, 2.0);
    for (ClusterMethod m : {ClusterMethod::kmeans, ClusterMethod::ward_hierarchical, ClusterMethod::bayesian_gmm}) {
        const ClusterModel a = cluster_cohort(b.matrix, with(m, 4));
        const ClusterModel c = cluster_cohort(b.matrix, with(m, 4));
        CHECK(a.assignments == c.assignments);
        CHECK(a.log_likelihood == c.log_likelihood);
    }
}

TEST_CASE("serial and parallel fits agree") {
    const Blobs b = blobs(2, 50, 5, 1.5);
    for (ClusterMethod m : {ClusterMethod::kmeans, ClusterMethod::bayesian_gmm}) {
        const ClusterModel s = cluster_cohort(b.matrix, with(m, 7), Execution::serial);
        const ClusterModel p = cluster_cohort(b.matrix, with(m, 7), Execution::parallel);
        CHECK(s.assignments == p.assignments);
        CHECK(s.objective == p.objective);
        CHECK(s.inertia == p.inertia);
    }
}

TEST_CASE("penalized EM objective never decreases") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Blobs b = blobs(seed, 40, 4, 1.0);
        for (CovarianceType cov : {CovarianceType::diagonal, CovarianceType::full}) {
            ClusterParams p = with(ClusterMethod::bayesian_gmm, seed);
            p.covariance = cov;
            const ClusterModel m = cluster_cohort(b.matrix, p);
            REQUIRE(!m.objective_trace.empty());
            for (std::size_t i = 1; i < m.objective_trace.size(); ++i)
                CHECK(m.objective_trace[i] - m.objective_trace[i - 1] >= -1e-8);
        }
    }
}

TEST_CASE("every cluster is nonempty") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Blobs b = blobs(seed, 12, 2, 0.5);
        ClusterParams p = with(ClusterMethod::bayesian_gmm, seed);
        p.k = 5;
        const ClusterModel m = cluster_cohort(b.matrix, p);
        for (std::size_t s : m.sizes) CHECK(s > 0);
    }
}

TEST_CASE("permuted rows give a matching partition") {
    const Blobs b = blobs(11);
    const Eigen::Index n = b.matrix.values.rows();
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
    FeatureMatrix shuffled = b.matrix;
    for (Eigen::Index i = 0; i < n; ++i) shuffled.values.row(i) = b.matrix.values.row(perm[static_cast<std::size_t>(i)]);
    for (ClusterMethod m : {ClusterMethod::kmeans, ClusterMethod::bayesian_gmm}) {
        const ClusterModel a = cluster_cohort(b.matrix, with(m));
        const ClusterModel c = cluster_cohort(shuffled, with(m));
        std::vector<int> back(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            back[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = c.assignments[static_cast<std::size_t>(i)];
        CHECK(oracle::adjusted_rand_index(a.assignments, back) >= 0.95);
    }
}

TEST_CASE("ward merge tree") {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 1.0, 10.0, 12.0;
    const auto merges = ward_linkage(x);
    REQUIRE(merges.size() == 3);
    CHECK(((merges[0].left == 0 && merges[0].right == 1) || (merges[0].left == 1 && merges[0].right == 0)));
    for (std::size_t i = 1; i < merges.size(); ++i) CHECK(merges[i].height >= merges[i - 1].height);
    CHECK(merges.back().size == 4);
    const auto two = cut_tree(merges, 4, 2);
    CHECK(two[0] == two[1]);
    CHECK(two[2] == two[3]);
    CHECK(two[0] != two[2]);
}

TEST_CASE("input errors") {
    FeatureMatrix m;
    m.values = Eigen::MatrixXd::Zero(3, 2);
    m.patient_rows = {0, 1, 2};
    CHECK_THROWS_AS(cluster_cohort(m, with(ClusterMethod::kmeans)), ValidationError);
    m.values = Eigen::MatrixXd::Random(10, 2);
    m.patient_rows.resize(10);
    m.values(3, 1) = NAN;
    CHECK_THROWS_AS(cluster_cohort(m, with(ClusterMethod::bayesian_gmm)), ValidationError);
    ClusterParams bad;
    bad.k = 1;
    CHECK_THROWS_AS(validate_cluster_params(bad), ValidationError);
    bad.k = 3;
    bad.tolerance = 0.0;
    CHECK_THROWS_AS(validate_cluster_params(bad), ValidationError);
}

TEST_CASE("ranking by summed organ mean dose") {
    // cluster of 120 Gy summed mean dose against one of 60 Gy
    Cohort c;
    c.organs = {{"A", Laterality::midline}, {"B", Laterality::midline}};
    c.time_points = {"t"};
    c.symptoms = {"s"};
    for (int i = 0; i < 20; ++i) {
        Patient p;
        p.id = "p" + std::to_string(i);
        const bool high = i % 2 == 0;
        const double jitter = 0.1 * (i % 5);
        p.dvh = {testing::flat_dvh((high ? 70.0 : 20.0) + jitter), testing::flat_dvh((high ? 50.0 : 40.0) - jitter)};
        p.symptoms = {{0}};
        c.patients.push_back(p);
    }
    const FeatureSpec spec{{"A", "B"}, 40, 55, false, false};
    const ClusterModel m = fit_ranked_model(c, spec, [] {
        ClusterParams p;
        p.k = 2;
        p.method = ClusterMethod::kmeans;
        return p;
    }());
    const ClusterRanking r = rank_clusters(m, c, spec);
    const int high_raw = m.assignments[0];
    CHECK(std::abs(r.scores[static_cast<std::size_t>(high_raw)] - 120.0) < 1e-9);
    CHECK(std::abs(r.scores[static_cast<std::size_t>(1 - high_raw)] - 60.0) < 1e-9);
    CHECK(m.ranked(0) == 1);
    CHECK(m.ranked(1) == 0);
    CHECK(r.highest_raw() == high_raw);
}

TEST_CASE("ties rank by raw index") {
    Cohort c = testing::rating_cohort({"t"}, {{0}, {0}, {0}, {0}}, {30, 30, 30, 30});
    ClusterModel m;
    m.params.k = 2;
    m.assignments = {1, 0, 1, 0};
    m.patient_rows = {0, 1, 2, 3};
    m.sizes = {2, 2};
    const ClusterRanking r = rank_clusters(m, c, {{"Tongue"}, 40, 40, false, false});
    CHECK(r.rank_order == std::vector<int>{0, 1});
}

TEST_CASE("rank-canonical assignments ignore raw labels") {
    const SyntheticCohort sc = generate_synthetic_cohort(SyntheticConfig{}, 2);
    const FeatureSpec spec{SyntheticConfig{}.planted_organs, 40, 55, false, false};
    ClusterModel m = fit_ranked_model(sc.cohort, spec, ClusterParams{});
    const std::vector<int> before = m.ranked_assignments();
    // relabel raw clusters 0<->2 and rank again
    for (int& a : m.assignments) a = 2 - a;
    std::swap(m.sizes[0], m.sizes[2]);
    m.rank_order = rank_clusters(m, sc.cohort, spec).rank_order;
    CHECK(m.ranked_assignments() == before);
}

TEST_CASE("planted dose ordering and zero separation") {
    int ordered = 0;
    double worst_null = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SyntheticConfig cfg;
        cfg.n_patients = 150;
        const SyntheticCohort sc = generate_synthetic_cohort(cfg, seed);
        const FeatureSpec spec{cfg.planted_organs, 40, 55, false, false};
        ClusterParams p;
        p.seed = seed;
        const ClusterModel m = fit_ranked_model(sc.cohort, spec, p);
        std::vector<int> truth;
        for (std::size_t r : m.patient_rows) truth.push_back(sc.truth.group[r]);
        const std::vector<int> ranked = m.ranked_assignments();
        bool order = true;
        for (int r = 0; r < 3; ++r) {
            std::vector<int> votes(3, 0);
            for (std::size_t i = 0; i < ranked.size(); ++i)
                if (ranked[i] == r) ++votes[static_cast<std::size_t>(truth[i])];
            order = order && std::max_element(votes.begin(), votes.end()) - votes.begin() == r;
        }
        ordered += order;

        cfg.group_separation = 0.0;
        const SyntheticCohort flat = generate_synthetic_cohort(cfg, seed);
        const ClusterModel n = fit_ranked_model(flat.cohort, spec, p);
        std::vector<int> flat_truth;
        for (std::size_t r : n.patient_rows) flat_truth.push_back(flat.truth.group[r]);
        worst_null = std::max(worst_null, std::abs(oracle::adjusted_rand_index(n.assignments, flat_truth)));
    }
    CHECK(ordered >= 19);
    CHECK(worst_null < 0.15);
}

}
