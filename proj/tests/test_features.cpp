#include <cmath>
#include <random>

#include "doctest.h"
#include "dass/error.hpp"
#include "dass/features.hpp"
#include "helpers.hpp"

using namespace dass;

TEST_SUITE("features") {

TEST_CASE("dimension counts") {
    const Cohort c = testing::small_synthetic(1, 20).cohort;
    CHECK(extract_feature_matrix(c, {{"Parotid_L", "Parotid_R"}, 40, 55, false, false}).cols() == 8);
    const FeatureMatrix one = extract_feature_matrix(c, {{"Tongue"}, 50, 50, true, true});
    CHECK(one.cols() == 3);
    CHECK(one.columns[0].str() == "Tongue__V50");
    CHECK(one.columns[1].str() == "Tongue__mean");
    CHECK(one.columns[2].str() == "Tongue__max");
}

TEST_CASE("column count matches the formula on random specs") {
    const Cohort c = testing::small_synthetic(1, 20).cohort;
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        FeatureSpec s;
        for (const OrganId& o : c.organs)
            if (std::bernoulli_distribution(0.5)(rng)) s.organs.push_back(o.name);
        if (s.organs.empty()) s.organs.push_back("Tongue");
        int lo = 5 * std::uniform_int_distribution<int>(1, 19)(rng);
        int hi = 5 * std::uniform_int_distribution<int>(1, 19)(rng);
        if (lo > hi) std::swap(lo, hi);
        s.window_lo = lo;
        s.window_hi = hi;
        s.include_mean = std::bernoulli_distribution(0.5)(rng);
        s.include_max = std::bernoulli_distribution(0.5)(rng);
        const auto m = extract_feature_matrix(c, s);
        const std::size_t w = static_cast<std::size_t>((hi - lo) / 5 + 1) + s.include_mean + s.include_max;
        REQUIRE(static_cast<std::size_t>(m.cols()) == s.organs.size() * w);
        REQUIRE(s.dimension() == s.organs.size() * w);
    }
}

TEST_CASE("organ-major column order") {
    const Cohort c = testing::small_synthetic(1, 10).cohort;
    const FeatureMatrix m = extract_feature_matrix(c, {{"Tongue", "Parotid_L"}, 40, 45, false, false}, false);
    REQUIRE(m.columns.size() == 4);
    CHECK(m.columns[0].str() == "Tongue__V40");
    CHECK(m.columns[1].str() == "Tongue__V45");
    CHECK(m.columns[2].str() == "Parotid_L__V40");
    CHECK(m.values(2, 3) == c.patients[2].dvh[*c.organ_index("Parotid_L")][FeatureKey::vx(45)]);
}

TEST_CASE("standardization") {
    const Cohort c = testing::small_synthetic(1, 40).cohort;
    const FeatureMatrix m = extract_feature_matrix(c, {{"Parotid_L", "Tongue"}, 20, 60, true, true});
    CHECK(m.standardized);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        CHECK(std::abs(m.values.col(j).mean()) < 1e-9);
        const double var = m.values.col(j).squaredNorm() / static_cast<double>(m.rows());
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
}

TEST_CASE("constant columns standardize to zero") {
    const Cohort c = testing::rating_cohort({"t"}, {{1}, {2}, {3}}, {20, 20, 20});
    const FeatureMatrix m = extract_feature_matrix(c, {{"Tongue"}, 40, 45, false, false});
    CHECK(m.values.isZero());
}

TEST_CASE("row permutation equivariance") {
    Cohort c = testing::small_synthetic(4, 15).cohort;
    const FeatureSpec s{{"Tongue", "Larynx"}, 30, 60, true, false};
    const FeatureMatrix a = extract_feature_matrix(c, s);
    std::reverse(c.patients.begin(), c.patients.end());
    const FeatureMatrix b = extract_feature_matrix(c, s);
    for (Eigen::Index i = 0; i < a.rows(); ++i) CHECK((a.values.row(i) - b.values.row(a.rows() - 1 - i)).norm() < 1e-12);
}

TEST_CASE("spec validation") {
    const Cohort c = testing::small_synthetic(1, 10).cohort;
    CHECK_THROWS_AS(extract_feature_matrix(c, {{"Nope"}, 40, 55, false, false}), ValidationError);
    CHECK_THROWS_AS(extract_feature_matrix(c, {{}, 40, 55, false, false}), ValidationError);
    CHECK_THROWS_AS(extract_feature_matrix(c, {{"Tongue"}, 42, 55, false, false}), ValidationError);
    CHECK_THROWS_AS(extract_feature_matrix(c, {{"Tongue"}, 60, 55, false, false}), ValidationError);
    CHECK_THROWS_AS(extract_feature_matrix(c, {{"Tongue", "Tongue"}, 40, 55, false, false}), ValidationError);
}

TEST_CASE("pca of collinear points") {
    Eigen::MatrixXd x(6, 2);
    for (int i = 0; i < 6; ++i) x.row(i) << i, 2.0 * i + 1.0;
    const PcaProjection p = project_pca(x);
    CHECK(p.explained[1] < 1e-9);
    CHECK(std::abs(p.explained[0] - 1.0) < 1e-9);
}

TEST_CASE("pca spectrum is rotation invariant") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(40, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = z(rng) * (1.0 + static_cast<double>(j));
    Eigen::MatrixXd r(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) r(i, j) = z(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(r).householderQ();
    const auto a = project_pca(x), b = project_pca(Eigen::MatrixXd(x * q));
    REQUIRE(a.explained.size() == b.explained.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.explained.size(); ++i) {
        CHECK(std::abs(a.explained[i] - b.explained[i]) < 1e-6);
        if (i) CHECK(a.explained[i] <= a.explained[i - 1]);
        total += a.explained[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("pca sign convention and bounds") {
    const Cohort c = testing::small_synthetic(2, 30).cohort;
    const FeatureMatrix m = extract_feature_matrix(c, {{"Parotid_L", "Tongue"}, 40, 55, false, false});
    const PcaProjection p = project_pca(m);
    for (int k = 0; k < 2; ++k) {
        Eigen::Index arg = 0;
        p.loadings.col(k).cwiseAbs().maxCoeff(&arg);
        CHECK(p.loadings(arg, k) > 0.0);
        CHECK(std::abs(p.loadings.col(k).norm() - 1.0) < 1e-9);
    }
    CHECK_THROWS_AS(project_pca(m, {0, 8}), ValidationError);
    CHECK_THROWS_AS(project_pca(Eigen::MatrixXd::Ones(1, 3)), ValidationError);
}

TEST_CASE("planted groups separate on the first two components") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SyntheticCohort sc = generate_synthetic_cohort(SyntheticConfig{}, seed);
        const FeatureMatrix m =
            extract_feature_matrix(sc.cohort, {SyntheticConfig{}.planted_organs, 40, 55, false, false});
        const PcaProjection p = project_pca(m);
        // mean silhouette on planted labels
        const Eigen::MatrixXd& y = p.coordinates;
        const Eigen::Index n = y.rows();
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<double> sum(3, 0.0), cnt(3, 0.0);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const auto g = static_cast<std::size_t>(sc.truth.group[static_cast<std::size_t>(j)]);
                sum[g] += (y.row(i) - y.row(j)).norm();
                cnt[g] += 1.0;
            }
            const auto own = static_cast<std::size_t>(sc.truth.group[static_cast<std::size_t>(i)]);
            const double a = sum[own] / cnt[own];
            double b = INFINITY;
            for (std::size_t g = 0; g < 3; ++g)
                if (g != own) b = std::min(b, sum[g] / cnt[g]);
            total += (b - a) / std::max(a, b);
        }
        CHECK(total / static_cast<double>(n) > 0.0);
    }
}

}
