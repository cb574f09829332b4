#include <cmath>
#include <random>

#include "doctest.h"
#include "dass/error.hpp"
#include "dass/pipeline.hpp"
#include "dass/rules.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dass;

namespace {

RuleProblem problem_of(std::vector<std::vector<double>> columns, std::vector<int> target) {
    RuleProblem p;
    for (std::size_t j = 0; j < columns.size(); ++j)
        p.features.push_back({"O" + std::to_string(j), FeatureKey::mean(), std::move(columns[j])});
    p.target = std::move(target);
    return p;
}

double entropy_bits(const std::vector<int>& y) {
    const double p = std::count(y.begin(), y.end(), 1) / static_cast<double>(y.size());
    double h = 0.0;
    for (double q : {p, 1.0 - p})
        if (q > 0.0) h -= q * std::log2(q);
    return h;
}

MinerConfig small_config() {
    MinerConfig c;
    c.min_support = 2;
    c.thresholds_per_feature = 10;
    return c;
}

}  // namespace

TEST_SUITE("rules") {

TEST_CASE("mutual information examples") {
    CHECK(mutual_information(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(mutual_information(std::vector<int>{1, 0, 1, 0}, std::vector<int>{1, 1, 0, 0}) == doctest::Approx(0.0));
    CHECK(std::abs(mutual_information(std::vector<int>{1, 0, 0, 0}, std::vector<int>{1, 1, 0, 0}) - 0.3113) < 1e-4);
    CHECK(mutual_information(2, 0, 0, 2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(mutual_information(std::vector<int>{1, 0}, std::vector<int>{1}), ValidationError);
}

TEST_CASE("quantile grid") {
    const std::vector<double> v{5, 1, 4, 2, 3, 3, 9, 7, 8, 6};
    MinerConfig c;
    c.thresholds_per_feature = 4;
    CHECK(candidate_thresholds(v, c) == oracle::quantile_grid(v, 4));
    c.grid = ThresholdGrid::midpoints;
    const auto mid = candidate_thresholds(std::vector<double>{1, 3, 3, 6}, c);
    CHECK(mid == std::vector<double>{2.0, 4.5});
}

TEST_CASE("constant feature is fully pruned") {
    const RuleProblem p = problem_of({{4, 4, 4, 4, 4, 4, 4, 4}}, {1, 0, 1, 0, 1, 1, 0, 0});
    CHECK(enumerate_splits(p, small_config()).empty());
    const MiningResult r = mine_rules(p, small_config());
    CHECK(r.rulesets.empty());
    CHECK(!r.diagnostic.empty());
}

TEST_CASE("perfect split reaches H(target)") {
    const std::vector<int> y{0, 0, 0, 1, 1, 1, 0, 1, 0, 0};
    std::vector<double> x;
    for (int v : y) x.push_back(v ? 50.0 + x.size() : 10.0 + x.size());
    const auto splits = enumerate_splits(problem_of({x}, y), small_config());
    REQUIRE(!splits.empty());
    CHECK(std::abs(splits.front().info_gain - entropy_bits(y)) < 1e-12);
}

TEST_CASE("split scores match a brute-force oracle") {
    std::mt19937_64 rng(20);
    std::vector<std::vector<double>> cols(3);
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        for (auto& c : cols) c.push_back(std::uniform_int_distribution<int>(0, 30)(rng));
        y.push_back(cols[0].back() > 14);
    }
    y[3] = 1 - y[3];
    const RuleProblem p = problem_of(cols, y);
    MinerConfig cfg = small_config();
    cfg.min_support = 1;
    cfg.min_rule_value = 1e-9;
    cfg.direction = DirectionMode::both;
    for (const ScoredSplit& s : enumerate_splits(p, cfg)) {
        std::vector<int> mask;
        for (double v : p.features[s.feature].values) mask.push_back(s.rule.satisfied(v));
        CHECK(std::abs(s.info_gain - oracle::mutual_information_bits(mask, y)) < 1e-9);
        const auto grid = oracle::quantile_grid(p.features[s.feature].values, cfg.thresholds_per_feature);
        CHECK(std::find(grid.begin(), grid.end(), s.rule.threshold) != grid.end());
    }
}

TEST_CASE("single-class target gives a diagnostic") {
    const MiningResult r = mine_rules(problem_of({{1, 2, 3, 4, 5}}, {1, 1, 1, 1, 1}), small_config());
    CHECK(r.rulesets.empty());
    CHECK(r.diagnostic.find("class") != std::string::npos);
}

TEST_CASE("empty rule list passes everyone") {
    const RuleProblem p = problem_of({{1, 2, 3, 4}}, {1, 0, 0, 1});
    const RuleEvaluation e = evaluate_ruleset({}, p);
    CHECK(e.metrics.predicted_positives == 4);
    CHECK(e.metrics.precision == doctest::Approx(0.5));
    for (const auto& t : e.trace) CHECK(!t.has_value());
}

TEST_CASE("hand-built eight patient trace") {
    // O0 >= 5 then O1 >= 3
    const RuleProblem p = problem_of({{1, 6, 7, 8, 2, 9, 5, 3}, {4, 1, 3, 6, 5, 0, 3, 2}}, {0, 0, 1, 1, 0, 0, 1, 0});
    const std::vector<Rule> rules{{"O0", FeatureKey::mean(), 5.0, Direction::geq},
                                  {"O1", FeatureKey::mean(), 3.0, Direction::geq}};
    const RuleEvaluation e = evaluate_ruleset(rules, p);
    const std::vector<std::optional<std::size_t>> expected{0, 1, std::nullopt, std::nullopt, 0, 1, std::nullopt, 0};
    CHECK(e.trace == expected);
    CHECK(e.metrics.predicted_positives == 3);
    CHECK(e.metrics.true_positives == 3);
    CHECK(e.metrics.precision == 1.0);
    CHECK(e.metrics.recall == 1.0);
    CHECK(e.remaining == std::vector<std::size_t>{5, 3});
    REQUIRE(e.strata.size() == 3);
    CHECK(!e.strata[0].failed_rule.has_value());
    CHECK(e.strata[0].in_class == 3);
    CHECK(e.strata[1].failed_rule == 0u);
    CHECK(e.strata[1].out_class == 3);
    CHECK(e.strata[2].out_class == 2);
}

TEST_CASE("mined metrics agree with evaluation and filtering is monotone") {
    const SyntheticCohort sc = testing::small_synthetic(4, 120);
    Analysis a;
    a.spec = {{"Tongue", "Larynx"}, 40, 55, false, false};
    const ClusterModel m = fit_model(sc.cohort, a);
    for (const RuleTarget& target : {cluster_target(m, 2), outcome_target(sc.cohort, a.outcome)}) {
        const RuleProblem p = build_rule_problem(sc.cohort, target, std::nullopt);
        CHECK(p.features.size() == sc.cohort.organs.size() * FeatureKey::kCount);
        const MiningResult r = mine_rules(p, MinerConfig{});
        REQUIRE(!r.rulesets.empty());
        for (const RuleSet& rs : r.rulesets) {
            const RuleEvaluation e = evaluate_ruleset(rs.rules, p);
            CHECK(std::abs(e.metrics.info_gain - rs.metrics.info_gain) < 1e-12);
            CHECK(e.metrics.predicted_positives == rs.metrics.predicted_positives);
            CHECK(std::abs(e.metrics.f1 - rs.metrics.f1) < 1e-12);
            for (std::size_t i = 1; i < e.remaining.size(); ++i) CHECK(e.remaining[i] <= e.remaining[i - 1]);
        }
        for (std::size_t i = 1; i < r.rulesets.size(); ++i)
            CHECK(r.rulesets[i].metrics.info_gain <= r.rulesets[i - 1].metrics.info_gain);
    }
}

TEST_CASE("both directions keep each ruleset single-direction") {
    const SyntheticCohort sc = testing::small_synthetic(5, 100);
    const RuleTarget t = outcome_target(sc.cohort, OutcomeSpec{});
    MinerConfig cfg;
    cfg.direction = DirectionMode::both;
    cfg.max_rulesets_returned = 30;
    const MiningResult r = mine_rules(build_rule_problem(sc.cohort, t, std::nullopt), cfg);
    bool saw_lt = false, saw_geq = false;
    for (const RuleSet& rs : r.rulesets) {
        for (const Rule& rule : rs.rules) CHECK(rule.direction == rs.rules.front().direction);
        (rs.rules.front().direction == Direction::lt ? saw_lt : saw_geq) = true;
    }
    CHECK((saw_lt || saw_geq));
}

TEST_CASE("serial and parallel mining agree") {
    const SyntheticCohort sc = testing::small_synthetic(7, 100);
    const RuleProblem p = build_rule_problem(sc.cohort, outcome_target(sc.cohort, OutcomeSpec{}), std::nullopt);
    const MiningResult s = mine_rules(p, MinerConfig{}, Execution::serial);
    const MiningResult q = mine_rules(p, MinerConfig{}, Execution::parallel);
    REQUIRE(s.rulesets.size() == q.rulesets.size());
    for (std::size_t i = 0; i < s.rulesets.size(); ++i) {
        CHECK(s.rulesets[i].rules == q.rulesets[i].rules);
        CHECK(s.rulesets[i].metrics.info_gain == q.rulesets[i].metrics.info_gain);
    }
}

TEST_CASE("config validation and cohort-level evaluation") {
    MinerConfig c;
    c.k_beam = 0;
    CHECK_THROWS_AS(validate_miner_config(c), ValidationError);
    c = MinerConfig{};
    c.min_rule_value = 0.0;
    CHECK_THROWS_AS(validate_miner_config(c), ValidationError);
    const SyntheticCohort sc = testing::small_synthetic(1, 30);
    const RuleTarget t = outcome_target(sc.cohort, OutcomeSpec{});
    CHECK_THROWS_AS(evaluate_ruleset({{"Nope", FeatureKey::mean(), 1.0, Direction::geq}}, sc.cohort, t), ValidationError);
}

}
