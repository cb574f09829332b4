#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dass/clustering.hpp"
#include "dass/cohort.hpp"
#include "dass/execution.hpp"
#include "dass/features.hpp"
#include "dass/stats.hpp"

namespace dass {

/// I(S;Y) in bits for two binary vectors of equal length.
double mutual_information(std::span<const int> split, std::span<const int> target);
/// Same quantity from the 2x2 table: n[s][y].
double mutual_information(std::size_t n00, std::size_t n01, std::size_t n10, std::size_t n11);

enum class Direction { geq, lt };
std::string_view to_string(Direction d);  // ">=" / "<"
Direction parse_direction(std::string_view s);

enum class DirectionMode { geq, lt, both };
std::string_view to_string(DirectionMode d);
DirectionMode parse_direction_mode(std::string_view s);

enum class ThresholdGrid { quantile, midpoints };
std::string_view to_string(ThresholdGrid g);
ThresholdGrid parse_threshold_grid(std::string_view s);

/// What "informative on its own" is measured by.
enum class RuleFloor { mutual_information, precision };
std::string_view to_string(RuleFloor f);
RuleFloor parse_rule_floor(std::string_view s);

struct MinerConfig {
    int k_beam = 5;
    int max_rules = 4;
    double min_rule_value = 0.01;
    int thresholds_per_feature = 20;
    int min_support = 10;
    DirectionMode direction = DirectionMode::geq;
    int max_rulesets_returned = 10;
    ThresholdGrid grid = ThresholdGrid::quantile;
    RuleFloor floor = RuleFloor::mutual_information;

    bool operator==(const MinerConfig&) const = default;
};

void validate_miner_config(const MinerConfig& config);

struct Rule {
    std::string organ;
    FeatureKey key = FeatureKey::mean();
    double threshold = 0.0;
    Direction direction = Direction::geq;

    bool satisfied(double value) const {
        return direction == Direction::geq ? value >= threshold : value < threshold;
    }
    bool operator==(const Rule&) const = default;
};

struct RuleMetrics {
    std::size_t predicted_positives = 0;
    std::size_t true_positives = 0;
    double info_gain = 0.0;  // bits
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RuleSet {
    std::vector<Rule> rules;           // descending solo information gain
    std::vector<double> solo_info_gain;
    std::vector<std::size_t> support;  // patients satisfying each rule alone
    RuleMetrics metrics;
};

/// One dose feature of the mining problem; NaN values never satisfy a rule.
struct RuleFeature {
    std::string organ;
    FeatureKey key = FeatureKey::mean();
    std::vector<double> values;
};

struct RuleProblem {
    std::vector<RuleFeature> features;
    std::vector<int> target;  // {0,1}, aligned with feature values
};

struct ScoredSplit {
    Rule rule;
    std::size_t feature = 0;  // index into RuleProblem::features
    double info_gain = 0.0;
    double precision = 0.0;
    std::size_t support = 0;
};

/// Candidate thresholds of one feature, ascending and distinct. The quantile
/// grid takes the sorted values at floor(i*n/(m+1)), i = 1..m.
std::vector<double> candidate_thresholds(std::span<const double> values, const MinerConfig& config);

/// Every split of every feature in the requested direction(s) that passes
/// the support and informativeness floors, best first.
std::vector<ScoredSplit> enumerate_splits(const RuleProblem& problem, const MinerConfig& config);

struct MiningResult {
    std::vector<RuleSet> rulesets;
    std::string diagnostic;        // set when the list is empty
    std::size_t candidate_splits = 0;
};

/// Beam search over AND-conjunctions of splits on distinct organs sharing a
/// direction. Extensions must keep min_support patients and raise the
/// information gain of their parent. A single-class target or an empty split
/// pool gives an empty list and a diagnostic.
MiningResult mine_rules(const RuleProblem& problem, const MinerConfig& config,
                        Execution exec = Execution::parallel);

struct RuleTarget {
    std::string name;                   // "cluster:2", "outcome"
    std::vector<std::size_t> patients;  // cohort indices
    std::vector<int> values;
};

/// Membership in a rank-canonical cluster, over the clustered patients.
RuleTarget cluster_target(const ClusterModel& model, int rank);
/// Severe outcome, over patients with a rating.
RuleTarget outcome_target(const Cohort& cohort, const OutcomeSpec& outcome);

/// All organs and all 21 keys when `scope` is empty.
RuleProblem build_rule_problem(const Cohort& cohort, const RuleTarget& target,
                               const std::optional<FeatureSpec>& scope);

struct Stratum {
    std::optional<std::size_t> failed_rule;  // empty for the passing group
    std::size_t in_class = 0;
    std::size_t out_class = 0;
};

struct RuleEvaluation {
    RuleMetrics metrics;
    /// Per patient: index of the first failed rule, empty when all pass.
    std::vector<std::optional<std::size_t>> trace;
    std::vector<Stratum> strata;         // pass group first, then rule order
    std::vector<std::size_t> remaining;  // patients still passing after each rule
};

RuleEvaluation evaluate_ruleset(const std::vector<Rule>& rules, const RuleProblem& problem);
/// Throws ValidationError when a rule names an organ the cohort lacks.
RuleEvaluation evaluate_ruleset(const std::vector<Rule>& rules, const Cohort& cohort, const RuleTarget& target);

}  // namespace dass
