#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dass/clustering.hpp"
#include "dass/cohort.hpp"
#include "dass/execution.hpp"
#include "dass/features.hpp"
#include "dass/json_io.hpp"
#include "dass/rules.hpp"
#include "dass/search.hpp"
#include "dass/stats.hpp"

namespace dass {

/// Everything that determines a steering result besides the cohort. Both
/// the CLI and a service session hold one of these.
struct Analysis {
    FeatureSpec spec{{"Parotid_L", "Parotid_R"}, 40, 55, false, false};
    ClusterParams params;
    OutcomeSpec outcome;
    std::vector<std::string> confounders;
    /// Empty selects the highest-dose cluster.
    std::optional<int> selected_rank;
    bool standardize = true;
    bool factor = false;

    int selected() const { return selected_rank.value_or(params.k - 1); }
};

/// Throws ValidationError listing every inconsistency with the cohort.
void validate_analysis(const Analysis& a, const Cohort& cohort);

Json to_json(const Analysis& a);
Analysis analysis_from_json(const Json& j, const std::string& prefix = "analysis");

/// "3,4,5" -> {3,4,5}
std::vector<int> parse_int_list(std::string_view text, const std::string& field);
/// "a,b" -> {"a","b"}; empty text gives an empty list.
std::vector<std::string> parse_name_list(std::string_view text);

ClusterModel fit_model(const Cohort& cohort, const Analysis& a, Execution exec = Execution::parallel);

Json lrt_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model, const std::vector<int>& thresholds,
                  Execution exec = Execution::parallel);

AdditiveEffectsReport run_search(const Cohort& cohort, const Analysis& a, Metric metric,
                                 Execution exec = Execution::parallel);

/// "outcome", "cluster" (the selected one) or "cluster:<rank>".
RuleTarget resolve_rule_target(std::string_view text, const Cohort& cohort, const Analysis& a,
                               const ClusterModel& model);

Json rules_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model, std::string_view target,
                    bool all_features, const MinerConfig& config, Execution exec = Execution::parallel);

Json outcome_grid_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model,
                           const OutcomeGridOptions& options = {});

/// Axes: dose_pc<N>, symptom_pc<N> (1-based), col:<organ>__<feature>,
/// sym:<symptom>[@<time point>], conf:<name>.
Json scatter_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model, std::string_view x,
                      std::string_view y);

}  // namespace dass
