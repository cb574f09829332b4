#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dass/clustering.hpp"
#include "dass/cohort.hpp"
#include "dass/execution.hpp"
#include "dass/features.hpp"
#include "dass/stats.hpp"

namespace dass {

enum class EditKind {
    add_organ,
    remove_organ,
    extend_window_low,
    shrink_window_low,
    extend_window_high,
    shrink_window_high,
};

std::string_view to_string(EditKind k);
EditKind parse_edit_kind(std::string_view s);

struct CandidateEdit {
    EditKind kind = EditKind::add_organ;
    std::optional<std::string> organ;  // set iff add/remove

    /// "add:Tongue", "extend_window_low", ...
    std::string label() const;
    bool operator==(const CandidateEdit&) const = default;
};

/// Adds in organ-list order, removes in spec order (never emptying the set),
/// then window endpoint moves that keep lo <= hi inside [5,95].
std::vector<CandidateEdit> enumerate_candidates(const FeatureSpec& spec, const std::vector<OrganId>& organs);

/// Throws ValidationError when the edit does not apply to `spec`.
FeatureSpec apply_edit(const FeatureSpec& spec, const CandidateEdit& edit);

enum class Metric { bic, aic, p };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

struct SearchRequest {
    FeatureSpec spec;
    ClusterParams params;
    OutcomeSpec outcome;
    std::vector<std::string> confounders;
    /// Rank of the tracked cluster; empty selects the highest-dose cluster.
    std::optional<int> selected_rank;
    bool standardize = true;
    Metric metric = Metric::bic;
};

struct EffectEntry {
    CandidateEdit edit;
    bool ok = false;
    std::string error;
    double delta_bic = 0.0;  // new - base, full-model BIC of the tracked cluster
    double delta_aic = 0.0;
    double delta_p = 0.0;    // p_new - p_base
    double p_value = 1.0;
    double odds_ratio = 1.0;
    std::vector<std::size_t> cluster_sizes;  // by rank
};

struct AdditiveEffectsReport {
    Metric metric = Metric::bic;
    FeatureSpec spec;
    int selected_rank = 0;
    double base_p = 1.0;
    double base_bic = 0.0;
    double base_aic = 0.0;
    double base_odds_ratio = 1.0;
    std::vector<std::size_t> base_sizes;
    std::vector<EffectEntry> entries;  // enumeration order

    /// Signed change in the metric chosen for display.
    double shown(const EffectEntry& e) const;
};

/// One forward-search round. A failing baseline throws; failing candidates
/// are recorded in their entry. Parallel and serial runs are bit-identical.
AdditiveEffectsReport evaluate_forward_search(const Cohort& cohort, const SearchRequest& request,
                                              Execution exec = Execution::parallel);

}  // namespace dass
