#include "dass/search.hpp"

#include <algorithm>

#include "dass/error.hpp"

namespace dass {

std::string_view to_string(EditKind k) {
    switch (k) {
        case EditKind::add_organ: return "add_organ";
        case EditKind::remove_organ: return "remove_organ";
        case EditKind::extend_window_low: return "extend_window_low";
        case EditKind::shrink_window_low: return "shrink_window_low";
        case EditKind::extend_window_high: return "extend_window_high";
        case EditKind::shrink_window_high: return "shrink_window_high";
    }
    return "add_organ";
}

EditKind parse_edit_kind(std::string_view s) {
    for (auto k : {EditKind::add_organ, EditKind::remove_organ, EditKind::extend_window_low,
                   EditKind::shrink_window_low, EditKind::extend_window_high, EditKind::shrink_window_high})
        if (to_string(k) == s) return k;
    throw ValidationError("kind", "unknown edit kind '" + std::string(s) + "'");
}

std::string CandidateEdit::label() const {
    switch (kind) {
        case EditKind::add_organ: return "add:" + organ.value_or("");
        case EditKind::remove_organ: return "remove:" + organ.value_or("");
        default: return std::string(to_string(kind));
    }
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::bic: return "bic";
        case Metric::aic: return "aic";
        case Metric::p: return "p";
    }
    return "bic";
}

Metric parse_metric(std::string_view s) {
    if (s == "bic") return Metric::bic;
    if (s == "aic") return Metric::aic;
    if (s == "p") return Metric::p;
    throw ValidationError("metric", "metric must be bic, aic or p");
}

std::vector<CandidateEdit> enumerate_candidates(const FeatureSpec& spec, const std::vector<OrganId>& organs) {
    std::vector<CandidateEdit> out;
    for (const auto& o : organs)
        if (std::find(spec.organs.begin(), spec.organs.end(), o.name) == spec.organs.end())
            out.push_back({EditKind::add_organ, o.name});
    if (spec.organs.size() > 1)
        for (const auto& o : spec.organs) out.push_back({EditKind::remove_organ, o});
    if (spec.window_lo - 5 >= 5) out.push_back({EditKind::extend_window_low, std::nullopt});
    if (spec.window_lo + 5 <= spec.window_hi) out.push_back({EditKind::shrink_window_low, std::nullopt});
    if (spec.window_hi + 5 <= 95) out.push_back({EditKind::extend_window_high, std::nullopt});
    if (spec.window_hi - 5 >= spec.window_lo) out.push_back({EditKind::shrink_window_high, std::nullopt});
    return out;
}

FeatureSpec apply_edit(const FeatureSpec& spec, const CandidateEdit& edit) {
    FeatureSpec out = spec;
    const bool needs_organ = edit.kind == EditKind::add_organ || edit.kind == EditKind::remove_organ;
    if (needs_organ != edit.organ.has_value())
        throw ValidationError("edit", "organ must be given exactly for add/remove edits");
    switch (edit.kind) {
        case EditKind::add_organ:
            if (std::find(out.organs.begin(), out.organs.end(), *edit.organ) != out.organs.end())
                throw ValidationError("edit", "organ '" + *edit.organ + "' already in the spec");
            out.organs.push_back(*edit.organ);
            break;
        case EditKind::remove_organ: {
            auto it = std::find(out.organs.begin(), out.organs.end(), *edit.organ);
            if (it == out.organs.end()) throw ValidationError("edit", "organ '" + *edit.organ + "' not in the spec");
            out.organs.erase(it);
            break;
        }
        case EditKind::extend_window_low: out.window_lo -= 5; break;
        case EditKind::shrink_window_low: out.window_lo += 5; break;
        case EditKind::extend_window_high: out.window_hi += 5; break;
        case EditKind::shrink_window_high: out.window_hi -= 5; break;
    }
    validate_feature_spec(out);
    return out;
}

double AdditiveEffectsReport::shown(const EffectEntry& e) const {
    switch (metric) {
        case Metric::bic: return e.delta_bic;
        case Metric::aic: return e.delta_aic;
        case Metric::p: return e.delta_p;
    }
    return e.delta_bic;
}

namespace {

struct Evaluation {
    ClusterTest test;
    std::vector<std::size_t> sizes;
};

Evaluation evaluate_spec(const Cohort& cohort, const FeatureSpec& spec, const SearchRequest& req, int rank) {
    const ClusterModel model = fit_ranked_model(cohort, spec, req.params, req.standardize, Execution::serial);
    const LrtReport report = lrt_clusters(cohort, model, req.outcome, req.confounders, {}, Execution::serial);
    return {report.clusters.at(static_cast<std::size_t>(rank)), model.ranked_sizes()};
}

}  // namespace

AdditiveEffectsReport evaluate_forward_search(const Cohort& cohort, const SearchRequest& req, Execution exec) {
    validate_feature_spec(req.spec, &cohort);
    validate_cluster_params(req.params);
    validate_outcome_spec(req.outcome, cohort);
    const int rank = req.selected_rank.value_or(req.params.k - 1);
    if (rank < 0 || rank >= req.params.k)
        throw ValidationError("selected_cluster", "must be in [0," + std::to_string(req.params.k) + ")");

    AdditiveEffectsReport report;
    report.metric = req.metric;
    report.spec = req.spec;
    report.selected_rank = rank;
    const Evaluation base = evaluate_spec(cohort, req.spec, req, rank);
    report.base_p = base.test.p_value;
    report.base_bic = base.test.bic_full;
    report.base_aic = base.test.aic_full;
    report.base_odds_ratio = base.test.odds_ratio;
    report.base_sizes = base.sizes;

    const auto candidates = enumerate_candidates(req.spec, cohort.organs);
    report.entries.resize(candidates.size());
    const bool par = exec == Execution::parallel;
    const auto count = static_cast<long>(candidates.size());
#pragma omp parallel for schedule(dynamic) if (par)
    for (long i = 0; i < count; ++i) {
        EffectEntry& e = report.entries[static_cast<std::size_t>(i)];
        e.edit = candidates[static_cast<std::size_t>(i)];
        try {
            const FeatureSpec spec = apply_edit(req.spec, e.edit);
            const Evaluation ev = evaluate_spec(cohort, spec, req, rank);
            e.ok = true;
            e.delta_bic = ev.test.bic_full - base.test.bic_full;
            e.delta_aic = ev.test.aic_full - base.test.aic_full;
            e.delta_p = ev.test.p_value - base.test.p_value;
            e.p_value = ev.test.p_value;
            e.odds_ratio = ev.test.odds_ratio;
            e.cluster_sizes = ev.sizes;
        } catch (const std::exception& ex) {
            e.ok = false;
            e.error = ex.what();
        }
    }
    return report;
}

}  // namespace dass
