#include "dass/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "dass/error.hpp"
#include "text_util.hpp"

namespace dass {

namespace {

template <class F>
void collect(std::vector<FieldError>& errs, const std::string& prefix, F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        for (const auto& fe : e.fields()) {
            if (prefix.empty() || fe.field.empty()) errs.push_back({prefix.empty() ? fe.field : prefix, fe.message});
            else errs.push_back({prefix + "." + fe.field, fe.message});
        }
    }
}

}  // namespace

void validate_analysis(const Analysis& a, const Cohort& cohort) {
    std::vector<FieldError> errs;
    collect(errs, "spec", [&] { validate_feature_spec(a.spec, &cohort); });
    collect(errs, "params", [&] { validate_cluster_params(a.params); });
    collect(errs, "outcome", [&] { validate_outcome_spec(a.outcome, cohort); });
    for (std::size_t i = 0; i < a.confounders.size(); ++i)
        if (!cohort.confounder_index(a.confounders[i]))
            errs.push_back({"confounders[" + std::to_string(i) + "]", "unknown confounder '" + a.confounders[i] + "'"});
    if (a.selected_rank && (*a.selected_rank < 0 || *a.selected_rank >= a.params.k))
        errs.push_back({"selected_cluster", "must be in [0," + std::to_string(a.params.k) + ")"});
    if (!errs.empty()) throw ValidationError(std::move(errs));
}

Json to_json(const Analysis& a) {
    return Json{{"spec", to_json(a.spec)},
                {"params", to_json(a.params)},
                {"outcome", to_json(a.outcome)},
                {"confounders", a.confounders},
                {"selected_cluster", a.selected_rank ? Json(*a.selected_rank) : Json(nullptr)},
                {"standardize", a.standardize},
                {"factor", a.factor}};
}

Analysis analysis_from_json(const Json& j, const std::string& prefix) {
    if (!j.is_object()) throw ValidationError(prefix, "must be an object");
    std::vector<FieldError> errs;
    Analysis a;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const std::string field = prefix + "." + key;
        const Json& v = *it;
        if (key == "spec") collect(errs, "", [&] { a.spec = feature_spec_from_json(v, field); });
        else if (key == "params") collect(errs, "", [&] { a.params = cluster_params_from_json(v, field); });
        else if (key == "outcome") collect(errs, "", [&] { a.outcome = outcome_spec_from_json(v, field); });
        else if (key == "confounders") {
            if (v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); }))
                a.confounders = v.get<std::vector<std::string>>();
            else errs.push_back({field, "must be an array of strings"});
        } else if (key == "selected_cluster") {
            if (v.is_null()) a.selected_rank.reset();
            else if (v.is_number_integer()) a.selected_rank = v.get<int>();
            else errs.push_back({field, "must be an integer or null"});
        } else if (key == "standardize" || key == "factor") {
            if (!v.is_boolean()) errs.push_back({field, "must be true or false"});
            else (key == "factor" ? a.factor : a.standardize) = v.get<bool>();
        } else {
            errs.push_back({field, "unknown key"});
        }
    }
    if (!errs.empty()) throw ValidationError(std::move(errs));
    return a;
}

std::vector<int> parse_int_list(std::string_view text, const std::string& field) {
    std::vector<int> out;
    for (auto part : detail::split(text, ',')) {
        auto t = detail::trim(part);
        auto v = detail::parse_int(t);
        if (!v || *v < -1000000 || *v > 1000000)
            throw ValidationError(field, "'" + std::string(t) + "' is not an integer");
        out.push_back(static_cast<int>(*v));
    }
    return out;
}

std::vector<std::string> parse_name_list(std::string_view text) {
    std::vector<std::string> out;
    if (detail::trim(text).empty()) return out;
    for (auto part : detail::split(text, ',')) out.emplace_back(detail::trim(part));
    return out;
}

ClusterModel fit_model(const Cohort& cohort, const Analysis& a, Execution exec) {
    validate_analysis(a, cohort);
    return fit_ranked_model(cohort, a.spec, a.params, a.standardize, exec);
}

Json lrt_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model,
                  const std::vector<int>& thresholds, Execution exec) {
    if (thresholds.empty()) throw ValidationError("thresholds", "at least one threshold is required");
    LrtOptions opts;
    opts.factor = a.factor;
    const auto sweep = lrt_threshold_sweep(cohort, model, a.outcome, thresholds, a.confounders, opts, exec);
    Json j{{"spec", to_json(a.spec)}, {"params", to_json(a.params)}};
    j["thresholds"] = lrt_sweep_json(sweep)["thresholds"];
    return j;
}

AdditiveEffectsReport run_search(const Cohort& cohort, const Analysis& a, Metric metric, Execution exec) {
    validate_analysis(a, cohort);
    SearchRequest req;
    req.spec = a.spec;
    req.params = a.params;
    req.outcome = a.outcome;
    req.confounders = a.confounders;
    req.selected_rank = a.selected_rank;
    req.standardize = a.standardize;
    req.metric = metric;
    return evaluate_forward_search(cohort, req, exec);
}

RuleTarget resolve_rule_target(std::string_view text, const Cohort& cohort, const Analysis& a,
                               const ClusterModel& model) {
    if (text == "outcome") return outcome_target(cohort, a.outcome);
    if (text == "cluster") return cluster_target(model, a.selected());
    if (text.starts_with("cluster:")) {
        auto r = detail::parse_int(text.substr(8));
        if (!r) throw ValidationError("target", "cluster rank must be an integer");
        return cluster_target(model, static_cast<int>(*r));
    }
    throw ValidationError("target", "target must be outcome, cluster or cluster:<rank>");
}

Json rules_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model, std::string_view target,
                    bool all_features, const MinerConfig& config, Execution exec) {
    validate_miner_config(config);
    const RuleTarget t = resolve_rule_target(target, cohort, a, model);
    const RuleProblem problem = build_rule_problem(cohort, t, all_features ? std::nullopt : std::optional(a.spec));
    const MiningResult result = mine_rules(problem, config, exec);
    return mining_json(result, cohort, t, config, all_features);
}

Json outcome_grid_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model,
                           const OutcomeGridOptions& options) {
    return to_json(outcome_grid(cohort, model, a.selected(), a.outcome.symptom, options));
}

namespace {

struct Axis {
    std::vector<std::optional<double>> values;  // per model row
    std::optional<double> explained;
};

int parse_component(std::string_view s, std::string_view axis) {
    auto v = detail::parse_int(s);
    if (!v || *v < 1 || *v > 1000)
        throw ValidationError(std::string(axis), "principal component must be a positive integer");
    return static_cast<int>(*v) - 1;
}

Axis pca_axis(const Eigen::MatrixXd& m, int component) {
    const PcaProjection p = project_pca(m, {component, component});
    Axis a;
    for (Eigen::Index r = 0; r < p.coordinates.rows(); ++r) a.values.push_back(p.coordinates(r, 0));
    a.explained = p.explained.at(static_cast<std::size_t>(component));
    return a;
}

Axis build_axis(const Cohort& cohort, const Analysis& a, const ClusterModel& model, std::string_view text,
                const std::string& field) {
    const auto& rows = model.patient_rows;
    if (text.starts_with("dose_pc")) {
        const FeatureMatrix fm = extract_feature_matrix(cohort, a.spec, a.standardize);
        if (fm.patient_rows != rows) throw EngineError("feature matrix rows do not match the cluster model");
        return pca_axis(fm.values, parse_component(text.substr(7), field));
    }
    if (text.starts_with("symptom_pc")) {
        const int comp = parse_component(text.substr(10), field);
        const std::size_t tp = *cohort.time_point_index(a.outcome.time_point);
        const auto ns = static_cast<Eigen::Index>(cohort.symptoms.size());
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), ns);
        for (Eigen::Index s = 0; s < ns; ++s) {
            double sum = 0.0;
            int count = 0;
            for (auto p : rows)
                if (auto v = cohort.patients[p].symptoms[static_cast<std::size_t>(s)][tp]) {
                    sum += *v;
                    ++count;
                }
            const double mean = count > 0 ? sum / count : 0.0;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto& v = cohort.patients[rows[r]].symptoms[static_cast<std::size_t>(s)][tp];
                m(static_cast<Eigen::Index>(r), s) = v ? *v : mean;
            }
        }
        return pca_axis(m, comp);
    }
    Axis axis;
    if (text.starts_with("col:")) {
        const auto parts = detail::split(text.substr(4), std::string_view("__"));
        if (parts.size() != 2) throw ValidationError(field, "expected col:<organ>__<feature>");
        auto oi = cohort.organ_index(parts[0]);
        if (!oi) throw ValidationError(field, "unknown organ '" + std::string(parts[0]) + "'");
        FeatureKey key = FeatureKey::mean();
        try {
            key = FeatureKey::parse(parts[1]);
        } catch (const ValidationError&) {
            throw ValidationError(field, "unknown feature '" + std::string(parts[1]) + "'");
        }
        for (auto p : rows) {
            const OrganDvh& d = cohort.patients[p].dvh[*oi];
            axis.values.push_back(d.missing ? std::nullopt : std::optional(d[key]));
        }
        return axis;
    }
    if (text.starts_with("sym:")) {
        std::string_view rest = text.substr(4);
        std::string_view tp_name = a.outcome.time_point;
        if (auto at = rest.find('@'); at != std::string_view::npos) {
            tp_name = rest.substr(at + 1);
            rest = rest.substr(0, at);
        }
        auto si = cohort.symptom_index(rest);
        if (!si) throw ValidationError(field, "unknown symptom '" + std::string(rest) + "'");
        auto ti = cohort.time_point_index(tp_name);
        if (!ti) throw ValidationError(field, "unknown time point '" + std::string(tp_name) + "'");
        for (auto p : rows) {
            const auto& v = cohort.patients[p].symptoms[*si][*ti];
            axis.values.push_back(v ? std::optional<double>(*v) : std::nullopt);
        }
        return axis;
    }
    if (text.starts_with("conf:")) {
        auto ci = cohort.confounder_index(text.substr(5));
        if (!ci) throw ValidationError(field, "unknown confounder '" + std::string(text.substr(5)) + "'");
        for (auto p : rows) axis.values.push_back(cohort.patients[p].confounders[*ci]);
        return axis;
    }
    throw ValidationError(field, "axis must be dose_pc<N>, symptom_pc<N>, col:<organ>__<feature>, sym:<symptom> "
                                 "or conf:<name>");
}

}  // namespace

Json scatter_document(const Cohort& cohort, const Analysis& a, const ClusterModel& model, std::string_view x,
                      std::string_view y) {
    validate_analysis(a, cohort);
    const Axis ax = build_axis(cohort, a, model, x, "x");
    const Axis ay = build_axis(cohort, a, model, y, "y");
    const std::size_t si = *cohort.symptom_index(a.outcome.symptom);
    const std::size_t ti = *cohort.time_point_index(a.outcome.time_point);
    auto opt = [](const std::optional<double>& v) { return v && std::isfinite(*v) ? Json(*v) : Json(nullptr); };
    Json points = Json::array();
    for (std::size_t r = 0; r < model.patient_rows.size(); ++r) {
        const Patient& p = cohort.patients[model.patient_rows[r]];
        const auto& rating = p.symptoms[si][ti];
        points.push_back({{"patient", p.id},
                          {"cluster", model.ranked(r)},
                          {"x", opt(ax.values[r])},
                          {"y", opt(ay.values[r])},
                          {"rating", rating ? Json(*rating) : Json(nullptr)},
                          {"severe", rating ? Json(*rating > a.outcome.threshold) : Json(nullptr)}});
    }
    return Json{{"x", {{"axis", x}, {"explained", opt(ax.explained)}}},
                {"y", {{"axis", y}, {"explained", opt(ay.explained)}}},
                {"glyph", to_json(a.outcome)},
                {"selected_cluster", a.selected()},
                {"points", points}};
}

}  // namespace dass
