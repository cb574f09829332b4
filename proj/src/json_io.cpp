#include "dass/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include "dass/error.hpp"
#include "text_util.hpp"

namespace dass {

using detail::format_double;

std::string render(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json(std::string_view text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(what, std::string("invalid JSON: ") + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return ss.str();
}

Json read_json_file(const std::filesystem::path& path) { return parse_json(read_text_file(path), path.string()); }

void write_text_file_atomic(const std::filesystem::path& path, std::string_view text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("cannot write " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot write " + path.string());
    }
}

namespace {

/// Typed access to one JSON object, collecting field errors.
class Reader {
public:
    Reader(const Json& j, std::string prefix, std::vector<FieldError>& errs)
        : j_(j), prefix_(std::move(prefix)), errs_(errs) {
        if (!j.is_object()) {
            fail(prefix_, "must be an object");
            ok_ = false;
        }
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
    void fail(const std::string& field, const std::string& msg) { errs_.push_back({field, msg}); }

    const Json* find(const std::string& key) {
        if (!ok_) return nullptr;
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void integer(const std::string& key, int& out) {
        if (auto* v = find(key)) {
            if (v->is_number_integer()) out = v->get<int>();
            else fail(path(key), "must be an integer");
        }
    }
    void u64(const std::string& key, std::uint64_t& out) {
        if (auto* v = find(key)) {
            if (v->is_number_unsigned()) out = v->get<std::uint64_t>();
            else fail(path(key), "must be a non-negative integer");
        }
    }
    void size(const std::string& key, std::size_t& out) {
        std::uint64_t v = out;
        u64(key, v);
        out = static_cast<std::size_t>(v);
    }
    void number(const std::string& key, double& out) {
        if (auto* v = find(key)) {
            if (v->is_number()) out = v->get<double>();
            else fail(path(key), "must be a number");
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (auto* v = find(key)) {
            if (v->is_boolean()) out = v->get<bool>();
            else fail(path(key), "must be true or false");
        }
    }
    void string(const std::string& key, std::string& out) {
        if (auto* v = find(key)) {
            if (v->is_string()) out = v->get<std::string>();
            else fail(path(key), "must be a string");
        }
    }
    void strings(const std::string& key, std::vector<std::string>& out) {
        if (auto* v = find(key)) {
            if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const Json& e) { return e.is_string(); }))
                fail(path(key), "must be an array of strings");
            else out = v->get<std::vector<std::string>>();
        }
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (auto* v = find(key)) {
            if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const Json& e) { return e.is_number(); }))
                fail(path(key), "must be an array of numbers");
            else out = v->get<std::vector<double>>();
        }
    }
    /// String member parsed by `parse`, which throws ValidationError.
    template <class T, class Parse>
    void choice(const std::string& key, T& out, Parse parse) {
        std::string s;
        if (auto* v = find(key)) {
            if (!v->is_string()) {
                fail(path(key), "must be a string");
                return;
            }
            try {
                out = parse(v->get<std::string>());
            } catch (const ValidationError& e) {
                fail(path(key), e.fields().empty() ? e.what() : e.fields().front().message);
            }
        }
    }

    void finish() {
        if (!ok_) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(path(it.key()), "unknown key");
    }

private:
    const Json& j_;
    std::string prefix_;
    std::vector<FieldError>& errs_;
    std::set<std::string> seen_;
    bool ok_ = true;
};

void throw_if(std::vector<FieldError>& errs) {
    if (!errs.empty()) throw ValidationError(std::move(errs));
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json to_json(const FeatureSpec& s) {
    return Json{{"organs", s.organs},
                {"window", {{"lo", s.window_lo}, {"hi", s.window_hi}}},
                {"include_mean", s.include_mean},
                {"include_max", s.include_max}};
}

FeatureSpec feature_spec_from_json(const Json& j, const std::string& prefix) {
    std::vector<FieldError> errs;
    FeatureSpec s;
    Reader r(j, prefix, errs);
    r.strings("organs", s.organs);
    if (auto* w = r.find("window")) {
        Reader wr(*w, r.path("window"), errs);
        wr.integer("lo", s.window_lo);
        wr.integer("hi", s.window_hi);
        wr.finish();
    }
    r.boolean("include_mean", s.include_mean);
    r.boolean("include_max", s.include_max);
    r.finish();
    throw_if(errs);
    return s;
}

Json to_json(const ClusterParams& p) {
    return Json{{"method", to_string(p.method)},
                {"k", p.k},
                {"seed", p.seed},
                {"covariance", to_string(p.covariance)},
                {"weight_concentration", p.weight_concentration},
                {"max_iterations", p.max_iterations},
                {"tolerance", p.tolerance},
                {"restarts", p.restarts}};
}

ClusterParams cluster_params_from_json(const Json& j, const std::string& prefix) {
    std::vector<FieldError> errs;
    ClusterParams p;
    Reader r(j, prefix, errs);
    r.choice("method", p.method, parse_cluster_method);
    r.integer("k", p.k);
    r.u64("seed", p.seed);
    r.choice("covariance", p.covariance, parse_covariance_type);
    r.number("weight_concentration", p.weight_concentration);
    r.integer("max_iterations", p.max_iterations);
    r.number("tolerance", p.tolerance);
    r.integer("restarts", p.restarts);
    r.finish();
    throw_if(errs);
    return p;
}

Json to_json(const OutcomeSpec& o) {
    return Json{{"symptom", o.symptom}, {"time_point", o.time_point}, {"threshold", o.threshold}};
}

OutcomeSpec outcome_spec_from_json(const Json& j, const std::string& prefix) {
    std::vector<FieldError> errs;
    OutcomeSpec o;
    Reader r(j, prefix, errs);
    r.string("symptom", o.symptom);
    r.string("time_point", o.time_point);
    r.integer("threshold", o.threshold);
    r.finish();
    throw_if(errs);
    return o;
}

Json to_json(const MinerConfig& c) {
    return Json{{"k_beam", c.k_beam},
                {"max_rules", c.max_rules},
                {"min_rule_value", c.min_rule_value},
                {"thresholds_per_feature", c.thresholds_per_feature},
                {"min_support", c.min_support},
                {"direction", to_string(c.direction)},
                {"max_rulesets_returned", c.max_rulesets_returned},
                {"grid", to_string(c.grid)},
                {"floor", to_string(c.floor)}};
}

MinerConfig miner_config_from_json(const Json& j, const std::string& prefix) {
    std::vector<FieldError> errs;
    MinerConfig c;
    Reader r(j, prefix, errs);
    r.integer("k_beam", c.k_beam);
    r.integer("max_rules", c.max_rules);
    r.number("min_rule_value", c.min_rule_value);
    r.integer("thresholds_per_feature", c.thresholds_per_feature);
    r.integer("min_support", c.min_support);
    r.choice("direction", c.direction, parse_direction_mode);
    r.integer("max_rulesets_returned", c.max_rulesets_returned);
    r.choice("grid", c.grid, parse_threshold_grid);
    r.choice("floor", c.floor, parse_rule_floor);
    r.finish();
    throw_if(errs);
    return c;
}

Json to_json(const SyntheticConfig& c) {
    Json weights = Json::object();
    for (const auto& [organ, w] : c.outcome.organ_weights) weights[organ] = w;
    Json confounders = Json::array();
    for (const auto& cf : c.confounders)
        confounders.push_back({{"name", cf.name}, {"prevalence", cf.prevalence}, {"log_odds", cf.log_odds}});
    return Json{{"n_patients", c.n_patients},
                {"organs", c.organs},
                {"n_groups", c.n_groups},
                {"group_proportions", c.group_proportions},
                {"baseline_dose_gy", c.baseline_dose_gy},
                {"dose_spread_gy", c.dose_spread_gy},
                {"group_separation", c.group_separation},
                {"background_spread_gy", c.background_spread_gy},
                {"planted_organs", c.planted_organs},
                {"group_organ_means", c.group_organ_means},
                {"voxels_per_organ", c.voxels_per_organ},
                {"voxel_heterogeneity_gy", c.voxel_heterogeneity_gy},
                {"max_dose_gy", c.max_dose_gy},
                {"time_points", c.time_points},
                {"symptoms", c.symptoms},
                {"outcome",
                 {{"symptom", c.outcome.symptom},
                  {"time_point", c.outcome.time_point},
                  {"threshold", c.outcome.threshold},
                  {"organ_weights", weights},
                  {"intercept", c.outcome.intercept}}},
                {"confounders", confounders},
                {"missing_rating_rate", c.missing_rating_rate}};
}

SyntheticConfig synthetic_config_from_json(const Json& j, const std::string& prefix) {
    std::vector<FieldError> errs;
    SyntheticConfig c;
    Reader r(j, prefix, errs);
    r.size("n_patients", c.n_patients);
    r.strings("organs", c.organs);
    r.integer("n_groups", c.n_groups);
    r.numbers("group_proportions", c.group_proportions);
    r.number("baseline_dose_gy", c.baseline_dose_gy);
    r.number("dose_spread_gy", c.dose_spread_gy);
    r.number("group_separation", c.group_separation);
    r.number("background_spread_gy", c.background_spread_gy);
    r.strings("planted_organs", c.planted_organs);
    if (auto* v = r.find("group_organ_means")) {
        try {
            c.group_organ_means = v->get<std::vector<std::vector<double>>>();
        } catch (const nlohmann::json::exception&) {
            r.fail(r.path("group_organ_means"), "must be an array of number arrays");
        }
    }
    r.integer("voxels_per_organ", c.voxels_per_organ);
    r.number("voxel_heterogeneity_gy", c.voxel_heterogeneity_gy);
    r.number("max_dose_gy", c.max_dose_gy);
    r.strings("time_points", c.time_points);
    r.strings("symptoms", c.symptoms);
    if (auto* v = r.find("outcome")) {
        Reader o(*v, r.path("outcome"), errs);
        o.string("symptom", c.outcome.symptom);
        o.string("time_point", c.outcome.time_point);
        o.integer("threshold", c.outcome.threshold);
        if (auto* w = o.find("organ_weights")) {
            if (!w->is_object()) {
                o.fail(o.path("organ_weights"), "must be an object of numbers");
            } else {
                c.outcome.organ_weights.clear();
                for (auto it = w->begin(); it != w->end(); ++it) {
                    if (it->is_number()) c.outcome.organ_weights[it.key()] = it->get<double>();
                    else o.fail(o.path("organ_weights." + it.key()), "must be a number");
                }
            }
        }
        o.number("intercept", c.outcome.intercept);
        o.finish();
    }
    if (auto* v = r.find("confounders")) {
        if (!v->is_array()) {
            r.fail(r.path("confounders"), "must be an array");
        } else {
            c.confounders.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                ConfounderSpec cf;
                Reader cr((*v)[i], r.path("confounders[" + std::to_string(i) + "]"), errs);
                cr.string("name", cf.name);
                cr.number("prevalence", cf.prevalence);
                cr.number("log_odds", cf.log_odds);
                cr.finish();
                c.confounders.push_back(cf);
            }
        }
    }
    r.number("missing_rating_rate", c.missing_rating_rate);
    r.finish();
    throw_if(errs);
    return c;
}

namespace {

Json ranked_sizes_json(const ClusterModel& model) { return Json(model.ranked_sizes()); }

Json assignments_json(const Cohort& cohort, const ClusterModel& model) {
    Json a = Json::array();
    for (std::size_t row = 0; row < model.patient_rows.size(); ++row)
        a.push_back({{"patient", cohort.patients[model.patient_rows[row]].id}, {"cluster", model.ranked(row)}});
    return a;
}

Json unclustered_json(const Cohort& cohort, const ClusterModel& model) {
    std::vector<bool> in(cohort.patients.size(), false);
    for (auto p : model.patient_rows) in[p] = true;
    Json out = Json::array();
    for (std::size_t p = 0; p < in.size(); ++p)
        if (!in[p]) out.push_back(cohort.patients[p].id);
    return out;
}

/// Per rank: the cohort patients in that cluster.
std::vector<std::vector<std::size_t>> members_by_rank(const ClusterModel& model) {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(model.k()));
    for (std::size_t row = 0; row < model.patient_rows.size(); ++row)
        out[static_cast<std::size_t>(model.ranked(row))].push_back(model.patient_rows[row]);
    return out;
}

}  // namespace

Json cluster_model_json(const Cohort& cohort, const FeatureSpec& spec, const ClusterModel& model) {
    const ClusterRanking ranking = rank_clusters(model, cohort, spec);
    std::vector<double> scores(static_cast<std::size_t>(model.k()));
    for (std::size_t raw = 0; raw < scores.size(); ++raw)
        scores[static_cast<std::size_t>(model.rank_order[raw])] = ranking.scores[raw];
    Json fit = {{"inertia", model.inertia}};
    if (model.params.method == ClusterMethod::bayesian_gmm) {
        Json weights = Json::array();
        std::vector<double> w(static_cast<std::size_t>(model.k()));
        for (std::size_t raw = 0; raw < w.size(); ++raw)
            w[static_cast<std::size_t>(model.rank_order[raw])] = model.weights(static_cast<Eigen::Index>(raw));
        fit = {{"log_likelihood", model.log_likelihood},
               {"objective", model.objective},
               {"em_iterations", model.em_iterations},
               {"em_restarts", model.em_restarts},
               {"reseeds", model.reseeds},
               {"weights", w}};
    }
    return Json{{"spec", to_json(spec)},
                {"params", to_json(model.params)},
                {"k", model.k()},
                {"sizes", ranked_sizes_json(model)},
                {"dose_scores", scores},
                {"fit", fit},
                {"assignments", assignments_json(cohort, model)},
                {"unclustered", unclustered_json(cohort, model)}};
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::nan("");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Json cluster_view_json(const Cohort& cohort, const FeatureSpec& spec, const ClusterModel& model,
                       const ClusterViewOptions& options) {
    for (double q : options.quantiles)
        if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantiles", "quantiles must lie in [0,1]");
    const FeatureKey feature = options.feature.value_or(FeatureKey::vx(spec.window_hi));
    const auto members = members_by_rank(model);

    auto summarize = [&](std::size_t organ, FeatureKey key, const std::vector<std::size_t>& patients) {
        std::vector<double> v;
        for (auto p : patients) {
            const OrganDvh& d = cohort.patients[p].dvh[organ];
            if (!d.missing) v.push_back(d[key]);
        }
        std::sort(v.begin(), v.end());
        Json q = Json::array();
        for (double level : options.quantiles) q.push_back(number_or_null(quantile_sorted(v, level)));
        return q;
    };

    Json dose = Json::object();
    Json curves = Json::object();
    for (std::size_t o = 0; o < cohort.organs.size(); ++o) {
        Json per_rank = Json::array();
        Json curve_rank = Json::array();
        for (const auto& m : members) {
            per_rank.push_back(summarize(o, feature, m));
            Json curve = Json::array();
            for (int x = 5; x <= 95; x += 5) curve.push_back(summarize(o, FeatureKey::vx(x), m));
            curve_rank.push_back(curve);
        }
        dose[cohort.organs[o].name] = per_rank;
        curves[cohort.organs[o].name] = curve_rank;
    }
    Json j = cluster_model_json(cohort, spec, model);
    j["feature"] = feature.str();
    j["quantile_levels"] = options.quantiles;
    j["dose_quantiles"] = dose;
    j["dvh_quantiles"] = curves;
    return j;
}

Json to_json(const LrtReport& r) {
    Json clusters = Json::array();
    for (const auto& c : r.clusters) {
        clusters.push_back({{"rank", c.rank},
                            {"size", c.size},
                            {"severe", c.severe},
                            {"reference", c.reference},
                            {"coefficient", number_or_null(c.coefficient)},
                            {"odds_ratio", number_or_null(c.odds_ratio)},
                            {"lr_statistic", number_or_null(c.lr_statistic)},
                            {"p_value", number_or_null(c.p_value)},
                            {"aic_base", c.aic_base},
                            {"aic_full", c.aic_full},
                            {"bic_base", c.bic_base},
                            {"bic_full", c.bic_full},
                            {"delta_aic", c.delta_aic},
                            {"delta_bic", c.delta_bic},
                            {"evidence", to_string(c.evidence)},
                            {"converged", c.converged},
                            {"separated", c.separated},
                            {"dropped", c.dropped}});
    }
    Json j{{"outcome", to_json(r.outcome)},
           {"confounders", r.confounders},
           {"n", r.n},
           {"severe", r.severe},
           {"prevalence", r.prevalence},
           {"excluded", r.excluded},
           {"base_log_likelihood", r.base_log_likelihood},
           {"mode", r.factor ? "factor" : "one_vs_rest"},
           {"clusters", clusters}};
    if (r.overall)
        j["overall"] = {{"lr_statistic", r.overall->lr_statistic},
                        {"df", r.overall->df},
                        {"p_value", r.overall->p_value},
                        {"delta_aic", r.overall->delta_aic},
                        {"delta_bic", r.overall->delta_bic}};
    return j;
}

Json lrt_sweep_json(const std::vector<ThresholdResult>& sweep) {
    Json out = Json::array();
    for (const auto& t : sweep) {
        Json e{{"threshold", t.threshold}};
        if (t.report) e["report"] = to_json(*t.report);
        else e["error"] = t.error;
        out.push_back(e);
    }
    return Json{{"thresholds", out}};
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

}  // namespace

std::string lrt_sweep_csv(const std::vector<ThresholdResult>& sweep) {
    std::string out =
        "threshold,rank,size,severe,coefficient,odds_ratio,lr_statistic,p_value,aic_base,aic_full,bic_base,bic_full,"
        "delta_aic,delta_bic,evidence,converged,separated,error\n";
    for (const auto& t : sweep) {
        if (!t.report) {
            out += std::to_string(t.threshold) + ",,,,,,,,,,,,,,,,," + csv_field(t.error) + "\n";
            continue;
        }
        for (const auto& c : t.report->clusters) {
            out += std::to_string(t.threshold) + "," + std::to_string(c.rank) + "," + std::to_string(c.size) + "," +
                   std::to_string(c.severe) + "," + csv_num(c.coefficient) + "," + csv_num(c.odds_ratio) + "," +
                   csv_num(c.lr_statistic) + "," + csv_num(c.p_value) + "," + csv_num(c.aic_base) + "," +
                   csv_num(c.aic_full) + "," + csv_num(c.bic_base) + "," + csv_num(c.bic_full) + "," +
                   csv_num(c.delta_aic) + "," + csv_num(c.delta_bic) + "," + std::string(to_string(c.evidence)) +
                   "," + (c.converged ? "true" : "false") + "," + (c.separated ? "true" : "false") + ",\n";
        }
    }
    return out;
}

Json to_json(const AdditiveEffectsReport& r) {
    Json entries = Json::array();
    for (const auto& e : r.entries) {
        Json j{{"edit", e.edit.label()},
               {"kind", to_string(e.edit.kind)},
               {"organ", e.edit.organ ? Json(*e.edit.organ) : Json(nullptr)},
               {"ok", e.ok}};
        if (e.ok) {
            j["delta"] = number_or_null(r.shown(e));
            j["delta_bic"] = e.delta_bic;
            j["delta_aic"] = e.delta_aic;
            j["delta_p"] = number_or_null(e.delta_p);
            j["p_value"] = number_or_null(e.p_value);
            j["odds_ratio"] = number_or_null(e.odds_ratio);
            j["sizes"] = e.cluster_sizes;
        } else {
            j["error"] = e.error;
        }
        entries.push_back(j);
    }
    return Json{{"metric", to_string(r.metric)},
                {"spec", to_json(r.spec)},
                {"selected_cluster", r.selected_rank},
                {"base",
                 {{"p_value", number_or_null(r.base_p)},
                  {"bic", r.base_bic},
                  {"aic", r.base_aic},
                  {"odds_ratio", number_or_null(r.base_odds_ratio)},
                  {"sizes", r.base_sizes}}},
                {"entries", entries}};
}

std::string effects_csv(const AdditiveEffectsReport& r) {
    std::string out = "edit,kind,organ,ok,delta,delta_bic,delta_aic,delta_p,p_value,odds_ratio,sizes,error\n";
    for (const auto& e : r.entries) {
        std::string sizes;
        for (std::size_t i = 0; i < e.cluster_sizes.size(); ++i)
            sizes += (i ? ";" : "") + std::to_string(e.cluster_sizes[i]);
        out += csv_field(e.edit.label()) + "," + std::string(to_string(e.edit.kind)) + "," +
               csv_field(e.edit.organ.value_or("")) + "," + (e.ok ? "true" : "false") + ",";
        if (e.ok)
            out += csv_num(r.shown(e)) + "," + csv_num(e.delta_bic) + "," + csv_num(e.delta_aic) + "," +
                   csv_num(e.delta_p) + "," + csv_num(e.p_value) + "," + csv_num(e.odds_ratio) + "," + sizes + ",\n";
        else
            out += ",,,,,,," + csv_field(e.error) + "\n";
    }
    return out;
}

Json to_json(const OutcomeGrid& g) {
    Json mean = Json::array();
    for (const auto& rank : g.mean_rating) {
        Json row = Json::array();
        for (const auto& v : rank) row.push_back(v ? Json(*v) : Json(nullptr));
        mean.push_back(row);
    }
    return Json{{"symptom", g.symptom},
                {"selected_cluster", g.selected_rank},
                {"date_bins", g.date_bins},
                {"rating_bins", g.rating_bins},
                {"in_fraction", g.in_fraction},
                {"out_fraction", g.out_fraction},
                {"in_count", g.in_count},
                {"out_count", g.out_count},
                {"mean_rating", mean}};
}

Json to_json(const Rule& r) {
    return Json{{"organ", r.organ}, {"feature", r.key.str()}, {"op", to_string(r.direction)}, {"threshold", r.threshold}};
}

Rule rule_from_json(const Json& j, const std::string& prefix) {
    std::vector<FieldError> errs;
    Rule r;
    Reader rd(j, prefix, errs);
    rd.string("organ", r.organ);
    rd.choice("feature", r.key, FeatureKey::parse);
    rd.choice("op", r.direction, parse_direction);
    rd.number("threshold", r.threshold);
    rd.finish();
    throw_if(errs);
    return r;
}

Json to_json(const RuleMetrics& m) {
    return Json{{"predicted_positives", m.predicted_positives},
                {"true_positives", m.true_positives},
                {"info_gain", m.info_gain},
                {"precision", m.precision},
                {"recall", m.recall},
                {"f1", m.f1}};
}

Json rule_evaluation_json(const RuleEvaluation& ev, const Cohort& cohort, const RuleTarget& target) {
    Json trace = Json::array();
    for (std::size_t i = 0; i < ev.trace.size(); ++i)
        trace.push_back({{"patient", cohort.patients[target.patients[i]].id},
                         {"in_class", target.values[i] != 0},
                         {"failed_rule", ev.trace[i] ? Json(*ev.trace[i]) : Json("pass")}});
    Json strata = Json::array();
    for (const auto& s : ev.strata)
        strata.push_back({{"failed_rule", s.failed_rule ? Json(*s.failed_rule) : Json("pass")},
                          {"in_class", s.in_class},
                          {"out_class", s.out_class}});
    return Json{{"metrics", to_json(ev.metrics)}, {"remaining", ev.remaining}, {"strata", strata}, {"trace", trace}};
}

Json mining_json(const MiningResult& result, const Cohort& cohort, const RuleTarget& target,
                 const MinerConfig& config, bool all_features) {
    Json sets = Json::array();
    for (const auto& rs : result.rulesets) {
        Json rules = Json::array();
        for (std::size_t i = 0; i < rs.rules.size(); ++i) {
            Json r = to_json(rs.rules[i]);
            r["solo_info_gain"] = rs.solo_info_gain[i];
            r["support"] = rs.support[i];
            rules.push_back(r);
        }
        const RuleEvaluation ev = evaluate_ruleset(rs.rules, cohort, target);
        Json e = rule_evaluation_json(ev, cohort, target);
        sets.push_back({{"rules", rules},
                        {"metrics", to_json(rs.metrics)},
                        {"remaining", e["remaining"]},
                        {"strata", e["strata"]},
                        {"trace", e["trace"]}});
    }
    std::size_t positives = 0;
    for (int v : target.values) positives += v != 0;
    return Json{{"target", target.name},
                {"scope", all_features ? "all" : "spec"},
                {"miner", to_json(config)},
                {"n", target.values.size()},
                {"positives", positives},
                {"candidate_splits", result.candidate_splits},
                {"diagnostic", result.diagnostic.empty() ? Json(nullptr) : Json(result.diagnostic)},
                {"rulesets", sets}};
}

Json patient_json(const Cohort& cohort, std::size_t p) {
    const Patient& pt = cohort.patients.at(p);
    Json dose = Json::object();
    for (std::size_t o = 0; o < cohort.organs.size(); ++o) {
        const OrganDvh& d = pt.dvh[o];
        if (d.missing) {
            dose[cohort.organs[o].name] = nullptr;
            continue;
        }
        Json feats = Json::object();
        for (FeatureKey k : FeatureKey::all()) feats[k.str()] = d[k];
        dose[cohort.organs[o].name] = feats;
    }
    Json symptoms = Json::object();
    for (std::size_t s = 0; s < cohort.symptoms.size(); ++s) {
        Json series = Json::array();
        for (const auto& v : pt.symptoms[s]) series.push_back(v ? Json(*v) : Json(nullptr));
        symptoms[cohort.symptoms[s]] = series;
    }
    Json conf = Json::object();
    for (std::size_t c = 0; c < cohort.confounders.size(); ++c) conf[cohort.confounders[c]] = pt.confounders[c];
    return Json{{"id", pt.id},
                {"time_points", cohort.time_points},
                {"dose", dose},
                {"symptoms", symptoms},
                {"confounders", conf}};
}

}  // namespace dass
