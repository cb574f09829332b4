#include "dass/stats.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>

#include "dass/error.hpp"

namespace dass {

void validate_outcome_spec(const OutcomeSpec& spec, const Cohort& cohort) {
    std::vector<FieldError> errors;
    if (!cohort.symptom_index(spec.symptom)) errors.push_back({"symptom", "unknown symptom '" + spec.symptom + "'"});
    if (!cohort.time_point_index(spec.time_point))
        errors.push_back({"time_point", "unknown time point '" + spec.time_point + "'"});
    if (spec.threshold < 0 || spec.threshold > 9) errors.push_back({"threshold", "must be in [0,9]"});
    if (!errors.empty()) throw ValidationError(std::move(errors));
}

BinaryOutcome binarize_outcome(const Cohort& cohort, const OutcomeSpec& spec) {
    validate_outcome_spec(spec, cohort);
    const std::size_t s = *cohort.symptom_index(spec.symptom);
    const std::size_t t = *cohort.time_point_index(spec.time_point);
    BinaryOutcome out;
    for (std::size_t p = 0; p < cohort.patients.size(); ++p) {
        const auto& r = cohort.patients[p].symptoms[s][t];
        if (!r) {
            out.excluded.push_back(p);
            continue;
        }
        out.patients.push_back(p);
        out.values.push_back(*r > spec.threshold ? 1 : 0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

double softplus(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double sigmoid(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double log_likelihood(const Eigen::VectorXd& eta, std::span<const int> y) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[static_cast<std::size_t>(i)] * eta(i) - softplus(eta(i));
    return ll;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const int> outcome) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (static_cast<std::size_t>(n) != outcome.size())
        throw ValidationError("outcome", "outcome length does not match design rows");
    if (n <= p) throw ValidationError("design", "need more rows than columns");
    std::size_t positives = 0;
    for (int v : outcome) {
        if (v != 0 && v != 1) throw ValidationError("outcome", "outcome must be 0/1");
        positives += static_cast<std::size_t>(v);
    }
    if (positives == 0 || positives == outcome.size())
        throw ValidationError("outcome", "single-class outcome: all " + std::to_string(outcome.size()) +
                                             " patients are " + (positives == 0 ? "non-severe" : "severe"));
    if (!design.allFinite()) throw ValidationError("design", "design contains non-finite values");

    // Keep columns independent of the columns kept before them.
    LogisticFit fit;
    std::vector<Eigen::Index> kept;
    {
        Eigen::MatrixXd basis(n, 0);
        for (Eigen::Index j = 0; j < p; ++j) {
            Eigen::VectorXd v = design.col(j);
            const double norm0 = v.norm();
            for (Eigen::Index b = 0; b < basis.cols(); ++b) v -= basis.col(b).dot(v) * basis.col(b);
            if (v.norm() > 1e-9 * std::max(1.0, norm0)) {
                basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
                basis.col(basis.cols() - 1) = v / v.norm();
                kept.push_back(j);
            } else {
                fit.dropped_columns.push_back(static_cast<int>(j));
            }
        }
    }
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = design.col(kept[j]);

    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = outcome[static_cast<std::size_t>(i)];

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    Eigen::VectorXd eta = x * beta;
    double ll = log_likelihood(eta, outcome);
    Eigen::VectorXd mu(n);
    for (int it = 0; it <= 100; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) mu(i) = sigmoid(eta(i));
        const Eigen::VectorXd grad = x.transpose() * (yv - mu);
        fit.gradient_norm = grad.norm();
        fit.iterations = it;
        if (fit.gradient_norm < 1e-8) {
            fit.converged = true;
            break;
        }
        if (it == 100) break;
        const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
        const Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
        Eigen::VectorXd step = h.ldlt().solve(grad);
        if (!step.allFinite()) step = grad;
        double t = 1.0;
        Eigen::VectorXd cand_beta, cand_eta;
        double cand_ll = -std::numeric_limits<double>::infinity();
        for (int halvings = 0; halvings < 40; ++halvings, t *= 0.5) {
            cand_beta = beta + t * step;
            cand_eta = x * cand_beta;
            cand_ll = log_likelihood(cand_eta, outcome);
            if (cand_ll >= ll - 1e-12 * std::abs(ll)) break;
        }
        beta = std::move(cand_beta);
        eta = std::move(cand_eta);
        ll = cand_ll;
    }

    const double max_coef = beta.size() ? beta.cwiseAbs().maxCoeff() : 0.0;
    bool collapsed = false;
    for (Eigen::Index i = 0; i < n; ++i) collapsed = collapsed || mu(i) < 1e-8 || mu(i) > 1.0 - 1e-8;
    if (max_coef > 15.0 && (!fit.converged || collapsed)) {
        fit.separated = true;
        fit.converged = false;
    }

    fit.log_likelihood = ll;
    fit.coefficients = Eigen::VectorXd::Zero(p);
    for (std::size_t j = 0; j < kept.size(); ++j) fit.coefficients(kept[j]) = beta(static_cast<Eigen::Index>(j));
    return fit;
}

double chi_square_sf(double statistic, int df) {
    if (df < 1) throw ValidationError("df", "degrees of freedom must be >= 1");
    if (!(statistic > 0.0)) return 1.0;
    if (std::isinf(statistic)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), statistic));
}

std::string_view to_string(Evidence e) {
    switch (e) {
        case Evidence::strong: return "strong";
        case Evidence::reasonable: return "reasonable";
        case Evidence::none: return "none";
    }
    return "none";
}

Evidence bic_evidence(double delta_bic) {
    if (delta_bic <= -6.0) return Evidence::strong;
    if (delta_bic <= -2.0) return Evidence::reasonable;
    return Evidence::none;
}

// ---------------------------------------------------------------------------
// Likelihood ratio tests

namespace {

struct Sample {
    std::vector<std::size_t> rows;  // model rows
    std::vector<int> y;
    std::size_t excluded = 0;
};

Sample build_sample(const Cohort& cohort, const ClusterModel& model, const OutcomeSpec& outcome) {
    const BinaryOutcome bin = binarize_outcome(cohort, outcome);
    std::vector<long> row_of(cohort.patients.size(), -1);
    for (std::size_t r = 0; r < model.patient_rows.size(); ++r)
        row_of[model.patient_rows[r]] = static_cast<long>(r);
    Sample s;
    s.excluded = bin.excluded.size();
    for (std::size_t i = 0; i < bin.patients.size(); ++i) {
        const long r = row_of[bin.patients[i]];
        if (r < 0) {
            ++s.excluded;
            continue;
        }
        s.rows.push_back(static_cast<std::size_t>(r));
        s.y.push_back(bin.values[i]);
    }
    return s;
}

std::vector<std::string> names_of(const std::vector<int>& dropped, const std::vector<std::string>& column_names) {
    std::vector<std::string> out;
    for (int d : dropped) out.push_back(column_names[static_cast<std::size_t>(d)]);
    return out;
}

void fill_comparison(ClusterTest& t, const LogisticFit& base, const LogisticFit& full, int p_base, int p_full,
                     double n) {
    const double dll = full.log_likelihood - base.log_likelihood;
    const int dp = p_full - p_base;
    const double ln_n = std::log(n);
    t.lr_statistic = 2.0 * dll;
    t.p_value = chi_square_sf(t.lr_statistic, dp);
    t.aic_base = 2.0 * p_base - 2.0 * base.log_likelihood;
    t.aic_full = 2.0 * p_full - 2.0 * full.log_likelihood;
    t.bic_base = p_base * ln_n - 2.0 * base.log_likelihood;
    t.bic_full = p_full * ln_n - 2.0 * full.log_likelihood;
    // Deltas from the parameter and likelihood differences directly, so that
    // equal-likelihood pairs give exactly dp*ln(n).
    t.delta_aic = 2.0 * dp - 2.0 * dll;
    t.delta_bic = dp * ln_n - 2.0 * dll;
    t.evidence = bic_evidence(t.delta_bic);
    t.converged = full.converged;
    t.separated = full.separated;
}

}  // namespace

LrtReport lrt_clusters(const Cohort& cohort, const ClusterModel& model, const OutcomeSpec& outcome,
                       const std::vector<std::string>& confounders, const LrtOptions& options, Execution exec) {
    validate_outcome_spec(outcome, cohort);
    std::vector<std::size_t> conf_ix;
    for (const auto& c : confounders) {
        auto ix = cohort.confounder_index(c);
        if (!ix) throw ValidationError("confounders", "unknown confounder '" + c + "'");
        conf_ix.push_back(*ix);
    }
    const Sample sample = build_sample(cohort, model, outcome);
    const auto n = static_cast<Eigen::Index>(sample.rows.size());
    const int k = model.k();

    LrtReport report;
    report.outcome = outcome;
    report.confounders = confounders;
    report.n = sample.rows.size();
    report.excluded = sample.excluded;
    report.factor = options.factor;
    for (int v : sample.y) report.severe += static_cast<std::size_t>(v);
    report.prevalence = n > 0 ? static_cast<double>(report.severe) / static_cast<double>(n) : 0.0;

    const auto p_base = static_cast<Eigen::Index>(1 + conf_ix.size());
    Eigen::MatrixXd base(n, p_base);
    std::vector<std::string> names{"intercept"};
    for (const auto& c : confounders) names.push_back(c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Patient& pt = cohort.patients[model.patient_rows[sample.rows[static_cast<std::size_t>(i)]]];
        base(i, 0) = 1.0;
        for (std::size_t j = 0; j < conf_ix.size(); ++j)
            base(i, static_cast<Eigen::Index>(j + 1)) = pt.confounders[conf_ix[j]];
    }
    std::vector<int> ranks(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        ranks[static_cast<std::size_t>(i)] = model.ranked(sample.rows[static_cast<std::size_t>(i)]);

    const LogisticFit base_fit = fit_logistic(base, sample.y);
    report.base_log_likelihood = base_fit.log_likelihood;
    report.clusters.resize(static_cast<std::size_t>(k));
    for (int r = 0; r < k; ++r) {
        ClusterTest& t = report.clusters[static_cast<std::size_t>(r)];
        t.rank = r;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (ranks[static_cast<std::size_t>(i)] != r) continue;
            ++t.size;
            t.severe += static_cast<std::size_t>(sample.y[static_cast<std::size_t>(i)]);
        }
    }
    const bool par = exec == Execution::parallel;
    const double dn = static_cast<double>(n);

    if (!options.factor) {
        auto full_names = names;
        full_names.push_back("cluster");
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
#pragma omp parallel for schedule(dynamic) if (par)
        for (int r = 0; r < k; ++r) {
            try {
                Eigen::MatrixXd full(n, p_base + 1);
                full.leftCols(p_base) = base;
                for (Eigen::Index i = 0; i < n; ++i) full(i, p_base) = ranks[static_cast<std::size_t>(i)] == r ? 1.0 : 0.0;
                const LogisticFit fit = fit_logistic(full, sample.y);
                ClusterTest& t = report.clusters[static_cast<std::size_t>(r)];
                t.coefficient = fit.coefficients(p_base);
                t.odds_ratio = std::exp(t.coefficient);
                t.dropped = names_of(fit.dropped_columns, full_names);
                fill_comparison(t, base_fit, fit, static_cast<int>(p_base), static_cast<int>(p_base + 1), dn);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        }
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
        return report;
    }

    // k-level factor, reference = rank 0.
    const Eigen::Index p_full = p_base + (k - 1);
    Eigen::MatrixXd full(n, p_full);
    full.leftCols(p_base) = base;
    for (Eigen::Index i = 0; i < n; ++i)
        for (int r = 1; r < k; ++r)
            full(i, p_base + r - 1) = ranks[static_cast<std::size_t>(i)] == r ? 1.0 : 0.0;
    auto full_names = names;
    for (int r = 1; r < k; ++r) full_names.push_back("cluster_" + std::to_string(r));
    const LogisticFit full_fit = fit_logistic(full, sample.y);
    {
        ClusterTest overall;
        fill_comparison(overall, base_fit, full_fit, static_cast<int>(p_base), static_cast<int>(p_full), dn);
        report.overall = FactorTest{overall.lr_statistic, k - 1, overall.p_value, overall.delta_aic, overall.delta_bic};
    }
    report.clusters[0].reference = true;
    report.clusters[0].aic_full = report.clusters[0].aic_base = 2.0 * p_full - 2.0 * full_fit.log_likelihood;
    report.clusters[0].bic_full = report.clusters[0].bic_base = p_full * std::log(dn) - 2.0 * full_fit.log_likelihood;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
#pragma omp parallel for schedule(dynamic) if (par)
    for (int r = 1; r < k; ++r) {
        try {
            Eigen::MatrixXd reduced(n, p_full - 1);
            Eigen::Index c = 0;
            for (Eigen::Index j = 0; j < p_full; ++j)
                if (j != p_base + r - 1) reduced.col(c++) = full.col(j);
            const LogisticFit red_fit = fit_logistic(reduced, sample.y);
            ClusterTest& t = report.clusters[static_cast<std::size_t>(r)];
            t.coefficient = full_fit.coefficients(p_base + r - 1);
            t.odds_ratio = std::exp(t.coefficient);
            t.dropped = names_of(full_fit.dropped_columns, full_names);
            fill_comparison(t, red_fit, full_fit, static_cast<int>(p_full - 1), static_cast<int>(p_full), dn);
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return report;
}

std::vector<ThresholdResult> lrt_threshold_sweep(const Cohort& cohort, const ClusterModel& model,
                                                 const OutcomeSpec& outcome, std::span<const int> thresholds,
                                                 const std::vector<std::string>& confounders,
                                                 const LrtOptions& options, Execution exec) {
    std::vector<ThresholdResult> out(thresholds.size());
    const bool par = exec == Execution::parallel;
#pragma omp parallel for schedule(dynamic) if (par)
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        ThresholdResult& res = out[i];
        res.threshold = thresholds[i];
        OutcomeSpec spec = outcome;
        spec.threshold = thresholds[i];
        try {
            res.report = lrt_clusters(cohort, model, spec, confounders, options, Execution::serial);
        } catch (const std::exception& e) {
            res.error = e.what();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Outcome grid

OutcomeGrid outcome_grid(const Cohort& cohort, const ClusterModel& model, int selected_rank,
                         const std::string& symptom, const OutcomeGridOptions& options) {
    const auto s = cohort.symptom_index(symptom);
    if (!s) throw ValidationError("symptom", "unknown symptom '" + symptom + "'");
    if (selected_rank < 0 || selected_rank >= model.k())
        throw ValidationError("selected_cluster", "must be in [0," + std::to_string(model.k()) + ")");
    if (options.date_bins < 1) throw ValidationError("date_bins", "must be >= 1");
    const auto& edges = options.rating_bin_edges;
    if (edges.empty() || edges.front() != 0) throw ValidationError("rating_bin_edges", "first edge must be 0");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] <= edges[i - 1] || edges[i] > 10)
            throw ValidationError("rating_bin_edges", "edges must increase strictly within [0,10]");

    const std::size_t T = cohort.time_points.size();
    const auto B = static_cast<std::size_t>(options.date_bins);
    const std::size_t R = edges.size();
    const auto k = static_cast<std::size_t>(model.k());

    OutcomeGrid g;
    g.symptom = symptom;
    g.selected_rank = selected_rank;
    g.date_bins.resize(B);
    std::vector<std::size_t> bin_of_tp(T);
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t lo = b * T / B, hi = (b + 1) * T / B;
        for (std::size_t t = lo; t < hi; ++t) {
            g.date_bins[b].push_back(cohort.time_points[t]);
            bin_of_tp[t] = b;
        }
    }
    for (std::size_t i = 0; i < R; ++i) {
        const int lo = edges[i];
        const int hi = i + 1 < R ? edges[i + 1] - 1 : 10;
        g.rating_bins.push_back(lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi));
    }
    auto rating_bin = [&](int rating) {
        std::size_t bin = 0;
        while (bin + 1 < R && rating >= edges[bin + 1]) ++bin;
        return bin;
    };

    std::vector<std::vector<std::size_t>> in_counts(B, std::vector<std::size_t>(R, 0)), out_counts = in_counts;
    g.in_count.assign(B, 0);
    g.out_count.assign(B, 0);
    std::vector<std::vector<double>> rating_sum(k, std::vector<double>(B, 0.0));
    std::vector<std::vector<std::size_t>> rating_n(k, std::vector<std::size_t>(B, 0));

    for (std::size_t row = 0; row < model.assignments.size(); ++row) {
        const auto rank = static_cast<std::size_t>(model.ranked(row));
        const bool in = static_cast<int>(rank) == selected_rank;
        const auto& series = cohort.patients[model.patient_rows[row]].symptoms[*s];
        std::vector<int> bin_max(B, -1);
        for (std::size_t t = 0; t < T; ++t) {
            if (!series[t]) continue;
            const std::size_t b = bin_of_tp[t];
            bin_max[b] = std::max(bin_max[b], *series[t]);
            rating_sum[rank][b] += *series[t];
            ++rating_n[rank][b];
        }
        for (std::size_t b = 0; b < B; ++b) {
            if (bin_max[b] < 0) continue;
            const std::size_t rb = rating_bin(bin_max[b]);
            if (in) {
                ++in_counts[b][rb];
                ++g.in_count[b];
            } else {
                ++out_counts[b][rb];
                ++g.out_count[b];
            }
        }
    }
    g.in_fraction.assign(B, std::vector<double>(R, 0.0));
    g.out_fraction = g.in_fraction;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t r = 0; r < R; ++r) {
            if (g.in_count[b]) g.in_fraction[b][r] = static_cast<double>(in_counts[b][r]) / static_cast<double>(g.in_count[b]);
            if (g.out_count[b])
                g.out_fraction[b][r] = static_cast<double>(out_counts[b][r]) / static_cast<double>(g.out_count[b]);
        }
    g.mean_rating.assign(k, std::vector<std::optional<double>>(B));
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t b = 0; b < B; ++b)
            if (rating_n[c][b]) g.mean_rating[c][b] = rating_sum[c][b] / static_cast<double>(rating_n[c][b]);
    return g;
}

}  // namespace dass
