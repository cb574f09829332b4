#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dass/clustering.hpp"
#include "dass/cohort.hpp"
#include "dass/execution.hpp"

namespace dass {

/// Severe outcome: rating at `time_point` strictly above `threshold`.
struct OutcomeSpec {
    std::string symptom = "drymouth";
    std::string time_point = "6mo_post";
    int threshold = 4;

    bool operator==(const OutcomeSpec&) const = default;
};

void validate_outcome_spec(const OutcomeSpec& spec, const Cohort& cohort);

struct BinaryOutcome {
    std::vector<std::size_t> patients;  // cohort indices with a rating
    std::vector<int> values;            // aligned with patients
    std::vector<std::size_t> excluded;  // cohort indices without a rating
};

BinaryOutcome binarize_outcome(const Cohort& cohort, const OutcomeSpec& spec);

struct LogisticFit {
    Eigen::VectorXd coefficients;       // zero for dropped columns
    double log_likelihood = 0.0;
    bool converged = false;
    bool separated = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    std::vector<int> dropped_columns;   // linearly dependent on earlier columns
};

/// Logistic MLE by iteratively reweighted least squares (Newton with step
/// halving) to a gradient norm below 1e-8 or 100 iterations. Columns that are
/// linearly dependent on earlier ones are dropped and reported. Separation is
/// flagged when a coefficient exceeds 15 in magnitude while the fit has not
/// converged or fitted probabilities collapse to 0/1.
LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const int> outcome);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, int df);

enum class Evidence { none, reasonable, strong };
std::string_view to_string(Evidence e);
/// BIC reduction of at least 2 is reasonable evidence, at least 6 strong.
Evidence bic_evidence(double delta_bic);

struct ClusterTest {
    int rank = 0;
    std::size_t size = 0;         // patients of this cluster in the test sample
    std::size_t severe = 0;       // of which severe
    double coefficient = 0.0;
    double odds_ratio = 1.0;
    double lr_statistic = 0.0;
    double p_value = 1.0;
    double aic_base = 0.0, aic_full = 0.0;
    double bic_base = 0.0, bic_full = 0.0;
    double delta_aic = 0.0, delta_bic = 0.0;
    Evidence evidence = Evidence::none;
    bool converged = true;
    bool separated = false;
    bool reference = false;       // factor mode reference level
    std::vector<std::string> dropped;
};

struct LrtOptions {
    /// Single k-level factor (reference = rank 0) instead of one-vs-rest.
    bool factor = false;
};

struct FactorTest {
    double lr_statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    double delta_aic = 0.0, delta_bic = 0.0;
};

struct LrtReport {
    OutcomeSpec outcome;
    std::vector<std::string> confounders;
    std::size_t n = 0;
    std::size_t severe = 0;
    double prevalence = 0.0;
    std::size_t excluded = 0;
    double base_log_likelihood = 0.0;
    bool factor = false;
    std::vector<ClusterTest> clusters;  // by rank
    std::optional<FactorTest> overall;
};

/// Base model: intercept + confounders. Full model per rank-canonical
/// cluster: base + one-vs-rest membership indicator (df = 1).
LrtReport lrt_clusters(const Cohort& cohort, const ClusterModel& model, const OutcomeSpec& outcome,
                       const std::vector<std::string>& confounders, const LrtOptions& options = {},
                       Execution exec = Execution::parallel);

struct ThresholdResult {
    int threshold = 0;
    std::optional<LrtReport> report;
    std::string error;  // set when report is empty
};

/// One LRT per threshold, in input order. Failures stay with their threshold.
std::vector<ThresholdResult> lrt_threshold_sweep(const Cohort& cohort, const ClusterModel& model,
                                                 const OutcomeSpec& outcome, std::span<const int> thresholds,
                                                 const std::vector<std::string>& confounders,
                                                 const LrtOptions& options = {},
                                                 Execution exec = Execution::parallel);

struct OutcomeGridOptions {
    int date_bins = 5;
    /// Lower edge of each rating bin; bin i covers [edge_i, edge_{i+1}-1],
    /// the last one runs to 10.
    std::vector<int> rating_bin_edges{0, 2, 4, 6, 8};
};

struct OutcomeGrid {
    std::string symptom;
    int selected_rank = 0;
    std::vector<std::vector<std::string>> date_bins;   // time points per bin
    std::vector<std::string> rating_bins;              // "0-1", ...
    std::vector<std::vector<double>> in_fraction;      // [date][rating]
    std::vector<std::vector<double>> out_fraction;
    std::vector<std::size_t> in_count;                 // patients with data per date bin
    std::vector<std::size_t> out_count;
    std::vector<std::vector<std::optional<double>>> mean_rating;  // [rank][date]
};

/// Per patient and date bin the highest rating counts; fractions are split
/// by membership in the selected rank cluster.
OutcomeGrid outcome_grid(const Cohort& cohort, const ClusterModel& model, int selected_rank,
                         const std::string& symptom, const OutcomeGridOptions& options = {});

}  // namespace dass
