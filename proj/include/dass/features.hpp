#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dass/cohort.hpp"

namespace dass {

/// The clustering space: an organ subset and a contiguous VX window,
/// optionally extended with the mean and max dose.
struct FeatureSpec {
    std::vector<std::string> organs;
    int window_lo = 40;
    int window_hi = 55;
    bool include_mean = false;
    bool include_max = false;

    /// Feature keys per organ, ascending.
    std::vector<FeatureKey> keys() const;
    std::size_t window_size() const;
    std::size_t dimension() const { return organs.size() * window_size(); }

    bool operator==(const FeatureSpec&) const = default;
};

/// Throws ValidationError on an empty or duplicated organ set or a window
/// that is off the 5-step grid. With a cohort, also checks organ names.
void validate_feature_spec(const FeatureSpec& spec, const Cohort* cohort = nullptr);

struct ColumnLabel {
    std::string organ;
    FeatureKey key;

    std::string str() const { return organ + "__" + key.str(); }
};

struct FeatureMatrix {
    Eigen::MatrixXd values;                 // n x d, organ-major columns
    std::vector<ColumnLabel> columns;
    std::vector<std::size_t> patient_rows;  // cohort patient index of each row
    bool standardized = false;
    Eigen::VectorXd column_means;           // set when standardized
    Eigen::VectorXd column_stds;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

/// Patients with any spec organ flagged missing are left out; their
/// absence shows up in `patient_rows`. Constant columns standardize to 0.
FeatureMatrix extract_feature_matrix(const Cohort& cohort, const FeatureSpec& spec, bool standardize = true);

std::string feature_matrix_to_csv(const FeatureMatrix& matrix, const Cohort& cohort);

struct PcaProjection {
    std::array<int, 2> components{0, 1};
    Eigen::MatrixXd coordinates;    // n x 2
    Eigen::MatrixXd loadings;       // d x 2, unit columns
    std::vector<double> explained;  // every component, descending, sums to 1
};

/// Eigendecomposition of the column-centered covariance. Each component's
/// sign is fixed so that its largest-magnitude loading is positive.
PcaProjection project_pca(const Eigen::MatrixXd& values, std::array<int, 2> components = {0, 1});
inline PcaProjection project_pca(const FeatureMatrix& matrix, std::array<int, 2> components = {0, 1}) {
    return project_pca(matrix.values, components);
}

}  // namespace dass
