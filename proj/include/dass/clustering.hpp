#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dass/cohort.hpp"
#include "dass/execution.hpp"
#include "dass/features.hpp"

namespace dass {

enum class ClusterMethod { kmeans, ward_hierarchical, bayesian_gmm };
enum class CovarianceType { diagonal, full };

std::string_view to_string(ClusterMethod m);
ClusterMethod parse_cluster_method(std::string_view s);
std::string_view to_string(CovarianceType c);
CovarianceType parse_covariance_type(std::string_view s);

struct ClusterParams {
    ClusterMethod method = ClusterMethod::bayesian_gmm;
    int k = 3;
    std::uint64_t seed = 0;
    // Gaussian mixture
    CovarianceType covariance = CovarianceType::diagonal;
    /// Dirichlet concentration on the mixture weights; <= 0 means 1/k.
    double weight_concentration = 0.0;
    int max_iterations = 200;
    /// Convergence threshold on the per-row change of the penalized log-likelihood.
    double tolerance = 1e-5;
    // k-means (also the mixture initializer)
    int restarts = 10;

    double concentration() const { return weight_concentration > 0.0 ? weight_concentration : 1.0 / k; }
    bool operator==(const ClusterParams&) const = default;
};

void validate_cluster_params(const ClusterParams& params);

/// One agglomeration step. Indices follow the usual linkage convention:
/// 0..n-1 are rows, n+i is the cluster formed by merge i.
struct WardMerge {
    int left = 0;
    int right = 0;
    double height = 0.0;
    int size = 0;
};

struct ClusterModel {
    ClusterParams params;
    std::vector<int> assignments;             // raw cluster index per row
    std::vector<int> rank_order;              // raw index -> dose rank, 0 = lowest dose
    std::vector<std::size_t> sizes;           // per raw index
    std::vector<std::size_t> patient_rows;    // cohort patient index per row

    Eigen::MatrixXd centers;                  // k x d: centroids or component means
    Eigen::MatrixXd variances;                // k x d, diagonal mixtures
    std::vector<Eigen::MatrixXd> covariances; // full mixtures
    Eigen::VectorXd weights;                  // mixture weights
    std::vector<WardMerge> merges;            // ward merge tree

    double inertia = 0.0;                     // k-means within-cluster sum of squares
    double log_likelihood = 0.0;              // mixture log-likelihood at the fit
    double objective = 0.0;                   // log-likelihood plus log-prior
    std::vector<double> objective_trace;      // per EM iteration of the final run
    int em_iterations = 0;
    int em_restarts = 0;
    int em_start = 0;                         // k-means++ start whose EM run won
    int reseeds = 0;

    int k() const { return params.k; }
    /// Rank-canonical cluster of a row.
    int ranked(std::size_t row) const { return rank_order[static_cast<std::size_t>(assignments[row])]; }
    std::vector<int> ranked_assignments() const;
    /// Sizes indexed by rank.
    std::vector<std::size_t> ranked_sizes() const;
};

struct KMeansResult {
    std::vector<int> assignments;
    Eigen::MatrixXd centroids;
    double inertia = 0.0;
    int best_restart = 0;
};

/// Best of `restarts` k-means++ runs, chosen by (inertia, restart index).
/// Restart r is seeded from (seed, r) only, so serial and parallel agree.
KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int restarts,
                    Execution exec = Execution::parallel);

/// Full Ward merge tree (nearest-neighbor chain), sorted by height.
std::vector<WardMerge> ward_linkage(const Eigen::MatrixXd& x);
/// Flat clustering with k clusters from a merge tree over n rows.
std::vector<int> cut_tree(const std::vector<WardMerge>& merges, std::size_t n, int k);

/// Fits the requested method. The returned model has an identity rank_order;
/// use rank_clusters (or fit_ranked_model) to order clusters by dose.
ClusterModel cluster_cohort(const FeatureMatrix& matrix, const ClusterParams& params,
                            Execution exec = Execution::parallel);

struct ClusterRanking {
    std::vector<double> scores;   // per raw cluster: sum over spec organs of the mean organ mean dose (Gy)
    std::vector<int> rank_order;  // raw -> rank, ascending score, ties by raw index
    int highest_raw() const;
};

ClusterRanking rank_clusters(const ClusterModel& model, const Cohort& cohort, const FeatureSpec& spec);

/// extract -> cluster -> rank, the unit every downstream step consumes.
ClusterModel fit_ranked_model(const Cohort& cohort, const FeatureSpec& spec, const ClusterParams& params,
                              bool standardize = true, Execution exec = Execution::parallel);

}  // namespace dass
