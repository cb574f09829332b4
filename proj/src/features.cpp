#include "dass/features.hpp"

#include <cmath>
#include <set>

#include "dass/error.hpp"
#include "text_util.hpp"

namespace dass {

std::vector<FeatureKey> FeatureSpec::keys() const {
    std::vector<FeatureKey> out;
    for (int x = window_lo; x <= window_hi; x += 5) out.push_back(FeatureKey::vx(x));
    if (include_mean) out.push_back(FeatureKey::mean());
    if (include_max) out.push_back(FeatureKey::max());
    return out;
}

std::size_t FeatureSpec::window_size() const {
    if (window_hi < window_lo) return 0;
    return static_cast<std::size_t>((window_hi - window_lo) / 5 + 1) + (include_mean ? 1 : 0) +
           (include_max ? 1 : 0);
}

void validate_feature_spec(const FeatureSpec& spec, const Cohort* cohort) {
    std::vector<FieldError> errors;
    auto on_grid = [](int x) { return x >= 5 && x <= 95 && x % 5 == 0; };
    if (spec.organs.empty()) errors.push_back({"organs", "organ set is empty"});
    std::set<std::string> seen;
    for (const auto& o : spec.organs) {
        if (!seen.insert(o).second) errors.push_back({"organs", "duplicate organ '" + o + "'"});
        if (cohort && !cohort->organ_index(o)) errors.push_back({"organs", "unknown organ '" + o + "'"});
    }
    if (!on_grid(spec.window_lo)) errors.push_back({"window.lo", "must be one of 5,10,...,95"});
    if (!on_grid(spec.window_hi)) errors.push_back({"window.hi", "must be one of 5,10,...,95"});
    if (spec.window_lo > spec.window_hi) errors.push_back({"window", "lo must not exceed hi"});
    if (!errors.empty()) throw ValidationError(std::move(errors));
}

FeatureMatrix extract_feature_matrix(const Cohort& cohort, const FeatureSpec& spec, bool standardize) {
    validate_feature_spec(spec, &cohort);
    const auto keys = spec.keys();
    std::vector<std::size_t> organ_ix;
    for (const auto& name : spec.organs) organ_ix.push_back(*cohort.organ_index(name));

    FeatureMatrix m;
    for (std::size_t p = 0; p < cohort.patients.size(); ++p) {
        bool complete = true;
        for (auto o : organ_ix) complete = complete && !cohort.patients[p].dvh[o].missing;
        if (complete) m.patient_rows.push_back(p);
    }
    if (m.patient_rows.empty()) throw ValidationError("organs", "every patient is missing data for the spec organs");

    const auto n = static_cast<Eigen::Index>(m.patient_rows.size());
    const auto d = static_cast<Eigen::Index>(spec.dimension());
    m.values.resize(n, d);
    for (std::size_t oi = 0; oi < organ_ix.size(); ++oi)
        for (auto k : keys) m.columns.push_back({spec.organs[oi], k});
    for (Eigen::Index r = 0; r < n; ++r) {
        const Patient& p = cohort.patients[m.patient_rows[static_cast<std::size_t>(r)]];
        Eigen::Index c = 0;
        for (auto o : organ_ix)
            for (auto k : keys) m.values(r, c++) = p.dvh[o][k];
    }

    if (standardize) {
        m.standardized = true;
        m.column_means = m.values.colwise().mean().transpose();
        m.column_stds.resize(d);
        for (Eigen::Index c = 0; c < d; ++c) {
            const double mu = m.column_means(c);
            double ss = 0.0;
            for (Eigen::Index r = 0; r < n; ++r) ss += (m.values(r, c) - mu) * (m.values(r, c) - mu);
            const double sd = std::sqrt(ss / static_cast<double>(n));
            m.column_stds(c) = sd;
            const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mu)));
            for (Eigen::Index r = 0; r < n; ++r) m.values(r, c) = constant ? 0.0 : (m.values(r, c) - mu) / sd;
        }
    }
    return m;
}

std::string feature_matrix_to_csv(const FeatureMatrix& m, const Cohort& cohort) {
    std::string out = "id";
    for (const auto& c : m.columns) out += "," + c.str();
    out += '\n';
    for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
        out += cohort.patients[m.patient_rows[static_cast<std::size_t>(r)]].id;
        for (Eigen::Index c = 0; c < m.values.cols(); ++c) out += "," + detail::format_double(m.values(r, c));
        out += '\n';
    }
    return out;
}

PcaProjection project_pca(const Eigen::MatrixXd& values, std::array<int, 2> components) {
    const Eigen::Index n = values.rows();
    const Eigen::Index d = values.cols();
    if (n < 2) throw ValidationError("matrix", "PCA needs at least 2 rows");
    // Rank bound of a centered n x d matrix.
    const Eigen::Index rank_bound = std::min(n - 1, d);
    for (int c : components)
        if (c < 0 || c >= rank_bound)
            throw ValidationError("components", "component index " + std::to_string(c) + " out of range (rank bound " +
                                                    std::to_string(rank_bound) + ")");

    const Eigen::MatrixXd centered = values.rowwise() - values.colwise().mean();
    const Eigen::MatrixXd cov = (centered.adjoint() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw EngineError("covariance eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    Eigen::VectorXd evals = eig.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd evecs = eig.eigenvectors().rowwise().reverse();
    const double total = evals.sum();
    if (!(total > 0.0)) throw ValidationError("matrix", "PCA of a matrix with zero variance");

    PcaProjection out;
    out.components = components;
    out.explained.resize(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) out.explained[static_cast<std::size_t>(i)] = evals(i) / total;
    out.loadings.resize(d, 2);
    for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd v = evecs.col(components[static_cast<std::size_t>(j)]);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < d; ++i)
            if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
        if (v(arg) < 0.0) v = -v;
        out.loadings.col(j) = v;
    }
    out.coordinates = centered * out.loadings;
    return out;
}

}  // namespace dass
