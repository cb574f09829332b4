#include "dass/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "dass/error.hpp"

namespace dass {

std::string_view to_string(ClusterMethod m) {
    switch (m) {
        case ClusterMethod::kmeans: return "kmeans";
        case ClusterMethod::ward_hierarchical: return "ward_hierarchical";
        case ClusterMethod::bayesian_gmm: return "bayesian_gmm";
    }
    return "bayesian_gmm";
}

ClusterMethod parse_cluster_method(std::string_view s) {
    if (s == "kmeans") return ClusterMethod::kmeans;
    if (s == "ward_hierarchical" || s == "ward") return ClusterMethod::ward_hierarchical;
    if (s == "bayesian_gmm" || s == "gmm") return ClusterMethod::bayesian_gmm;
    throw ValidationError("method", "unknown clustering method '" + std::string(s) + "'");
}

std::string_view to_string(CovarianceType c) { return c == CovarianceType::full ? "full" : "diagonal"; }

CovarianceType parse_covariance_type(std::string_view s) {
    if (s == "diagonal" || s == "diag") return CovarianceType::diagonal;
    if (s == "full") return CovarianceType::full;
    throw ValidationError("covariance", "unknown covariance type '" + std::string(s) + "'");
}

void validate_cluster_params(const ClusterParams& p) {
    std::vector<FieldError> errors;
    if (p.k < 2) errors.push_back({"k", "must be >= 2"});
    if (!(p.tolerance > 0.0)) errors.push_back({"tol", "must be > 0"});
    if (p.max_iterations < 1) errors.push_back({"max_iter", "must be >= 1"});
    if (p.restarts < 1) errors.push_back({"restarts", "must be >= 1"});
    if (!(p.weight_concentration >= 0.0)) errors.push_back({"weight_concentration", "must be >= 0"});
    if (!errors.empty()) throw ValidationError(std::move(errors));
}

std::vector<int> ClusterModel::ranked_assignments() const {
    std::vector<int> out(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) out[i] = ranked(i);
    return out;
}

std::vector<std::size_t> ClusterModel::ranked_sizes() const {
    std::vector<std::size_t> out(sizes.size());
    for (std::size_t c = 0; c < sizes.size(); ++c) out[static_cast<std::size_t>(rank_order[c])] = sizes[c];
    return out;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix(splitmix(seed) ^ stream); }

double sq_dist(const Eigen::MatrixXd& x, Eigen::Index row, const Eigen::MatrixXd& c, Eigen::Index crow) {
    return (x.row(row) - c.row(crow)).squaredNorm();
}

std::vector<std::size_t> count_sizes(const std::vector<int>& assign, int k) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assign) ++sizes[static_cast<std::size_t>(a)];
    return sizes;
}

KMeansResult kmeans_single(const Eigen::MatrixXd& x, int k, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd centers(k, x.cols());

    // k-means++ seeding
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = x.row(pick(rng));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist(x, i, centers, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            const double target = unif(rng) * total;
            double acc = 0.0;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc > target && d2[static_cast<std::size_t>(i)] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centers.row(c) = x.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(x, i, centers, c));
    }

    // Lloyd iterations
    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(x, i, centers, 0);
            for (int c = 1; c < k; ++c) {
                const double dd = sq_dist(x, i, centers, c);
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            dist[static_cast<std::size_t>(i)] = best_d;
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        // Empty clusters take over the currently worst-fit point.
        auto sizes = count_sizes(assign, k);
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] != 0) continue;
            Eigen::Index far = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] < 2) continue;
                if (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
            }
            if (far < 0) break;
            --sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
            assign[static_cast<std::size_t>(far)] = c;
            dist[static_cast<std::size_t>(far)] = 0.0;
            sizes[static_cast<std::size_t>(c)] = 1;
            changed = true;
        }
        centers.setZero();
        for (Eigen::Index i = 0; i < n; ++i) centers.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
        for (int c = 0; c < k; ++c)
            if (sizes[static_cast<std::size_t>(c)] > 0)
                centers.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);
        if (!changed) break;
    }

    KMeansResult r;
    r.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) r.inertia += sq_dist(x, i, centers, assign[static_cast<std::size_t>(i)]);
    r.assignments = std::move(assign);
    r.centroids = std::move(centers);
    return r;
}

void check_input(const Eigen::MatrixXd& x, int k) {
    if (k < 2) throw ValidationError("k", "must be >= 2");
    if (x.rows() <= k)
        throw ValidationError("k", "need more rows (" + std::to_string(x.rows()) + ") than clusters (" +
                                       std::to_string(k) + ")");
    if (!x.allFinite()) throw ValidationError("matrix", "feature matrix contains non-finite values");
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int restarts, Execution exec) {
    check_input(x, k);
    restarts = std::max(restarts, 1);
    std::vector<KMeansResult> runs(static_cast<std::size_t>(restarts));
    const bool par = exec == Execution::parallel;
#pragma omp parallel for schedule(dynamic) if (par)
    for (int r = 0; r < restarts; ++r)
        runs[static_cast<std::size_t>(r)] = kmeans_single(x, k, derive_seed(seed, static_cast<std::uint64_t>(r)));
    int best = 0;
    for (int r = 1; r < restarts; ++r)
        if (runs[static_cast<std::size_t>(r)].inertia < runs[static_cast<std::size_t>(best)].inertia) best = r;
    KMeansResult out = std::move(runs[static_cast<std::size_t>(best)]);
    out.best_restart = best;
    return out;
}

// ---------------------------------------------------------------------------
// Ward

std::vector<WardMerge> ward_linkage(const Eigen::MatrixXd& x) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n < 2) return {};
    Eigen::MatrixXd centroid = x;
    std::vector<double> size(n, 1.0);
    std::vector<bool> active(n, true);
    std::vector<int> min_row(n);
    std::iota(min_row.begin(), min_row.end(), 0);

    auto ward = [&](std::size_t a, std::size_t b) {
        const double sa = size[a], sb = size[b];
        return std::sqrt(2.0 * sa * sb / (sa + sb) *
                         (centroid.row(static_cast<Eigen::Index>(a)) - centroid.row(static_cast<Eigen::Index>(b)))
                             .squaredNorm());
    };

    struct Raw {
        int a, b;
        double h;
        int size;
    };
    std::vector<Raw> raw;
    raw.reserve(n - 1);
    std::vector<std::size_t> chain;
    std::size_t remaining = n;
    while (remaining > 1) {
        if (chain.empty()) {
            for (std::size_t i = 0; i < n; ++i)
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
        }
        const std::size_t a = chain.back();
        const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
        std::size_t best = n;
        double best_d = std::numeric_limits<double>::infinity();
        if (prev != n) {
            best = prev;
            best_d = ward(a, prev);
        }
        for (std::size_t b = 0; b < n; ++b) {
            if (!active[b] || b == a || b == prev) continue;
            const double d = ward(a, b);
            if (d < best_d) {
                best_d = d;
                best = b;
            }
        }
        if (best == prev) {
            chain.pop_back();
            chain.pop_back();
            const std::size_t keep = std::min(a, best), drop = std::max(a, best);
            const double s = size[keep] + size[drop];
            raw.push_back({min_row[keep], min_row[drop], best_d, static_cast<int>(s)});
            centroid.row(static_cast<Eigen::Index>(keep)) =
                (size[keep] * centroid.row(static_cast<Eigen::Index>(keep)) +
                 size[drop] * centroid.row(static_cast<Eigen::Index>(drop))) /
                s;
            size[keep] = s;
            min_row[keep] = std::min(min_row[keep], min_row[drop]);
            active[drop] = false;
            --remaining;
        } else {
            chain.push_back(best);
        }
    }

    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return raw[l].h < raw[r].h; });

    // Relabel into linkage ids via union-find over rows.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<int> node_id(n);
    std::iota(node_id.begin(), node_id.end(), 0);
    auto find = [&](std::size_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    std::vector<WardMerge> merges;
    merges.reserve(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Raw& m = raw[order[i]];
        const std::size_t ra = find(static_cast<std::size_t>(m.a)), rb = find(static_cast<std::size_t>(m.b));
        const int ia = node_id[ra], ib = node_id[rb];
        merges.push_back({std::min(ia, ib), std::max(ia, ib), m.h, m.size});
        parent[std::max(ra, rb)] = std::min(ra, rb);
        node_id[std::min(ra, rb)] = static_cast<int>(n + i);
    }
    return merges;
}

std::vector<int> cut_tree(const std::vector<WardMerge>& merges, std::size_t n, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > n) throw ValidationError("k", "cannot cut tree into that many clusters");
    std::vector<std::size_t> rep(n + merges.size());
    std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), 0);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    const std::size_t applied = n - static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < merges.size(); ++i) {
        const auto a = rep[static_cast<std::size_t>(merges[i].left)];
        const auto b = rep[static_cast<std::size_t>(merges[i].right)];
        rep[n + i] = std::min(a, b);
        if (i < applied) {
            const auto ra = find(a), rb = find(b);
            parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    std::vector<int> labels(n, -1);
    std::vector<int> root_label(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = find(i);
        if (root_label[r] < 0) root_label[r] = next++;
        labels[i] = root_label[r];
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Bayesian (MAP) Gaussian mixture

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

class MapGmm {
public:
    MapGmm(const Eigen::MatrixXd& x, const ClusterParams& p, Execution exec)
        : x_(x), p_(p), k_(p.k), n_(x.rows()), d_(x.cols()), par_(exec == Execution::parallel) {
        floor_.resize(d_);
        const Eigen::RowVectorXd mu = x.colwise().mean();
        for (Eigen::Index c = 0; c < d_; ++c) {
            const double var = (x.col(c).array() - mu(c)).square().mean();
            floor_(c) = var > 0.0 ? 1e-6 * var : 1e-6;
        }
        alpha_ = p.concentration();
    }

    ClusterModel fit() {
        constexpr int kMaxRestarts = 5;
        constexpr int kMaxReseeds = 5;
        for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
            const std::uint64_t seed = attempt == 0 ? p_.seed : derive_seed(p_.seed, 0x9000u + static_cast<unsigned>(attempt));
            std::optional<ClusterModel> best;
            for (int start = 0; start < p_.restarts; ++start) {
                init_from_kmeans(derive_seed(seed, static_cast<std::uint64_t>(start)));
                int reseeds = 0;
                bool ok = false;
                while (reseeds <= kMaxReseeds) {
                    const int empty = run_em();
                    if (empty < 0) {
                        ok = true;
                        break;
                    }
                    reseed(empty);
                    ++reseeds;
                }
                total_reseeds_ += reseeds;
                if (!ok) continue;
                ClusterModel m = to_model(attempt);
                m.em_start = start;
                if (!best || m.objective > best->objective) best = std::move(m);
            }
            if (best) {
                best->reseeds = total_reseeds_;
                return std::move(*best);
            }
        }
        throw EngineError("Gaussian mixture EM failed: a component stayed empty after " + std::to_string(kMaxRestarts) +
                          " restarts");
    }

private:
    // Returns the index of an empty component, or -1 when the fit is usable.
    int run_em() {
        trace_.clear();
        iterations_ = 0;
        double prev = -std::numeric_limits<double>::infinity();
        bool converged = false;
        for (int it = 0; it < p_.max_iterations; ++it) {
            estep();
            const double obj = log_likelihood_ + log_prior();
            trace_.push_back(obj);
            iterations_ = it + 1;
            if (it > 0 && std::abs(obj - prev) / static_cast<double>(n_) < p_.tolerance) {
                converged = true;
                break;
            }
            prev = obj;
            const int empty = mstep();
            if (empty >= 0) return empty;
        }
        if (!converged) {
            // Responsibilities must match the parameters of the last M-step.
            estep();
            trace_.push_back(log_likelihood_ + log_prior());
        }
        hard_assign();
        auto sizes = count_sizes(assign_, k_);
        for (int c = 0; c < k_; ++c)
            if (sizes[static_cast<std::size_t>(c)] == 0) return c;
        return -1;
    }

    void init_from_kmeans(std::uint64_t seed) {
        const KMeansResult km = kmeans_single(x_, k_, seed);
        resp_ = Eigen::MatrixXd::Zero(n_, k_);
        for (Eigen::Index i = 0; i < n_; ++i) resp_(i, km.assignments[static_cast<std::size_t>(i)]) = 1.0;
        means_ = Eigen::MatrixXd::Zero(k_, d_);
        vars_ = Eigen::MatrixXd::Zero(k_, d_);
        covs_.assign(static_cast<std::size_t>(k_), Eigen::MatrixXd());
        weights_ = Eigen::VectorXd::Zero(k_);
        // Hard-count M-step; k-means never leaves a cluster empty.
        update_components(/*map_weights=*/false);
    }

    double log_prior() const {
        double lp = 0.0;
        for (int j = 0; j < k_; ++j) lp += (alpha_ - 1.0) * std::log(weights_(j));
        for (int j = 0; j < k_; ++j) {
            if (p_.covariance == CovarianceType::diagonal) {
                for (Eigen::Index c = 0; c < d_; ++c) lp -= 0.5 * floor_(c) / vars_(j, c);
            } else {
                const Eigen::MatrixXd inv = chol_[static_cast<std::size_t>(j)].solve(
                    Eigen::MatrixXd::Identity(d_, d_));
                lp -= 0.5 * (floor_.array() * inv.diagonal().array()).sum();
            }
        }
        return lp;
    }

    void prepare() {
        log_norm_.resize(k_);
        if (p_.covariance == CovarianceType::diagonal) {
            for (int j = 0; j < k_; ++j)
                log_norm_(j) = std::log(weights_(j)) -
                               0.5 * (static_cast<double>(d_) * kLog2Pi + vars_.row(j).array().log().sum());
        } else {
            chol_.resize(static_cast<std::size_t>(k_));
            for (int j = 0; j < k_; ++j) {
                chol_[static_cast<std::size_t>(j)].compute(covs_[static_cast<std::size_t>(j)]);
                if (chol_[static_cast<std::size_t>(j)].info() != Eigen::Success)
                    throw EngineError("component covariance is not positive definite");
                const Eigen::MatrixXd l = chol_[static_cast<std::size_t>(j)].matrixL();
                log_norm_(j) = std::log(weights_(j)) -
                               0.5 * (static_cast<double>(d_) * kLog2Pi + 2.0 * l.diagonal().array().log().sum());
            }
        }
    }

    double component_log_density(Eigen::Index i, int j) const {
        if (p_.covariance == CovarianceType::diagonal) {
            return log_norm_(j) -
                   0.5 * ((x_.row(i) - means_.row(j)).array().square() / vars_.row(j).array()).sum();
        }
        const Eigen::VectorXd diff = (x_.row(i) - means_.row(j)).transpose();
        const Eigen::VectorXd z = chol_[static_cast<std::size_t>(j)].matrixL().solve(diff);
        return log_norm_(j) - 0.5 * z.squaredNorm();
    }

    void estep() {
        prepare();
        row_ll_.resize(n_);
        resp_.resize(n_, k_);
#pragma omp parallel for schedule(static) if (par_)
        for (Eigen::Index i = 0; i < n_; ++i) {
            Eigen::VectorXd lp(k_);
            for (int j = 0; j < k_; ++j) lp(j) = component_log_density(i, j);
            const double mx = lp.maxCoeff();
            const double lse = mx + std::log((lp.array() - mx).exp().sum());
            row_ll_(i) = lse;
            resp_.row(i) = (lp.array() - lse).exp().transpose();
        }
        log_likelihood_ = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) log_likelihood_ += row_ll_(i);
    }

    // MAP M-step. Returns a component whose Dirichlet-MAP weight would be
    // non-positive, or -1.
    int mstep() { return update_components(/*map_weights=*/true); }

    int update_components(bool map_weights) {
        const Eigen::VectorXd nk = resp_.colwise().sum().transpose();
        for (int j = 0; j < k_; ++j) {
            const double eff = map_weights ? nk(j) + alpha_ - 1.0 : nk(j);
            if (!(eff > 1e-10)) return j;
        }
        const double denom = map_weights ? static_cast<double>(n_) + k_ * (alpha_ - 1.0) : static_cast<double>(n_);
        for (int j = 0; j < k_; ++j) {
            weights_(j) = (map_weights ? nk(j) + alpha_ - 1.0 : nk(j)) / denom;
            means_.row(j) = (resp_.col(j).transpose() * x_) / nk(j);
            const Eigen::MatrixXd centered = x_.rowwise() - means_.row(j);
            if (p_.covariance == CovarianceType::diagonal) {
                vars_.row(j) = (resp_.col(j).transpose() * centered.array().square().matrix()) / nk(j);
                vars_.row(j) += (floor_ / nk(j)).transpose();
            } else {
                Eigen::MatrixXd s = (centered.array().colwise() * resp_.col(j).array()).matrix().transpose() * centered;
                s /= nk(j);
                s.diagonal() += floor_ / nk(j);
                covs_[static_cast<std::size_t>(j)] = std::move(s);
            }
        }
        return -1;
    }

    void hard_assign() {
        assign_.assign(static_cast<std::size_t>(n_), 0);
        for (Eigen::Index i = 0; i < n_; ++i) {
            int best = 0;
            for (int j = 1; j < k_; ++j)
                if (resp_(i, j) > resp_(i, best)) best = j;
            assign_[static_cast<std::size_t>(i)] = best;
        }
    }

    void reseed(int j) {
        // Worst-explained row under the current responsibilities.
        prepare();
        Eigen::Index worst = 0;
        double worst_v = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n_; ++i) {
            double v = 0.0;
            for (int c = 0; c < k_; ++c)
                if (c != j) v += resp_(i, c) * component_log_density(i, c);
            if (v < worst_v) {
                worst_v = v;
                worst = i;
            }
        }
        const Eigen::RowVectorXd mu = x_.colwise().mean();
        Eigen::RowVectorXd colvar = (x_.rowwise() - mu).array().square().colwise().mean();
        colvar += floor_.transpose();
        means_.row(j) = x_.row(worst);
        if (p_.covariance == CovarianceType::diagonal)
            vars_.row(j) = colvar;
        else
            covs_[static_cast<std::size_t>(j)] = colvar.transpose().asDiagonal();
        weights_(j) = 1.0 / k_;
        weights_ /= weights_.sum();
    }

    ClusterModel to_model(int attempt) const {
        ClusterModel m;
        m.params = p_;
        m.assignments = assign_;
        m.sizes = count_sizes(assign_, k_);
        m.centers = means_;
        m.weights = weights_;
        if (p_.covariance == CovarianceType::diagonal)
            m.variances = vars_;
        else
            m.covariances = covs_;
        m.log_likelihood = log_likelihood_;
        m.objective = trace_.empty() ? 0.0 : trace_.back();
        m.objective_trace = trace_;
        m.em_iterations = iterations_;
        m.em_restarts = attempt;
        m.reseeds = total_reseeds_;
        return m;
    }

    const Eigen::MatrixXd& x_;
    ClusterParams p_;
    int k_;
    Eigen::Index n_, d_;
    bool par_;
    double alpha_ = 1.0;
    Eigen::VectorXd floor_;

    Eigen::MatrixXd resp_;
    Eigen::VectorXd row_ll_;
    Eigen::VectorXd weights_;
    Eigen::MatrixXd means_;
    Eigen::MatrixXd vars_;
    std::vector<Eigen::MatrixXd> covs_;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> chol_;
    Eigen::VectorXd log_norm_;
    std::vector<int> assign_;
    double log_likelihood_ = 0.0;
    std::vector<double> trace_;
    int iterations_ = 0;
    int total_reseeds_ = 0;
};

}  // namespace

ClusterModel cluster_cohort(const FeatureMatrix& matrix, const ClusterParams& params, Execution exec) {
    validate_cluster_params(params);
    const Eigen::MatrixXd& x = matrix.values;
    check_input(x, params.k);

    ClusterModel model;
    switch (params.method) {
        case ClusterMethod::kmeans: {
            KMeansResult km = kmeans(x, params.k, params.seed, params.restarts, exec);
            model.params = params;
            model.assignments = std::move(km.assignments);
            model.centers = std::move(km.centroids);
            model.inertia = km.inertia;
            model.sizes = count_sizes(model.assignments, params.k);
            break;
        }
        case ClusterMethod::ward_hierarchical: {
            model.params = params;
            model.merges = ward_linkage(x);
            model.assignments = cut_tree(model.merges, static_cast<std::size_t>(x.rows()), params.k);
            model.sizes = count_sizes(model.assignments, params.k);
            model.centers = Eigen::MatrixXd::Zero(params.k, x.cols());
            for (Eigen::Index i = 0; i < x.rows(); ++i) model.centers.row(model.assignments[static_cast<std::size_t>(i)]) += x.row(i);
            for (int c = 0; c < params.k; ++c)
                model.centers.row(c) /= static_cast<double>(model.sizes[static_cast<std::size_t>(c)]);
            break;
        }
        case ClusterMethod::bayesian_gmm: {
            MapGmm gmm(x, params, exec);
            model = gmm.fit();
            break;
        }
    }
    model.patient_rows = matrix.patient_rows;
    model.rank_order.resize(static_cast<std::size_t>(params.k));
    std::iota(model.rank_order.begin(), model.rank_order.end(), 0);
    for (auto s : model.sizes)
        if (s == 0) throw EngineError("clustering produced an empty cluster");
    return model;
}

int ClusterRanking::highest_raw() const {
    for (std::size_t c = 0; c < rank_order.size(); ++c)
        if (rank_order[c] == static_cast<int>(rank_order.size()) - 1) return static_cast<int>(c);
    return 0;
}

ClusterRanking rank_clusters(const ClusterModel& model, const Cohort& cohort, const FeatureSpec& spec) {
    const auto k = static_cast<std::size_t>(model.k());
    std::vector<std::size_t> organ_ix;
    for (const auto& name : spec.organs) {
        auto ix = cohort.organ_index(name);
        if (!ix) throw ValidationError("organs", "unknown organ '" + name + "'");
        organ_ix.push_back(*ix);
    }
    std::vector<double> sums(k * organ_ix.size(), 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < model.assignments.size(); ++r) {
        const auto c = static_cast<std::size_t>(model.assignments[r]);
        const Patient& p = cohort.patients[model.patient_rows[r]];
        ++counts[c];
        for (std::size_t o = 0; o < organ_ix.size(); ++o) sums[c * organ_ix.size() + o] += p.dvh[organ_ix[o]][FeatureKey::mean()];
    }
    ClusterRanking out;
    out.scores.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) throw EngineError("cannot rank an empty cluster");
        for (std::size_t o = 0; o < organ_ix.size(); ++o)
            out.scores[c] += sums[c * organ_ix.size() + o] / static_cast<double>(counts[c]);
    }
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return out.scores[static_cast<std::size_t>(a)] < out.scores[static_cast<std::size_t>(b)];
    });
    out.rank_order.assign(k, 0);
    for (std::size_t r = 0; r < k; ++r) out.rank_order[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
    return out;
}

ClusterModel fit_ranked_model(const Cohort& cohort, const FeatureSpec& spec, const ClusterParams& params,
                              bool standardize, Execution exec) {
    const FeatureMatrix m = extract_feature_matrix(cohort, spec, standardize);
    ClusterModel model = cluster_cohort(m, params, exec);
    model.rank_order = rank_clusters(model, cohort, spec).rank_order;
    return model;
}

}  // namespace dass
