#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace dass::oracle {

namespace {

double choose2(double x) { return x * (x - 1.0) / 2.0; }

double entropy(double p) {
    double h = 0.0;
    for (double q : {p, 1.0 - p})
        if (q > 0.0) h -= q * std::log2(q);
    return h;
}

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cells[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [_, c] : cells) index += choose2(c);
    for (const auto& [_, c] : rows) sum_a += choose2(c);
    for (const auto& [_, c] : cols) sum_b += choose2(c);
    const double expected = sum_a * sum_b / choose2(static_cast<double>(a.size()));
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

double vx_brute_force(std::span<const double> samples, int percent) {
    const double n = static_cast<double>(samples.size());
    double best = -INFINITY;
    for (double d : samples) {
        double hits = 0.0;
        for (double s : samples) hits += s >= d ? 1.0 : 0.0;
        if (100.0 * hits >= percent * n) best = std::max(best, d);
    }
    return best;
}

double mutual_information_bits(std::span<const int> split, std::span<const int> target) {
    const double n = static_cast<double>(target.size());
    double pos = 0.0;
    for (int y : target) pos += y;
    double mi = entropy(pos / n);
    for (int s : {0, 1}) {
        double ns = 0.0, ns_pos = 0.0;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) {
                ns += 1.0;
                ns_pos += target[i];
            }
        if (ns > 0.0) mi -= ns / n * entropy(ns_pos / ns);
    }
    return mi;
}

std::vector<double> quantile_grid(std::vector<double> values, int m) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::vector<double> out;
    for (int i = 1; i <= m; ++i) {
        const double v = values[static_cast<std::size_t>(i) * n / static_cast<std::size_t>(m + 1)];
        if (out.empty() || out.back() != v) out.push_back(v);
    }
    return out;
}

double exhaustive_best_rule_mi(const MiningInstance& inst) {
    const std::size_t n = inst.target.size();
    struct Split {
        int organ;
        std::vector<int> mask;
    };
    std::vector<Split> pool;
    for (const Feature& f : inst.features) {
        for (double t : quantile_grid(f.values, inst.thresholds)) {
            std::vector<int> mask(n);
            int support = 0;
            for (std::size_t i = 0; i < n; ++i) {
                mask[i] = inst.geq ? f.values[i] >= t : f.values[i] < t;
                support += mask[i];
            }
            if (support < inst.min_support) continue;
            if (mutual_information_bits(mask, inst.target) < inst.min_mi) continue;
            pool.push_back({f.organ, std::move(mask)});
        }
    }
    double best = -1.0;
    const std::size_t subsets = std::size_t{1} << pool.size();
    for (std::size_t bits = 1; bits < subsets; ++bits) {
        std::vector<int> organs;
        std::vector<int> mask(n, 1);
        bool valid = true;
        for (std::size_t j = 0; j < pool.size() && valid; ++j) {
            if (!(bits >> j & 1)) continue;
            if (std::find(organs.begin(), organs.end(), pool[j].organ) != organs.end()) valid = false;
            organs.push_back(pool[j].organ);
            for (std::size_t i = 0; i < n; ++i) mask[i] &= pool[j].mask[i];
        }
        if (!valid || static_cast<int>(organs.size()) > inst.max_rules) continue;
        int support = 0;
        for (int v : mask) support += v;
        if (support < inst.min_support) continue;
        best = std::max(best, mutual_information_bits(mask, inst.target));
    }
    return best;
}

std::vector<double> logistic_gradient_descent(const std::vector<std::vector<double>>& design,
                                              std::span<const int> y) {
    const std::size_t n = design.size(), p = design.front().size();
    auto gradient = [&](const std::vector<double>& b) {
        std::vector<double> g(p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double eta = 0.0;
            for (std::size_t j = 0; j < p; ++j) eta += design[i][j] * b[j];
            const double r = 1.0 / (1.0 + std::exp(-eta)) - y[i];
            for (std::size_t j = 0; j < p; ++j) g[j] += r * design[i][j];
        }
        return g;
    };
    // 1/4 trace(X'X) bounds the Hessian, so 1/L is a safe fixed step
    double lipschitz = 0.0;
    for (const auto& row : design)
        for (double v : row) lipschitz += 0.25 * v * v;
    const double step = 1.0 / lipschitz;
    std::vector<double> b(p, 0.0);
    for (int it = 0; it < 5'000'000; ++it) {
        const std::vector<double> g = gradient(b);
        double g2 = 0.0;
        for (double v : g) g2 += v * v;
        if (std::sqrt(g2) < 1e-10) break;
        for (std::size_t j = 0; j < p; ++j) b[j] -= step * g[j];
    }
    return b;
}

double odds_ratio_2x2(double a, double b, double c, double d) { return a * d / (b * c); }

}  // namespace dass::oracle
