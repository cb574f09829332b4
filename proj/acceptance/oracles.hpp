#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Reference computations the acceptance checks compare the engine against.
// None of them call into the engine.
namespace dass::oracle {

/// Hubert-Arabie adjusted Rand index from the contingency table.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Largest sample value d with at least `percent`% of samples >= d, by
/// trying every sample as a threshold.
double vx_brute_force(std::span<const double> samples, int percent);

/// H(Y) - sum_s p(s) H(Y|S=s), in bits.
double mutual_information_bits(std::span<const int> split, std::span<const int> target);

/// A column of a small mining instance.
struct Feature {
    int organ = 0;
    std::vector<double> values;
};

struct MiningInstance {
    std::vector<Feature> features;
    std::vector<int> target;
    int thresholds = 5;       // quantile grid size
    int min_support = 1;
    double min_mi = 0.0;      // solo floor in bits
    int max_rules = 4;
    bool geq = true;
};

/// Quantile grid: sorted values at floor(i*n/(m+1)), i = 1..m, distinct.
std::vector<double> quantile_grid(std::vector<double> values, int m);

/// Best MI over every AND of splits with distinct organs, one direction,
/// each split alone meeting the support and MI floors, and the conjunction
/// meeting the support floor. Returns -1 when no split qualifies.
double exhaustive_best_rule_mi(const MiningInstance& inst);

/// Logistic MLE by fixed-step gradient descent.
/// `design` is row-major n x p.
std::vector<double> logistic_gradient_descent(const std::vector<std::vector<double>>& design,
                                              std::span<const int> y);

/// Cross-product ratio (a*d)/(b*c) of a 2x2 table: a = exposed severe,
/// b = exposed not severe, c = unexposed severe, d = unexposed not severe.
double odds_ratio_2x2(double a, double b, double c, double d);

}  // namespace dass::oracle
