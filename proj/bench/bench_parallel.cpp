#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <string>

#include "dass/pipeline.hpp"

using namespace dass;

namespace {

double time_best(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const std::string& name, int reps, const std::function<void(Execution)>& f) {
    const double s = time_best(reps, [&] { f(Execution::serial); });
    const double p = time_best(reps, [&] { f(Execution::parallel); });
    std::cout << std::left << std::setw(28) << name << std::right << std::fixed << std::setprecision(3)
              << std::setw(10) << s << std::setw(10) << p << std::setw(9) << std::setprecision(2) << s / p << "x\n";
}

}  // namespace

// Usage: bench_parallel [threads] [reps]
int main(int argc, char** argv) {
    if (argc > 1) omp_set_num_threads(std::atoi(argv[1]));
    const int reps = argc > 2 ? std::atoi(argv[2]) : 3;

    const SyntheticCohort sc = generate_synthetic_cohort(SyntheticConfig{}, 0);
    Analysis a;
    a.confounders = {"concurrent_chemo", "hpv_positive", "t_stage_high"};
    const FeatureMatrix wide = extract_feature_matrix(
        sc.cohort, {{"Parotid_L", "Parotid_R", "Submandibular_L", "Submandibular_R", "Tongue", "Larynx"}, 20, 70,
                    false, false});
    const ClusterModel model = fit_model(sc.cohort, a);
    const RuleProblem problem = build_rule_problem(sc.cohort, cluster_target(model, 2), std::nullopt);

    std::cout << max_threads() << " thread(s), " << sc.cohort.patients.size() << " patients x "
              << sc.cohort.organs.size() << " organs, best of " << reps << "\n";
    std::cout << std::left << std::setw(28) << "kernel" << std::right << std::setw(10) << "serial s" << std::setw(10)
              << "omp s" << std::setw(10) << "speedup" << "\n";
    row("k-means, 10 restarts", reps, [&](Execution e) { kmeans(wide.values, 3, 1, 10, e); });
    row("GMM fit (10 EM starts)", reps, [&](Execution e) { cluster_cohort(wide, ClusterParams{}, e); });
    row("LRT sweep, 5 thresholds", reps, [&](Execution e) {
        const std::vector<int> t{2, 3, 4, 5, 6};
        lrt_threshold_sweep(sc.cohort, model, a.outcome, t, a.confounders, {}, e);
    });
    row("rule mining, all features", reps, [&](Execution e) { mine_rules(problem, MinerConfig{}, e); });
    row("forward search round", reps, [&](Execution e) { run_search(sc.cohort, a, Metric::bic, e); });
    return 0;
}
