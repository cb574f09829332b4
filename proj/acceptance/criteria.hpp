#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dass::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Runs the selected criteria (all when empty), printing one line each as it
/// finishes: "[PASS] 3 evidence labels: ...".
std::vector<CriterionResult> run_criteria(std::ostream& out, const std::vector<int>& ids = {});

/// Every criterion; true when all pass.
bool run_all(std::ostream& out);

}  // namespace dass::acceptance
