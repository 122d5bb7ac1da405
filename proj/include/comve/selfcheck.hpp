#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace comve {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Gradient checks, invariants, and the optimizer oracle on tiny configs.
// Prints one "PASS name (detail)" or "FAIL name (detail)" line per check.
std::vector<CheckResult> run_selfcheck(std::ostream& out);

bool all_passed(const std::vector<CheckResult>& results);

} // namespace comve
