#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace obcl {

/// One property suite's outcome; messages describe the first few failures.
struct SuiteResult {
    std::string name;
    int64_t checks = 0;
    int64_t failures = 0;
    double max_error = 0.0;  // gradcheck: worst relative error seen
    std::vector<std::string> messages;

    bool passed() const { return failures == 0 && checks > 0; }
};

SuiteResult manifold_suite(uint64_t seed, int64_t trials = 100000);
SuiteResult range_suite(uint64_t seed, int64_t trials = 100000);
SuiteResult symmetry_suite(uint64_t seed, int64_t trials = 10000);
SuiteResult triangle_suite(uint64_t seed, int64_t trials = 100000);
SuiteResult loss_oracle_suite(uint64_t seed);
SuiteResult gradcheck_suite(uint64_t seed, int64_t trials = 100, double tol = 1e-5);

/// Named bundles behind the props subcommand: "geometry", "distance",
/// "loss", "gradcheck", "all".
std::vector<std::string> suite_names();
std::vector<SuiteResult> run_suites(const std::string& name, uint64_t seed);

}  // namespace obcl
