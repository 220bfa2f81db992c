#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "obcl/distance.hpp"

namespace obcl {

/// Tape storage attributable to one distance-matrix backward pass.
struct StorageReport {
    DistanceKind kind = DistanceKind::SphereNegInner;
    int64_t b = 0, d = 0, m = 0;
    int64_t retained_scalars = 0;  // >= b*b: the logits are always kept
    double flops = 0.0;            // forward multiply-add count
};

/// Builds the distance subgraph on random manifold points, tags it, runs
/// backward through a scalar reduction, and counts tagged saved elements.
/// Oblique kinds require m | d.
StorageReport measure_backward_storage(DistanceKind kind, int64_t b, int64_t d, int64_t m,
                                       uint64_t seed = 0);

/// Least-squares slope of log(retained_scalars) against log(d) or log(m)
/// over the given reports; callers pass a sweep varying only that field.
double fitted_exponent(const std::vector<StorageReport>& reports, char variable);

std::string report_csv(const std::vector<StorageReport>& reports);
std::string report_text(const std::vector<StorageReport>& reports);

/// The standard sweep behind the CLI bench subcommand: d and m ladders per
/// kind at fixed b.
std::vector<StorageReport> default_sweep(uint64_t seed = 0);

}  // namespace obcl
