#pragma once

#include <vector>

#include "obcl/tensor.hpp"

namespace obcl {

/// Point on the unit sphere S^{d-1}.
struct SpherePoint {
    std::vector<double> vec;
    int64_t dim() const { return static_cast<int64_t>(vec.size()); }
};

struct EuclideanPoint {
    std::vector<double> vec;
    int64_t dim() const { return static_cast<int64_t>(vec.size()); }
};

/// Element of Ob(n, m): an n x m matrix with unit-norm columns, stored
/// column-major so column g occupies [g*n, (g+1)*n).
struct ObliquePoint {
    int64_t n = 0;
    int64_t m = 0;
    std::vector<double> data;  // column-major, n*m elements

    double& at(int64_t row, int64_t col) { return data[static_cast<size_t>(col * n + row)]; }
    double at(int64_t row, int64_t col) const { return data[static_cast<size_t>(col * n + row)]; }
};

SpherePoint project_sphere(const EuclideanPoint& v);
ObliquePoint project_oblique(int64_t n, int64_t m, const std::vector<double>& column_major);
ObliquePoint project_oblique(const ObliquePoint& x);

/// Reinterpret a d-vector as n x m (consecutive elements fill one column,
/// i.e. one sub-sphere), then normalize columns. Ob(d, 1) == project_sphere.
ObliquePoint reshape_to_oblique(const EuclideanPoint& v, int64_t n, int64_t m);

void validate(const SpherePoint& p, double tol);
void validate(const ObliquePoint& p, double tol);

}  // namespace obcl
