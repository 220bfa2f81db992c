#include "obcl/geometry.hpp"

#include <cmath>

#include "obcl/errors.hpp"

namespace obcl {

namespace {

constexpr double kDegenerateNorm = 1e-9;
// Norms this close to 1 are left untouched so that projection is bitwise
// idempotent; the introduced deviation is far below the manifold tolerance.
constexpr double kAlreadyUnit = 1e-13;

// Normalizes [begin, begin+len) in place; returns false on degenerate input.
bool normalize_span(double* begin, int64_t len) {
    double ss = 0.0;
    for (int64_t i = 0; i < len; ++i) ss += begin[i] * begin[i];
    double r = std::sqrt(ss);
    if (r < kDegenerateNorm) return false;
    if (std::abs(r - 1.0) <= kAlreadyUnit) return true;
    for (int64_t i = 0; i < len; ++i) begin[i] /= r;
    return true;
}

}  // namespace

SpherePoint project_sphere(const EuclideanPoint& v) {
    SpherePoint p{v.vec};
    if (p.vec.empty()) throw ShapeMismatch("project_sphere: empty vector");
    if (!normalize_span(p.vec.data(), p.dim()))
        throw DegenerateVector("project_sphere: input norm below 1e-9");
    return p;
}

ObliquePoint project_oblique(int64_t n, int64_t m, const std::vector<double>& column_major) {
    if (n < 1 || m < 1 || static_cast<int64_t>(column_major.size()) != n * m)
        throw ShapeMismatch("project_oblique: data size does not match n*m");
    ObliquePoint p{n, m, column_major};
    for (int64_t g = 0; g < m; ++g) {
        if (!normalize_span(p.data.data() + g * n, n))
            throw DegenerateVector("project_oblique: near-zero column " + std::to_string(g));
    }
    return p;
}

ObliquePoint project_oblique(const ObliquePoint& x) { return project_oblique(x.n, x.m, x.data); }

ObliquePoint reshape_to_oblique(const EuclideanPoint& v, int64_t n, int64_t m) {
    if (n * m != v.dim())
        throw ShapeMismatch("reshape_to_oblique: n*m = " + std::to_string(n * m) +
                            " != dim = " + std::to_string(v.dim()));
    return project_oblique(n, m, v.vec);
}

void validate(const SpherePoint& p, double tol) {
    double ss = 0.0;
    for (double v : p.vec) {
        if (!std::isfinite(v)) throw ManifoldViolation("sphere point has non-finite entry", INFINITY);
        ss += v * v;
    }
    double dev = std::abs(std::sqrt(ss) - 1.0);
    if (dev > tol)
        throw ManifoldViolation("sphere norm deviation " + std::to_string(dev), dev);
}

void validate(const ObliquePoint& p, double tol) {
    if (p.n < 1 || p.m < 1 || static_cast<int64_t>(p.data.size()) != p.n * p.m)
        throw ManifoldViolation("oblique point has inconsistent shape", INFINITY);
    double worst = 0.0;
    for (int64_t g = 0; g < p.m; ++g) {
        double ss = 0.0;
        for (int64_t i = 0; i < p.n; ++i) {
            double v = p.at(i, g);
            if (!std::isfinite(v))
                throw ManifoldViolation("oblique point has non-finite entry", INFINITY);
            ss += v * v;
        }
        worst = std::max(worst, std::abs(std::sqrt(ss) - 1.0));
    }
    if (worst > tol)
        throw ManifoldViolation("oblique column norm deviation " + std::to_string(worst), worst);
}

}  // namespace obcl
