#pragma once

#include <string>

#include "obcl/geometry.hpp"
#include "obcl/graph.hpp"

namespace obcl {

enum class DistanceKind {
    SphereNegInner,   // S^{d-1}, d(u,v) = -u.v, range [-1, 1]
    EuclideanL2,      // R^d, d(u,v) = |u-v|_2, range [0, inf)
    ObliqueGeodesic,  // Ob(n,m), sqrt(sum_g arccos^2(u_g . v_g)), range [0, pi*sqrt(m)]
    ObliqueNegTrace,  // Ob(n,m), -tr(u^T v), range [-m, m]
};

std::string to_string(DistanceKind k);
DistanceKind distance_kind_from_string(const std::string& s);

double neg_inner(const SpherePoint& u, const SpherePoint& v);
double l2(const EuclideanPoint& u, const EuclideanPoint& v);
double geodesic(const ObliquePoint& u, const ObliquePoint& v);
double neg_trace(const ObliquePoint& u, const ObliquePoint& v);

struct DistanceRange {
    double lo;
    double hi;  // +inf for EuclideanL2
};

/// Theoretical output interval of the kind. For ObliqueGeodesic the formula
/// attains at most pi*sqrt(m); see the range suite for the empirical check.
DistanceRange range_of(DistanceKind k, int64_t n, int64_t m);

/// Batch matrix of NEGATIVE distances (similarity logits), differentiable.
/// Rows of u/v are flattened embeddings: whole vectors for sphere/euclidean,
/// column-major oblique points for the oblique kinds.
Var distance_matrix(Graph& g, DistanceKind k, Var u, Var v, int64_t n, int64_t m);

/// Value-only convenience for evaluation paths: same entries, no tape kept.
Tensor distance_matrix_value(DistanceKind k, const Tensor& u, const Tensor& v, int64_t n, int64_t m);

}  // namespace obcl
