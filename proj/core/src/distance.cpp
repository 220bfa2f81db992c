#include "obcl/distance.hpp"

#include <cmath>

namespace obcl {

namespace {
constexpr double kPi = 3.14159265358979323846;

void require_same_dim(int64_t a, int64_t b, const char* op) {
    if (a != b)
        throw ShapeMismatch(std::string(op) + ": dimension mismatch " + std::to_string(a) + " vs " +
                            std::to_string(b));
}
}  // namespace

std::string to_string(DistanceKind k) {
    switch (k) {
        case DistanceKind::SphereNegInner: return "sphere_neg_inner";
        case DistanceKind::EuclideanL2: return "euclidean_l2";
        case DistanceKind::ObliqueGeodesic: return "oblique_geodesic";
        case DistanceKind::ObliqueNegTrace: return "oblique_neg_trace";
    }
    return "unknown";
}

DistanceKind distance_kind_from_string(const std::string& s) {
    if (s == "sphere_neg_inner") return DistanceKind::SphereNegInner;
    if (s == "euclidean_l2") return DistanceKind::EuclideanL2;
    if (s == "oblique_geodesic") return DistanceKind::ObliqueGeodesic;
    if (s == "oblique_neg_trace") return DistanceKind::ObliqueNegTrace;
    throw ConfigError("unknown distance kind: " + s +
                      " (expected sphere_neg_inner|euclidean_l2|oblique_geodesic|oblique_neg_trace)");
}

double neg_inner(const SpherePoint& u, const SpherePoint& v) {
    require_same_dim(u.dim(), v.dim(), "neg_inner");
    double s = 0.0;
    for (int64_t i = 0; i < u.dim(); ++i) s += u.vec[i] * v.vec[i];
    return -s;
}

double l2(const EuclideanPoint& u, const EuclideanPoint& v) {
    require_same_dim(u.dim(), v.dim(), "l2");
    double ss = 0.0;
    for (int64_t i = 0; i < u.dim(); ++i) {
        double d = u.vec[i] - v.vec[i];
        ss += d * d;
    }
    return std::sqrt(ss);
}

double geodesic(const ObliquePoint& u, const ObliquePoint& v) {
    if (u.n != v.n || u.m != v.m)
        throw ShapeMismatch("geodesic: oblique shapes (" + std::to_string(u.n) + "," +
                            std::to_string(u.m) + ") vs (" + std::to_string(v.n) + "," +
                            std::to_string(v.m) + ")");
    // Only the diagonal of u^T v enters: one arccos per column. The scalar
    // path clamps to exactly [-1, 1] (no derivative needed), so identical and
    // antipodal points hit 0 and pi exactly; the graph op keeps an eps margin.
    double ss = 0.0;
    for (int64_t g = 0; g < u.m; ++g) {
        double c = 0.0;
        for (int64_t i = 0; i < u.n; ++i) c += u.at(i, g) * v.at(i, g);
        c = std::clamp(c, -1.0, 1.0);
        double a = std::acos(c);
        ss += a * a;
    }
    return std::sqrt(ss);
}

double neg_trace(const ObliquePoint& u, const ObliquePoint& v) {
    if (u.n != v.n || u.m != v.m)
        throw ShapeMismatch("neg_trace: oblique shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < u.data.size(); ++i) s += u.data[i] * v.data[i];
    return -s;
}

DistanceRange range_of(DistanceKind k, int64_t /*n*/, int64_t m) {
    switch (k) {
        case DistanceKind::SphereNegInner: return {-1.0, 1.0};
        case DistanceKind::EuclideanL2: return {0.0, INFINITY};
        case DistanceKind::ObliqueGeodesic:
            return {0.0, kPi * std::sqrt(static_cast<double>(m))};
        case DistanceKind::ObliqueNegTrace:
            return {-static_cast<double>(m), static_cast<double>(m)};
    }
    throw Error("range_of: unknown kind");
}

Var distance_matrix(Graph& g, DistanceKind k, Var u, Var v, int64_t n, int64_t m) {
    const Tensor& uv = g.value(u);
    const Tensor& vv = g.value(v);
    if (uv.rank() != 2 || vv.rank() != 2)
        throw ShapeMismatch("distance_matrix: expected rank-2 batches");
    switch (k) {
        case DistanceKind::SphereNegInner: return g.pairwise_neg_inner(u, v);
        case DistanceKind::EuclideanL2: return g.pairwise_l2(u, v);
        case DistanceKind::ObliqueGeodesic: return g.pairwise_geodesic(u, v, n, m);
        case DistanceKind::ObliqueNegTrace: return g.pairwise_neg_trace(u, v, n, m);
    }
    throw Error("distance_matrix: unknown kind");
}

Tensor distance_matrix_value(DistanceKind k, const Tensor& u, const Tensor& v, int64_t n,
                             int64_t m) {
    Graph g;
    Var uv = g.leaf(u);
    Var vv = g.leaf(v);
    return g.value(distance_matrix(g, k, uv, vv, n, m));
}

}  // namespace obcl
