#include "obcl/bench.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "obcl/errors.hpp"
#include "obcl/rng.hpp"

namespace obcl {

namespace {

Tensor random_points(DistanceKind kind, int64_t b, int64_t d, int64_t m, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor x = Tensor::zeros({b, d});
    for (double& v : x.data) v = dist(rng);
    if (kind == DistanceKind::EuclideanL2) return x;
    int64_t group = kind == DistanceKind::SphereNegInner ? d : d / m;
    for (int64_t r = 0; r < b; ++r)
        for (int64_t g0 = 0; g0 < d; g0 += group) {
            double s = 0.0;
            for (int64_t c = 0; c < group; ++c) s += x.at(r, g0 + c) * x.at(r, g0 + c);
            double inv = 1.0 / std::sqrt(s);
            for (int64_t c = 0; c < group; ++c) x.at(r, g0 + c) *= inv;
        }
    return x;
}

}  // namespace

StorageReport measure_backward_storage(DistanceKind kind, int64_t b, int64_t d, int64_t m,
                                       uint64_t seed) {
    if (b < 2 || d < 1 || m < 1) throw ConfigError("measure_backward_storage: bad shape");
    bool oblique = kind == DistanceKind::ObliqueGeodesic || kind == DistanceKind::ObliqueNegTrace;
    if (oblique && d % m != 0)
        throw ShapeMismatch("measure_backward_storage: oblique kinds require m | d");
    int64_t n = oblique ? d / m : d;

    auto rng = stream_rng(seed, "bench_points");
    Graph g;
    Var u = g.leaf(random_points(kind, b, d, m, rng));
    Var v = g.leaf(random_points(kind, b, d, m, rng));

    g.set_tag(1);
    Var negd = distance_matrix(g, kind, u, v, n, oblique ? m : 1);
    g.set_tag(0);
    g.backward(g.mean(negd));

    StorageReport r;
    r.kind = kind;
    r.b = b;
    r.d = d;
    r.m = m;
    r.retained_scalars = g.retained_scalars(1);
    r.flops = g.flops(1);
    return r;
}

double fitted_exponent(const std::vector<StorageReport>& reports, char variable) {
    if (reports.size() < 2) throw ConfigError("fitted_exponent: need at least 2 reports");
    if (variable != 'd' && variable != 'm')
        throw ConfigError("fitted_exponent: variable must be 'd' or 'm'");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    auto cnt = static_cast<double>(reports.size());
    for (const auto& r : reports) {
        double x = std::log(static_cast<double>(variable == 'm' ? r.m : r.d));
        double y = std::log(static_cast<double>(r.retained_scalars));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = cnt * sxx - sx * sx;
    if (std::abs(denom) < 1e-12)
        throw ConfigError("fitted_exponent: sweep does not vary the requested variable");
    return (cnt * sxy - sx * sy) / denom;
}

std::string report_csv(const std::vector<StorageReport>& reports) {
    if (reports.empty()) throw ConfigError("report_csv: need at least 1 report");
    std::ostringstream os;
    os << "kind,b,d,m,retained_scalars,flops\n";
    for (const auto& r : reports) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", r.flops);
        os << to_string(r.kind) << "," << r.b << "," << r.d << "," << r.m << ","
           << r.retained_scalars << "," << buf << "\n";
    }
    return os.str();
}

std::string report_text(const std::vector<StorageReport>& reports) {
    if (reports.empty()) throw ConfigError("report_text: need at least 1 report");
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s %6s %6s %4s %16s %14s\n", "kind", "b", "d", "m",
                  "retained_scalars", "flops");
    os << line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%-20s %6lld %6lld %4lld %16lld %14.4g\n",
                      to_string(r.kind).c_str(), static_cast<long long>(r.b),
                      static_cast<long long>(r.d), static_cast<long long>(r.m),
                      static_cast<long long>(r.retained_scalars), r.flops);
        os << line;
    }
    return os.str();
}

std::vector<StorageReport> default_sweep(uint64_t seed) {
    std::vector<StorageReport> out;
    const int64_t b = 16;
    for (DistanceKind kind : {DistanceKind::SphereNegInner, DistanceKind::EuclideanL2}) {
        for (int64_t d : {64, 128, 256, 512}) out.push_back(measure_backward_storage(kind, b, d, 1, seed));
    }
    for (DistanceKind kind : {DistanceKind::ObliqueGeodesic, DistanceKind::ObliqueNegTrace}) {
        // m ladder at fixed n = 8
        for (int64_t m : {2, 4, 8, 16})
            out.push_back(measure_backward_storage(kind, b, 8 * m, m, seed));
        // d ladder at fixed m = 4
        for (int64_t d : {64, 128, 256, 512})
            out.push_back(measure_backward_storage(kind, b, d, 4, seed));
    }
    return out;
}

}  // namespace obcl
