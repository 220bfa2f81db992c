#include <benchmark/benchmark.h>

#include "obcl/distance.hpp"
#include "obcl/rng.hpp"

namespace {

obcl::Tensor random_points(obcl::DistanceKind kind, int64_t b, int64_t n, int64_t m,
                           uint64_t seed) {
    auto rng = obcl::stream_rng(seed, "bench_points");
    std::normal_distribution<double> dist(0.0, 1.0);
    int64_t d = n * m;
    obcl::Tensor x = obcl::Tensor::zeros({b, d});
    for (double& v : x.data) v = dist(rng);
    if (kind == obcl::DistanceKind::EuclideanL2) return x;
    int64_t group = kind == obcl::DistanceKind::SphereNegInner ? d : n;
    for (int64_t r = 0; r < b; ++r)
        for (int64_t g0 = 0; g0 < d; g0 += group) {
            double s = 0.0;
            for (int64_t c = 0; c < group; ++c) s += x.at(r, g0 + c) * x.at(r, g0 + c);
            double inv = 1.0 / std::sqrt(s);
            for (int64_t c = 0; c < group; ++c) x.at(r, g0 + c) *= inv;
        }
    return x;
}

void bench_kind(benchmark::State& state, obcl::DistanceKind kind) {
    int64_t b = state.range(0), n = 16, m = 8;
    obcl::Tensor u = random_points(kind, b, n, m, 1);
    obcl::Tensor v = random_points(kind, b, n, m, 2);
    for (auto _ : state) {
        obcl::Tensor d = obcl::distance_matrix_value(kind, u, v, n, m);
        benchmark::DoNotOptimize(d.data.data());
    }
}

void BM_SphereNegInner(benchmark::State& s) { bench_kind(s, obcl::DistanceKind::SphereNegInner); }
void BM_EuclideanL2(benchmark::State& s) { bench_kind(s, obcl::DistanceKind::EuclideanL2); }
void BM_ObliqueGeodesic(benchmark::State& s) { bench_kind(s, obcl::DistanceKind::ObliqueGeodesic); }
void BM_ObliqueNegTrace(benchmark::State& s) { bench_kind(s, obcl::DistanceKind::ObliqueNegTrace); }

}  // namespace

BENCHMARK(BM_SphereNegInner)->Arg(64)->Arg(256);
BENCHMARK(BM_EuclideanL2)->Arg(64)->Arg(256);
BENCHMARK(BM_ObliqueGeodesic)->Arg(64)->Arg(256);
BENCHMARK(BM_ObliqueNegTrace)->Arg(64)->Arg(256);
