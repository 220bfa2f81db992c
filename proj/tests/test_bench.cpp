#include <cmath>
#include <string>

#include "doctest.h"
#include "obcl/bench.hpp"
#include "obcl/errors.hpp"

using namespace obcl;

namespace {

double ratio(DistanceKind kind, int64_t b, int64_t d_lo, int64_t d_hi, int64_t m_lo, int64_t m_hi) {
    StorageReport lo = measure_backward_storage(kind, b, d_lo, m_lo);
    StorageReport hi = measure_backward_storage(kind, b, d_hi, m_hi);
    return static_cast<double>(hi.retained_scalars) / static_cast<double>(lo.retained_scalars);
}

}  // namespace

TEST_CASE("inner-product kinds retain storage independent of width") {
    // sphere: d 64 -> 512 at fixed b
    CHECK(ratio(DistanceKind::SphereNegInner, 16, 64, 512, 1, 1) ==
          doctest::Approx(1.0).epsilon(0.1));
    // neg-trace: m 2 -> 16 at fixed b, d
    CHECK(ratio(DistanceKind::ObliqueNegTrace, 16, 128, 128, 2, 16) ==
          doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("l2 retained storage scales linearly in d") {
    // d 64 -> 512 is 8x; allow [6.4, 9.6] for the b^2 logits floor
    double r = ratio(DistanceKind::EuclideanL2, 16, 64, 512, 1, 1);
    CHECK(r > 6.4);
    CHECK(r < 9.6);
}

TEST_CASE("geodesic retained storage scales linearly in m") {
    double r = ratio(DistanceKind::ObliqueGeodesic, 16, 128, 128, 2, 16);
    CHECK(r > 6.4);
    CHECK(r < 9.6);
}

TEST_CASE("every kind keeps at least the b^2 logits") {
    for (DistanceKind k : {DistanceKind::SphereNegInner, DistanceKind::EuclideanL2,
                           DistanceKind::ObliqueGeodesic, DistanceKind::ObliqueNegTrace}) {
        StorageReport r = measure_backward_storage(k, 12, 48, 4);
        CHECK(r.retained_scalars >= 12 * 12);
        CHECK(r.flops > 0.0);
    }
}

TEST_CASE("forward flops scale with b^2 d") {
    StorageReport lo = measure_backward_storage(DistanceKind::SphereNegInner, 8, 64, 1);
    StorageReport hi = measure_backward_storage(DistanceKind::SphereNegInner, 16, 256, 1);
    CHECK(hi.flops / lo.flops == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("fitted exponents on measured sweeps") {
    std::vector<StorageReport> sphere, l2, geo;
    for (int64_t d : {64, 128, 256, 512}) {
        sphere.push_back(measure_backward_storage(DistanceKind::SphereNegInner, 16, d, 1));
        l2.push_back(measure_backward_storage(DistanceKind::EuclideanL2, 16, d, 1));
    }
    for (int64_t m : {2, 4, 8, 16})
        geo.push_back(measure_backward_storage(DistanceKind::ObliqueGeodesic, 16, 128, m));

    CHECK(std::abs(fitted_exponent(sphere, 'd')) < 0.15);
    CHECK(fitted_exponent(l2, 'd') == doctest::Approx(1.0).epsilon(0.15));
    CHECK(fitted_exponent(geo, 'm') == doctest::Approx(1.0).epsilon(0.15));

    CHECK_THROWS_AS(fitted_exponent({}, 'd'), ConfigError);
    CHECK_THROWS_AS(fitted_exponent(sphere, 'x'), ConfigError);
}

TEST_CASE("reports are deterministic and csv-stable") {
    std::vector<StorageReport> a = {measure_backward_storage(DistanceKind::EuclideanL2, 8, 32, 1),
                                    measure_backward_storage(DistanceKind::ObliqueGeodesic, 8, 32, 4)};
    std::vector<StorageReport> b = {measure_backward_storage(DistanceKind::EuclideanL2, 8, 32, 1),
                                    measure_backward_storage(DistanceKind::ObliqueGeodesic, 8, 32, 4)};
    CHECK(report_csv(a) == report_csv(b));
    std::string csv = report_csv(a);
    CHECK(csv.rfind("kind,b,d,m,retained_scalars,flops\n", 0) == 0);
    CHECK(!report_text(a).empty());
}

TEST_CASE("invalid shapes are rejected") {
    CHECK_THROWS_AS(measure_backward_storage(DistanceKind::ObliqueGeodesic, 8, 30, 4),
                    ShapeMismatch);
    CHECK_THROWS_AS(measure_backward_storage(DistanceKind::SphereNegInner, 1, 30, 1), ConfigError);
}
