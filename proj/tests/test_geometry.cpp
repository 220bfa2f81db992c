#include <cmath>
#include <random>

#include "doctest.h"
#include "obcl/errors.hpp"
#include "obcl/geometry.hpp"
#include "obcl/graph.hpp"
#include "obcl/rng.hpp"

using namespace obcl;

TEST_CASE("project_sphere on a worked example") {
    SpherePoint p = project_sphere({{3.0, 4.0}});
    CHECK(p.vec[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p.vec[1] == doctest::Approx(0.8).epsilon(1e-15));
    validate(p, 1e-12);
}

TEST_CASE("reshape_to_oblique fills columns from consecutive elements") {
    ObliquePoint p = reshape_to_oblique({{1.0, 2.0, 2.0, 3.0, 0.0, 4.0}}, 3, 2);
    // column 0 = [1,2,2]/3, column 1 = [3,0,4]/5
    CHECK(p.at(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(p.at(1, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(p.at(2, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(p.at(0, 1) == doctest::Approx(0.6));
    CHECK(p.at(1, 1) == 0.0);
    CHECK(p.at(2, 1) == doctest::Approx(0.8));
    validate(p, 1e-12);
}

TEST_CASE("Ob(d, 1) projection coincides with the sphere") {
    EuclideanPoint v{{0.3, -1.2, 0.5, 2.0}};
    ObliquePoint ob = reshape_to_oblique(v, 4, 1);
    SpherePoint sp = project_sphere(v);
    CHECK(ob.data == sp.vec);
}

TEST_CASE("projection is bitwise idempotent") {
    auto rng = stream_rng(11, "geom_idem");
    std::normal_distribution<double> dist(0.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> raw(12);
        for (double& x : raw) x = dist(rng);
        ObliquePoint p = project_oblique(4, 3, raw);
        ObliquePoint q = project_oblique(p);
        CHECK(q.data == p.data);
    }
}

TEST_CASE("degenerate inputs throw") {
    CHECK_THROWS_AS(project_sphere({{0.0, 0.0, 0.0}}), DegenerateVector);
    CHECK_THROWS_AS(project_sphere({{1e-10, 0.0}}), DegenerateVector);
    CHECK_THROWS_AS(project_oblique(2, 2, {1.0, 0.0, 0.0, 0.0}), DegenerateVector);
    CHECK_THROWS_AS(reshape_to_oblique({{1.0, 2.0, 3.0}}, 2, 2), ShapeMismatch);
}

TEST_CASE("validate reports the worst column deviation") {
    ObliquePoint p{2, 2, {1.0, 0.0, 1.1, 0.0}};
    CHECK_NOTHROW(validate(p, 0.2));
    try {
        validate(p, 1e-6);
        FAIL("expected ManifoldViolation");
    } catch (const ManifoldViolation& e) {
        CHECK(e.max_deviation == doctest::Approx(0.1).epsilon(1e-12));
    }
}

TEST_CASE("graph l2_normalize stays finite on a zero group") {
    // the lenient eps inside the norm makes the training path total
    Graph g;
    Var x = g.leaf(Tensor({1, 4}, {0.0, 0.0, 3.0, 4.0}));
    Var y = g.l2_normalize(x, 2);
    const Tensor& yv = g.value(y);
    CHECK(yv.at(0, 0) == 0.0);
    CHECK(yv.at(0, 1) == 0.0);
    CHECK(yv.at(0, 2) == doctest::Approx(0.6).epsilon(1e-9));
    g.backward(g.sum(g.mul(y, y)));
    for (double v : g.grad(x).data) CHECK(std::isfinite(v));
}
