#include "obcl/suites.hpp"

#include <cmath>
#include <random>

#include "obcl/distance.hpp"
#include "obcl/errors.hpp"
#include "obcl/gradcheck.hpp"
#include "obcl/geometry.hpp"
#include "obcl/loss.hpp"
#include "obcl/rng.hpp"

namespace obcl {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Recorder {
    SuiteResult& r;
    void check(bool ok, const std::string& msg) {
        ++r.checks;
        if (!ok) {
            ++r.failures;
            if (r.messages.size() < 10) r.messages.push_back(msg);
        }
    }
};

std::vector<double> gaussian_vec(std::mt19937_64& rng, int64_t len, double std = 1.0) {
    std::normal_distribution<double> dist(0.0, std);
    std::vector<double> v(static_cast<size_t>(len));
    for (double& x : v) x = dist(rng);
    return v;
}

ObliquePoint random_oblique(std::mt19937_64& rng, int64_t n, int64_t m) {
    return project_oblique(n, m, gaussian_vec(rng, n * m));
}

Tensor random_rows(std::mt19937_64& rng, int64_t b, int64_t d) {
    return Tensor({b, d}, gaussian_vec(rng, b * d));
}

}  // namespace

SuiteResult manifold_suite(uint64_t seed, int64_t trials) {
    SuiteResult res{.name = "manifold"};
    Recorder rec{res};
    auto rng = stream_rng(seed, "manifold_suite");
    std::uniform_int_distribution<int64_t> nd(2, 9), md(1, 8);
    std::uniform_real_distribution<double> scale(0.0, 1.0);
    for (int64_t i = 0; i < trials; ++i) {
        int64_t n = nd(rng), m = md(rng);
        auto raw = gaussian_vec(rng, n * m, 0.1 + 10.0 * scale(rng));
        ObliquePoint p = project_oblique(n, m, raw);
        double dev = 0.0;
        for (int64_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (int64_t r = 0; r < n; ++r) s += p.at(r, c) * p.at(r, c);
            dev = std::max(dev, std::abs(std::sqrt(s) - 1.0));
        }
        rec.check(dev < 1e-9, "projection column norm off by " + std::to_string(dev));
        ObliquePoint q = project_oblique(p);
        rec.check(q.data == p.data, "projection not bitwise idempotent");
    }
    return res;
}

SuiteResult range_suite(uint64_t seed, int64_t trials) {
    SuiteResult res{.name = "range"};
    Recorder rec{res};
    auto rng = stream_rng(seed, "range_suite");
    std::uniform_int_distribution<int64_t> nd(2, 9), md(1, 8);
    const double tol = 1e-9;

    for (int64_t i = 0; i < trials; ++i) {
        int64_t d = nd(rng) * md(rng);
        SpherePoint u = project_sphere({gaussian_vec(rng, d)});
        SpherePoint v = project_sphere({gaussian_vec(rng, d)});
        double x = neg_inner(u, v);
        rec.check(x >= -1.0 - tol && x <= 1.0 + tol, "neg_inner out of [-1,1]");
    }
    for (int64_t i = 0; i < trials; ++i) {
        int64_t d = nd(rng);
        double x = l2({gaussian_vec(rng, d)}, {gaussian_vec(rng, d)});
        rec.check(x >= -tol, "l2 negative");
    }
    double geo_max = 0.0;
    for (int64_t i = 0; i < trials; ++i) {
        int64_t n = nd(rng), m = md(rng);
        ObliquePoint u = random_oblique(rng, n, m);
        ObliquePoint v = random_oblique(rng, n, m);
        double hi = kPi * std::sqrt(static_cast<double>(m));
        double x = geodesic(u, v);
        rec.check(x >= -tol && x <= hi + tol, "geodesic out of [0, pi*sqrt(m)]");
        double y = neg_trace(u, v);
        double mm = static_cast<double>(m);
        rec.check(y >= -mm - tol && y <= mm + tol, "neg_trace out of [-m, m]");
        if (m == 8) {
            // adversarial antipodal pair attains the upper bound
            ObliquePoint w = u;
            for (double& e : w.data) e = -e;
            geo_max = std::max(geo_max, geodesic(u, w) / hi);
        }
    }
    rec.check(geo_max > 0.95, "antipodal geodesic max only " + std::to_string(geo_max) +
                                  " of pi*sqrt(m)");
    return res;
}

SuiteResult symmetry_suite(uint64_t seed, int64_t trials) {
    SuiteResult res{.name = "symmetry"};
    Recorder rec{res};
    auto rng = stream_rng(seed, "symmetry_suite");
    std::uniform_int_distribution<int64_t> nd(2, 9), md(1, 8);
    for (int64_t i = 0; i < trials; ++i) {
        int64_t n = nd(rng), m = md(rng);
        ObliquePoint u = random_oblique(rng, n, m);
        ObliquePoint v = random_oblique(rng, n, m);
        rec.check(std::abs(geodesic(u, v) - geodesic(v, u)) < 1e-12, "geodesic asymmetric");
        rec.check(neg_trace(u, v) == neg_trace(v, u), "neg_trace asymmetric");
        SpherePoint su{std::vector<double>(u.data.begin(), u.data.begin() + n)};
        SpherePoint sv{std::vector<double>(v.data.begin(), v.data.begin() + n)};
        rec.check(neg_inner(su, sv) == neg_inner(sv, su), "neg_inner asymmetric");
        rec.check(std::abs(l2({u.data}, {v.data}) - l2({v.data}, {u.data})) < 1e-12,
                  "l2 asymmetric");
        rec.check(geodesic(u, u) < 1e-6, "geodesic self-distance nonzero");
    }
    return res;
}

SuiteResult triangle_suite(uint64_t seed, int64_t trials) {
    SuiteResult res{.name = "triangle"};
    Recorder rec{res};
    auto rng = stream_rng(seed, "triangle_suite");
    std::uniform_int_distribution<int64_t> nd(2, 6), md(1, 4);
    const double tol = 1e-9;

    for (int64_t i = 0; i < trials; ++i) {
        int64_t d = nd(rng) * md(rng);
        EuclideanPoint a{gaussian_vec(rng, d)}, b{gaussian_vec(rng, d)}, c{gaussian_vec(rng, d)};
        rec.check(l2(a, c) <= l2(a, b) + l2(b, c) + tol, "l2 triangle violated");
        int64_t n = nd(rng), m = md(rng);
        ObliquePoint u = random_oblique(rng, n, m);
        ObliquePoint v = random_oblique(rng, n, m);
        ObliquePoint w = random_oblique(rng, n, m);
        rec.check(geodesic(u, w) <= geodesic(u, v) + geodesic(v, w) + tol,
                  "geodesic triangle violated");
    }

    // Shipped counterexample: the shifted neg-trace m - tr(u^T v) is not a
    // metric. Unit circle at 0, 60 and 120 degrees: d(a,c) = 1.5 > 1.0.
    {
        auto circle = [](double deg) {
            double rad = deg * kPi / 180.0;
            return ObliquePoint{2, 1, {std::cos(rad), std::sin(rad)}};
        };
        ObliquePoint a = circle(0.0), b = circle(60.0), c = circle(120.0);
        double dab = 1.0 + neg_trace(a, b);
        double dbc = 1.0 + neg_trace(b, c);
        double dac = 1.0 + neg_trace(a, c);
        rec.check(dac > dab + dbc + 0.1, "shifted neg-trace counterexample failed to violate");
    }

    // Chains of three hops each within eps+ stay within 3 eps+ for the
    // geodesic, the bound the relaxed-boundary argument relies on.
    const double eps_pos = 0.1;
    for (int64_t i = 0; i < 1000; ++i) {
        int64_t n = 4, m = 3;
        ObliquePoint x = random_oblique(rng, n, m);
        ObliquePoint start = x;
        for (int hop = 0; hop < 3; ++hop) {
            ObliquePoint y = x;
            double step = 0.04;
            for (;;) {
                ObliquePoint cand = x;
                auto noise = gaussian_vec(rng, n * m, step);
                for (size_t e = 0; e < cand.data.size(); ++e) cand.data[e] += noise[e];
                cand = project_oblique(cand);
                if (geodesic(x, cand) <= eps_pos) {
                    y = cand;
                    break;
                }
                step *= 0.5;
            }
            x = y;
        }
        rec.check(geodesic(start, x) <= 3.0 * eps_pos + tol, "3-hop geodesic bound violated");
    }
    return res;
}

SuiteResult loss_oracle_suite(uint64_t seed) {
    SuiteResult res{.name = "loss_oracle"};
    Recorder rec{res};
    auto rng = stream_rng(seed, "loss_oracle_suite");
    std::uniform_real_distribution<double> dd(-2.0, 2.0), td(-1.0, 1.5);

    for (int64_t trial = 0; trial < 100; ++trial) {
        int64_t b = 2 + trial % 7;
        Tensor negd = Tensor::zeros({b, b});
        for (double& v : negd.data) v = dd(rng);
        TemperatureParam temp;
        temp.t = td(rng);
        temp.learnable = true;
        LossOutput out = contrastive_loss(negd, temp);

        // explicit-loop oracle: plain exponential sums, no vectorized path
        double tau = temp.tau();
        double row = 0.0, col = 0.0;
        for (int64_t i = 0; i < b; ++i) {
            double denom = 0.0;
            for (int64_t j = 0; j < b; ++j) denom += std::exp(negd.at(i, j) * tau);
            row += -negd.at(i, i) * tau + std::log(denom);
            denom = 0.0;
            for (int64_t j = 0; j < b; ++j) denom += std::exp(negd.at(j, i) * tau);
            col += -negd.at(i, i) * tau + std::log(denom);
        }
        double oracle = (row / static_cast<double>(b) + col / static_cast<double>(b)) / 2.0;
        rec.check(std::abs(out.loss - oracle) < 1e-12,
                  "loss off oracle by " + std::to_string(out.loss - oracle));
    }

    for (int64_t b = 2; b <= 8; ++b) {
        TemperatureParam temp;
        temp.t = 0.7;
        LossOutput out = contrastive_loss(Tensor::full({b, b}, 0.37), temp);
        rec.check(std::abs(out.loss - std::log(static_cast<double>(b))) < 1e-12,
                  "uniform logits loss != ln b");
    }

    {
        TemperatureParam temp;
        temp.t = std::log(200.0);  // exp(t) above the cap
        temp.tau_max = 100.0;
        temp.learnable = true;
        Tensor negd = Tensor::zeros({4, 4});
        for (double& v : negd.data) v = dd(rng);
        LossOutput out = contrastive_loss(negd, temp);
        rec.check(out.grad_t == 0.0, "clamped temperature leaked gradient");
    }
    return res;
}

SuiteResult gradcheck_suite(uint64_t seed, int64_t trials, double tol) {
    SuiteResult res{.name = "gradcheck"};
    Recorder rec{res};
    auto rng = stream_rng(seed, "gradcheck_suite");
    const int64_t b = 4, n = 4, m = 2, d = n * m;

    const DistanceKind kinds[] = {DistanceKind::SphereNegInner, DistanceKind::EuclideanL2,
                                  DistanceKind::ObliqueGeodesic, DistanceKind::ObliqueNegTrace};
    // normalized per-group dots must stay away from the arccos endpoints
    auto max_group_dot = [&](const Tensor& u, const Tensor& v) {
        double worst = 0.0;
        for (int64_t i = 0; i < b; ++i)
            for (int64_t j = 0; j < b; ++j)
                for (int64_t g0 = 0; g0 < m; ++g0) {
                    double dot = 0.0, nu = 0.0, nv = 0.0;
                    for (int64_t c = 0; c < n; ++c) {
                        double a = u.at(i, g0 * n + c), bb = v.at(j, g0 * n + c);
                        dot += a * bb;
                        nu += a * a;
                        nv += bb * bb;
                    }
                    worst = std::max(worst, std::abs(dot) / std::sqrt(nu * nv));
                }
        return worst;
    };

    for (int64_t trial = 0; trial < trials; ++trial) {
        DistanceKind kind = kinds[trial % 4];
        Tensor u = random_rows(rng, b, d), v = random_rows(rng, b, d);
        if (kind == DistanceKind::ObliqueGeodesic)
            while (max_group_dot(u, v) > 0.95) {
                u = random_rows(rng, b, d);
                v = random_rows(rng, b, d);
            }
        auto build = [kind](Graph& g, const std::vector<Var>& leaves) {
            Var eu = leaves[0], ev = leaves[1];
            int64_t group = kind == DistanceKind::SphereNegInner ? n * m : n;
            if (kind != DistanceKind::EuclideanL2) {
                eu = g.l2_normalize(eu, group);
                ev = g.l2_normalize(ev, group);
            }
            Var negd = distance_matrix(g, kind, eu, ev, n,
                                       kind == DistanceKind::SphereNegInner ? 1 : m);
            return g.cross_entropy_diag(g.scalar_mul(negd, 2.0));
        };
        double err = gradcheck(build, {u, v});
        res.max_error = std::max(res.max_error, err);
        rec.check(err < tol,
                  to_string(kind) + " gradcheck error " + std::to_string(err));
    }

    // full pipeline: affine towers, oblique head, learnable clamped temperature
    for (int64_t trial = 0; trial < trials / 10 + 1; ++trial) {
        Tensor xi = random_rows(rng, b, 6), xt = random_rows(rng, b, 6);
        Tensor wi = random_rows(rng, 6, d), wt = random_rows(rng, 6, d);
        Tensor t0 = Tensor::scalar(0.3);
        auto build = [xi, xt](Graph& g, const std::vector<Var>& leaves) {
            Var ei = g.l2_normalize(g.matmul(g.leaf(xi), leaves[0]), n);
            Var et = g.l2_normalize(g.matmul(g.leaf(xt), leaves[1]), n);
            Var negd = g.pairwise_neg_trace(ei, et, n, m);
            Var tau = g.exp_clamped(leaves[2], 100.0);
            return g.cross_entropy_diag(g.mul_scalar_var(negd, tau));
        };
        double err = gradcheck(build, {wi, wt, t0});
        res.max_error = std::max(res.max_error, err);
        rec.check(err < tol, "pipeline gradcheck error " + std::to_string(err));
    }
    return res;
}

std::vector<std::string> suite_names() {
    return {"geometry", "distance", "loss", "gradcheck", "all"};
}

std::vector<SuiteResult> run_suites(const std::string& name, uint64_t seed) {
    std::vector<SuiteResult> out;
    bool all = name == "all";
    bool known = false;
    if (all || name == "geometry") {
        known = true;
        out.push_back(manifold_suite(seed));
    }
    if (all || name == "distance") {
        known = true;
        out.push_back(range_suite(seed));
        out.push_back(symmetry_suite(seed));
        out.push_back(triangle_suite(seed));
    }
    if (all || name == "loss") {
        known = true;
        out.push_back(loss_oracle_suite(seed));
    }
    if (all || name == "gradcheck") {
        known = true;
        out.push_back(gradcheck_suite(seed));
    }
    if (!known) {
        std::string valid;
        for (const auto& s : suite_names()) valid += (valid.empty() ? "" : ", ") + s;
        throw ConfigError("unknown suite '" + name + "' (valid: " + valid + ")");
    }
    return out;
}

}  // namespace obcl
