// Acceptance pipeline: ten go/no-go checks covering the property suites, the
// fixed- and learnable-temperature training reproductions, the storage sweep,
// and the multi-token subset trend. Prints one PASS/FAIL line per criterion
// and exits nonzero if any of them fail. Deterministic: every run is seeded.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "obcl/bench.hpp"
#include "obcl/metrics.hpp"
#include "obcl/suites.hpp"
#include "obcl/trainer.hpp"

using namespace obcl;

namespace {

int g_failures = 0;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

void report(int criterion, bool ok, const std::string& detail) {
    if (!ok) ++g_failures;
    std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

struct Timed {
    SuiteResult result;
    double seconds;
};

Timed timed_suite(SuiteResult (*suite)(uint64_t, int64_t), uint64_t seed, int64_t trials) {
    double t0 = now_seconds();
    SuiteResult r = suite(seed, trials);
    return {std::move(r), now_seconds() - t0};
}

std::string suite_detail(const char* what, const Timed& t, double budget) {
    return fmt("%s: %lld checks, %lld failures, %.1fs (budget %.0fs)%s", what,
               static_cast<long long>(t.result.checks), static_cast<long long>(t.result.failures),
               t.seconds, budget,
               t.result.messages.empty() ? "" : (" | " + t.result.messages.front()).c_str());
}

// Fixed-temperature retrieval comparison: one dataset, one optimizer budget,
// four distance heads. The noise level is tuned so that within-class
// resolution is the bottleneck; with tau frozen at 1 the wide-range heads
// (l2, neg-trace) break through while the narrow/saturating ones (sphere,
// geodesic) stay near the class-ceiling chance level of 1/64.
ExperimentConfig fixed_tau_config(DistanceKind kind, int64_t n, int64_t m) {
    ExperimentConfig c;
    c.name = "fixed_tau";
    c.distance = kind;
    c.n = n;
    c.m = m;
    c.encoder = EncoderChoice::Mlp;
    c.mlp_hidden = {128, 128};
    c.embed_dim = 128;
    c.t0 = 0.0;  // tau = exp(0) = 1, frozen
    c.learnable_temperature = false;
    c.batch_size = 64;
    c.steps = 2000;
    c.eval_every = 1000;
    c.eval_size = 1024;
    c.data.num_classes = 16;
    c.data.latent_dim = 16;
    c.data.image_feature_dim = 64;
    c.data.text_feature_dim = 64;
    c.data.noise_std = 0.00062;
    c.data.seed = 37;
    c.seed = 37;
    return c;
}

// Learnable-temperature equilibrium runs: label noise (corrupted pairs) plus
// near-degenerate within-class spread give tau a stable fixed point that both
// a cold and a hot start reach within the step budget.
ExperimentConfig learnable_tau_config(DistanceKind kind, int64_t n, int64_t m, double t0) {
    ExperimentConfig c;
    c.name = "learnable_tau";
    c.distance = kind;
    c.n = n;
    c.m = m;
    c.encoder = EncoderChoice::Mlp;
    c.mlp_hidden = {64};
    c.embed_dim = 64;
    c.t0 = t0;
    c.learnable_temperature = true;
    c.lr = 3e-3;
    c.batch_size = 64;
    c.steps = 20000;
    c.eval_every = 10000;
    c.eval_size = 256;
    c.data.noise_std = 0.001;
    c.data.false_positive_rate = 0.25;
    c.data.seed = 7;
    c.seed = 7;
    return c;
}

double mean_recall(const TrainResult& r) {
    return 0.5 * (r.final_recall.i2t + r.final_recall.t2i);
}

double exponent_for(const std::vector<StorageReport>& sweep, DistanceKind kind, char variable,
                    bool m_ladder) {
    std::vector<StorageReport> picked;
    for (const StorageReport& r : sweep) {
        if (r.kind != kind) continue;
        bool oblique = kind == DistanceKind::ObliqueGeodesic || kind == DistanceKind::ObliqueNegTrace;
        if (oblique && m_ladder != (r.d == 8 * r.m)) continue;
        picked.push_back(r);
    }
    return fitted_exponent(picked, variable);
}

}  // namespace

int main() {
    now_seconds();  // pin the clock origin

    // 1. Gradient check: analytic vs finite-difference over every distance
    //    kind and the full loss pipeline.
    {
        double start = now_seconds();
        SuiteResult r = gradcheck_suite(7, 100, 1e-5);
        Timed t{std::move(r), now_seconds() - start};
        report(1, t.result.passed() && t.seconds < 60.0,
               fmt("gradcheck, 100 instances, max rel err %.2e, %.1fs (budget 60s)",
                   t.result.max_error, t.seconds));
    }

    // 2. Manifold projections: unit columns and bitwise idempotence.
    {
        Timed t = timed_suite(&manifold_suite, 7, 100000);
        report(2, t.result.passed() && t.seconds < 30.0,
               suite_detail("manifold projections", t, 30.0));
    }

    // 3. Distance ranges, including the adversarial geodesic maximum.
    {
        Timed t = timed_suite(&range_suite, 7, 100000);
        report(3, t.result.passed(), suite_detail("distance ranges", t, 900.0));
    }

    // 4. Triangle inequality for the metrics, the shipped neg-trace
    //    counterexample, and the 3-hop geodesic bound.
    {
        Timed t = timed_suite(&triangle_suite, 7, 100000);
        report(4, t.result.passed(), suite_detail("triangle inequality", t, 900.0));
    }

    // 5. Loss oracle: vectorized loss vs explicit loops, ln b at uniform
    //    logits, clamp blocking the temperature gradient.
    {
        double t0 = now_seconds();
        SuiteResult r = loss_oracle_suite(7);
        Timed t{std::move(r), now_seconds() - t0};
        report(5, t.result.passed(), suite_detail("loss oracle", t, 900.0));
    }

    // 6. Fixed tau = 1 retrieval ordering: {l2, neg-trace} >> {sphere,
    //    geodesic}, the latter within 2x of chance (1/64).
    {
        double t0 = now_seconds();
        double sphere = mean_recall(train(fixed_tau_config(DistanceKind::SphereNegInner, 64, 1)));
        double nt = mean_recall(train(fixed_tau_config(DistanceKind::ObliqueNegTrace, 8, 8)));
        double l2 = mean_recall(train(fixed_tau_config(DistanceKind::EuclideanL2, 64, 1)));
        double geo = mean_recall(train(fixed_tau_config(DistanceKind::ObliqueGeodesic, 8, 8)));
        double secs = now_seconds() - t0;
        const double chance = 1.0 / 64.0;
        bool ok = sphere <= 2.0 * chance && geo <= 2.0 * chance &&
                  l2 >= 3.0 * sphere && l2 >= 3.0 * geo &&
                  nt >= 3.0 * sphere && nt >= 3.0 * geo && secs < 300.0;
        report(6, ok,
               fmt("fixed-tau recall@1 l2 %.4f, neg-trace %.4f vs sphere %.4f, geodesic %.4f "
                   "(chance %.4f), %.0fs (budget 300s)",
                   l2, nt, sphere, geo, chance, secs));
    }

    // 7. Learnable-tau equilibrium: cold and hot sphere starts converge to
    //    the same tau; the neg-trace head settles lower.
    {
        double t0 = now_seconds();
        TrainResult cold = train(learnable_tau_config(DistanceKind::SphereNegInner, 64, 1, 0.0));
        TrainResult hot = train(learnable_tau_config(DistanceKind::SphereNegInner, 64, 1, 2.64));
        TrainResult nt = train(learnable_tau_config(DistanceKind::ObliqueNegTrace, 8, 8, 0.0));
        double secs = now_seconds() - t0;
        bool converged = convergence_step(cold.log, 100).has_value() &&
                         convergence_step(hot.log, 100).has_value();
        double gap = std::fabs(cold.final_tau - hot.final_tau) /
                     std::max(cold.final_tau, hot.final_tau);
        bool ok = converged && gap <= 0.15 && nt.final_tau < cold.final_tau &&
                  nt.final_tau < hot.final_tau && secs < 300.0;
        report(7, ok,
               fmt("learnable tau: sphere %.3f (cold) vs %.3f (hot), gap %.1f%%, neg-trace %.3f, "
                   "%.0fs (budget 300s)",
                   cold.final_tau, hot.final_tau, 100.0 * gap, nt.final_tau, secs));
    }

    // 8. Backward-storage exponents: l2 grows with d, the inner-product kinds
    //    do not, the geodesic grows with the column count m.
    {
        double t0 = now_seconds();
        std::vector<StorageReport> sweep = default_sweep(7);
        double sphere_d = exponent_for(sweep, DistanceKind::SphereNegInner, 'd', false);
        double l2_d = exponent_for(sweep, DistanceKind::EuclideanL2, 'd', false);
        double nt_d = exponent_for(sweep, DistanceKind::ObliqueNegTrace, 'd', false);
        double geo_m = exponent_for(sweep, DistanceKind::ObliqueGeodesic, 'm', true);
        double secs = now_seconds() - t0;
        bool ok = std::fabs(l2_d - 1.0) <= 0.15 && std::fabs(sphere_d) <= 0.1 &&
                  std::fabs(nt_d) <= 0.1 && std::fabs(geo_m - 1.0) <= 0.15 && secs < 120.0;
        report(8, ok,
               fmt("storage exponents: l2 d %.3f, sphere d %.3f, neg-trace d %.3f, geodesic m "
                   "%.3f, %.1fs (budget 120s)",
                   l2_d, sphere_d, nt_d, geo_m, secs));
    }

    // 9. Multi-token subset trend on a trained Ob(8, 4) transformer run: half
    //    the sub-spheres stay well above chance, a single sub-sphere costs at
    //    least half the full recall.
    {
        ExperimentConfig c;
        c.name = "multi_8x4";
        c.distance = DistanceKind::ObliqueNegTrace;
        c.n = 8;
        c.m = 4;
        c.encoder = EncoderChoice::Transformer;
        c.transformer.layers = 1;
        c.transformer.heads = 2;
        c.transformer.model_dim = 32;
        c.transformer.ff_dim = 64;
        c.transformer.seq_len = 8;
        c.embed_dim = 32;
        c.lr = 1e-3;
        c.batch_size = 64;
        c.steps = 800;
        c.eval_every = 800;
        c.eval_size = 256;
        c.data.seed = 7;
        c.seed = 7;
        TrainResult r = train(c);
        double full = mean_recall(r);
        SubsetEvalResult half = token_subset_eval(r.eval_image_emb, r.eval_text_emb, 8, 4, 2, 6, 99);
        SubsetEvalResult one = token_subset_eval(r.eval_image_emb, r.eval_text_emb, 8, 4, 1, 4, 99);
        double half_mean = 0.5 * (half.mean_i2t + half.mean_t2i);
        double one_mean = 0.5 * (one.mean_i2t + one.mean_t2i);
        const double chance = 1.0 / 16.0;  // class-informed guessing ceiling
        bool ok = half_mean > 5.0 * chance && 2.0 * one_mean <= full;
        report(9, ok,
               fmt("token subsets: full %.3f, half %.3f (chance %.4f), single %.3f", full,
                   half_mean, chance, one_mean));
    }

    // 10. The whole pipeline fits the wall-clock budget.
    {
        double total = now_seconds();
        report(10, total < 900.0 && g_failures == 0,
               fmt("full pipeline %.0fs (budget 900s), %d earlier failures", total, g_failures));
    }

    return g_failures == 0 ? 0 : 1;
}
