#include "obcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "obcl/errors.hpp"
#include "obcl/rng.hpp"

namespace obcl {

namespace {

void check_emb(const Tensor& image_emb, const Tensor& text_emb, int64_t n, int64_t m) {
    if (image_emb.rank() != 2 || text_emb.rank() != 2)
        throw ShapeMismatch("metrics: embeddings must be rank 2");
    if (image_emb.shape[0] != text_emb.shape[0])
        throw ShapeMismatch("metrics: batch sizes differ, " + image_emb.shape_str() + " vs " +
                            text_emb.shape_str());
    if (image_emb.shape[1] != n * m || text_emb.shape[1] != n * m)
        throw ShapeMismatch("metrics: embedding width must be n*m");
}

// similarity holds negative distances; higher similarity means closer.
double recall_one_side(const Tensor& sim, int64_t k, bool by_row) {
    int64_t b = sim.shape[0];
    int64_t hits = 0;
    for (int64_t q = 0; q < b; ++q) {
        double own = sim.at(q, q);
        int64_t ahead = 0;
        for (int64_t c = 0; c < b; ++c) {
            if (c == q) continue;
            double s = by_row ? sim.at(q, c) : sim.at(c, q);
            if (s > own || (s == own && c < q)) ++ahead;
        }
        if (ahead < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(b);
}

Histogram make_histogram(std::vector<double> values, int64_t bins) {
    Histogram h;
    h.values = std::move(values);
    if (h.values.empty() || bins < 1) return h;
    auto [lo_it, hi_it] = std::minmax_element(h.values.begin(), h.values.end());
    h.lo = *lo_it;
    h.hi = *hi_it;
    double span = h.hi > h.lo ? h.hi - h.lo : 1.0;
    h.counts.assign(static_cast<size_t>(bins), 0);
    double sum = 0.0, sum2 = 0.0;
    for (double v : h.values) {
        auto bin = static_cast<int64_t>((v - h.lo) / span * static_cast<double>(bins));
        bin = std::min(bin, bins - 1);
        ++h.counts[static_cast<size_t>(bin)];
        sum += v;
        sum2 += v * v;
    }
    auto cnt = static_cast<double>(h.values.size());
    h.mean = sum / cnt;
    h.stddev = std::sqrt(std::max(0.0, sum2 / cnt - h.mean * h.mean));
    return h;
}

}  // namespace

RecallResult recall_at_k(const Tensor& image_emb, const Tensor& text_emb, DistanceKind kind,
                         int64_t n, int64_t m, int64_t k) {
    check_emb(image_emb, text_emb, n, m);
    if (k < 1) throw ConfigError("recall_at_k: k must be >= 1");
    if (image_emb.shape[0] < 2) throw BatchTooSmall("recall_at_k: need at least 2 pairs");
    Tensor sim = distance_matrix_value(kind, image_emb, text_emb, n, m);
    RecallResult r;
    r.i2t = recall_one_side(sim, k, true);
    r.t2i = recall_one_side(sim, k, false);
    return r;
}

DistanceHistograms distance_histograms(const Tensor& image_emb, const Tensor& text_emb,
                                       DistanceKind kind, int64_t n, int64_t m, int64_t bins) {
    check_emb(image_emb, text_emb, n, m);
    int64_t b = image_emb.shape[0];
    if (b < 2) throw BatchTooSmall("distance_histograms: need at least 2 pairs");
    Tensor it = distance_matrix_value(kind, image_emb, text_emb, n, m);
    Tensor ii = distance_matrix_value(kind, image_emb, image_emb, n, m);
    Tensor tt = distance_matrix_value(kind, text_emb, text_emb, n, m);

    std::vector<double> pos, cross, img, txt;
    for (int64_t i = 0; i < b; ++i) {
        pos.push_back(-it.at(i, i));
        for (int64_t j = 0; j < b; ++j) {
            if (i == j) continue;
            cross.push_back(-it.at(i, j));
            img.push_back(-ii.at(i, j));
            txt.push_back(-tt.at(i, j));
        }
    }
    DistanceHistograms out;
    out.positive = make_histogram(std::move(pos), bins);
    out.cross_neg = make_histogram(std::move(cross), bins);
    out.image_image = make_histogram(std::move(img), bins);
    out.text_text = make_histogram(std::move(txt), bins);
    return out;
}

UniformityAlignment uniformity_alignment(const Tensor& image_emb, const Tensor& text_emb) {
    if (image_emb.rank() != 2 || text_emb.rank() != 2 ||
        image_emb.shape[0] != text_emb.shape[0] || image_emb.shape[1] != text_emb.shape[1])
        throw ShapeMismatch("uniformity_alignment: embeddings must share shape");
    int64_t b = image_emb.shape[0], d = image_emb.shape[1];
    if (b < 2) throw BatchTooSmall("uniformity_alignment: need at least 2 pairs");

    auto sq_gap = [&](const Tensor& a, int64_t i, const Tensor& c, int64_t j) {
        double s = 0.0;
        for (int64_t x = 0; x < d; ++x) {
            double diff = a.at(i, x) - c.at(j, x);
            s += diff * diff;
        }
        return s;
    };

    UniformityAlignment r;
    for (int64_t i = 0; i < b; ++i) r.alignment += sq_gap(image_emb, i, text_emb, i);
    r.alignment /= static_cast<double>(b);

    // Pool both modalities, then average the kernel over distinct pairs.
    auto point = [&](int64_t idx, int64_t& row, const Tensor*& t) {
        if (idx < b) {
            row = idx;
            t = &image_emb;
        } else {
            row = idx - b;
            t = &text_emb;
        }
    };
    double acc = 0.0;
    int64_t pairs = 0;
    for (int64_t i = 0; i < 2 * b; ++i) {
        int64_t ri;
        const Tensor* ti;
        point(i, ri, ti);
        for (int64_t j = i + 1; j < 2 * b; ++j) {
            int64_t rj;
            const Tensor* tj;
            point(j, rj, tj);
            acc += std::exp(-2.0 * sq_gap(*ti, ri, *tj, rj));
            ++pairs;
        }
    }
    r.uniformity = std::log(acc / static_cast<double>(pairs));
    return r;
}

SubsetEvalResult token_subset_eval(const Tensor& image_emb, const Tensor& text_emb, int64_t n,
                                   int64_t m, int64_t subset_size, int64_t num_subsets,
                                   uint64_t seed) {
    check_emb(image_emb, text_emb, n, m);
    if (subset_size < 1 || subset_size > m)
        throw ConfigError("token_subset_eval: subset_size must be in [1, m]");
    if (num_subsets < 1) throw ConfigError("token_subset_eval: num_subsets must be >= 1");
    int64_t b = image_emb.shape[0];

    SubsetEvalResult out;
    std::vector<int64_t> order(static_cast<size_t>(m));
    for (int64_t s = 0; s < num_subsets; ++s) {
        std::iota(order.begin(), order.end(), 0);
        auto rng = stream_rng(seed, "token_subset", static_cast<uint64_t>(s));
        std::shuffle(order.begin(), order.end(), rng);

        Tensor img = Tensor::zeros({b, n * subset_size});
        Tensor txt = Tensor::zeros({b, n * subset_size});
        for (int64_t g = 0; g < subset_size; ++g) {
            int64_t src = order[static_cast<size_t>(g)];
            for (int64_t r = 0; r < b; ++r)
                for (int64_t c = 0; c < n; ++c) {
                    img.at(r, g * n + c) = image_emb.at(r, src * n + c);
                    txt.at(r, g * n + c) = text_emb.at(r, src * n + c);
                }
        }
        out.per_subset.push_back(
            recall_at_k(img, txt, DistanceKind::ObliqueNegTrace, n, subset_size, 1));
    }

    auto stats = [&](auto get, double& mean, double& sd) {
        double s = 0.0, s2 = 0.0;
        for (const auto& r : out.per_subset) {
            double v = get(r);
            s += v;
            s2 += v * v;
        }
        auto cnt = static_cast<double>(out.per_subset.size());
        mean = s / cnt;
        sd = std::sqrt(std::max(0.0, s2 / cnt - mean * mean));
    };
    stats([](const RecallResult& r) { return r.i2t; }, out.mean_i2t, out.std_i2t);
    stats([](const RecallResult& r) { return r.t2i; }, out.mean_t2i, out.std_t2i);
    return out;
}

}  // namespace obcl
