#pragma once

#include <cstdint>
#include <vector>

#include "obcl/distance.hpp"
#include "obcl/tensor.hpp"

namespace obcl {

struct RecallResult {
    double i2t = 0.0;  // image query, text candidates
    double t2i = 0.0;
};

/// Fraction of queries whose exact partner ranks within the k nearest
/// candidates. Distance ties resolve in favor of the lower candidate index.
RecallResult recall_at_k(const Tensor& image_emb, const Tensor& text_emb, DistanceKind kind,
                         int64_t n, int64_t m, int64_t k);

struct Histogram {
    std::vector<double> values;  // raw distances
    std::vector<int64_t> counts;
    double lo = 0.0, hi = 0.0;  // bin range
    double mean = 0.0, stddev = 0.0;
};

struct DistanceHistograms {
    Histogram positive;     // d(u_i, v_i)
    Histogram cross_neg;    // d(u_i, v_j), i != j
    Histogram image_image;  // d(u_i, u_j), i != j
    Histogram text_text;    // d(v_i, v_j), i != j
};

DistanceHistograms distance_histograms(const Tensor& image_emb, const Tensor& text_emb,
                                       DistanceKind kind, int64_t n, int64_t m, int64_t bins = 32);

struct UniformityAlignment {
    double alignment = 0.0;   // mean squared pair gap, lower is tighter
    double uniformity = 0.0;  // log mean Gaussian kernel over distinct pairs, <= 0
};

/// Wang-Isola style diagnostics over the pooled image+text embedding set.
UniformityAlignment uniformity_alignment(const Tensor& image_emb, const Tensor& text_emb);

struct SubsetEvalResult {
    double mean_i2t = 0.0, std_i2t = 0.0;
    double mean_t2i = 0.0, std_t2i = 0.0;
    std::vector<RecallResult> per_subset;
};

/// recall@1 restricted to random sub-sphere subsets of an Ob(n, m) embedding,
/// scored with the negative-trace distance on the kept columns.
SubsetEvalResult token_subset_eval(const Tensor& image_emb, const Tensor& text_emb, int64_t n,
                                   int64_t m, int64_t subset_size, int64_t num_subsets,
                                   uint64_t seed);

}  // namespace obcl
