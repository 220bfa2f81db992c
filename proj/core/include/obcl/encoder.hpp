#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "obcl/graph.hpp"
#include "obcl/params.hpp"

namespace obcl {

enum class Activation { Gelu, Relu };

struct MLPEncoderConfig {
    int64_t input_dim = 0;
    std::vector<int64_t> hidden_dims;
    int64_t output_dim = 0;
    Activation activation = Activation::Gelu;
    uint64_t seed = 0;
};

/// Plain feed-forward tower; zero hidden layers gives an affine map.
class MLPEncoder {
public:
    explicit MLPEncoder(MLPEncoderConfig cfg);

    /// x: (b, input_dim) -> (b, output_dim). leaves must align with params().
    Var forward(Graph& g, const std::vector<Var>& leaves, Var x) const;

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const MLPEncoderConfig& config() const { return cfg_; }

private:
    MLPEncoderConfig cfg_;
    ParamSet params_;
};

enum class Modality { Visual, Textual };

struct MiniTransformerConfig {
    int64_t layers = 2;
    int64_t heads = 2;
    int64_t model_dim = 32;
    int64_t ff_dim = 64;
    int64_t seq_len = 16;   // sequence tokens p (excluding [CLS] slots)
    int64_t cls_count = 1;  // m
    Modality modality = Modality::Visual;
    int64_t input_dim = 0;  // raw feature dim; chunked into seq_len pieces
    uint64_t seed = 0;
};

/// Pre-norm transformer with m [CLS] slots prepended to the sequence.
/// Visual: m independently initialized [CLS] embeddings (symmetry breaking).
/// Textual: one shared [CLS] embedding with m distinct positional embeddings.
class MiniTransformer {
public:
    explicit MiniTransformer(MiniTransformerConfig cfg);

    /// One sample: features (length input_dim) -> m [CLS] states, (m, model_dim).
    Var forward_sample(Graph& g, const std::vector<Var>& leaves, Var features) const;

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const MiniTransformerConfig& config() const { return cfg_; }
    int64_t parameter_count() const { return params_.total_elements(); }
    /// [CLS]-embedding parameters only (the multi-token overhead).
    int64_t cls_parameter_count() const;

private:
    Var block(Graph& g, const std::vector<Var>& leaves, Var x, int64_t layer) const;

    MiniTransformerConfig cfg_;
    ParamSet params_;
    int64_t chunk_dim_ = 0;
};

enum class EmbedNorm {
    None,   // Euclidean R^d
    Row,    // whole-vector normalization: sphere S^{l-1}
    Groups  // per-sub-sphere normalization: Ob(n, m)
};

struct HeadConfig {
    int64_t in_dim = 0;  // d of the encoder state
    int64_t n = 0;
    int64_t m = 1;
    EmbedNorm norm = EmbedNorm::Groups;
    bool multi_token = false;  // single reshape head vs per-[CLS]-state head
    bool per_token = true;     // multi-token heads: per-token vs shared projection
    bool identity = false;     // skip the linear map (requires matching dims)
    uint64_t seed = 0;
};

/// Maps encoder states to a flat embedding row of length n*m, column-major
/// (block g of n contiguous elements is sub-sphere g), then normalizes per
/// the configured topology.
class ProjectionHead {
public:
    explicit ProjectionHead(HeadConfig cfg);

    /// Single-token path: states (b, d) -> embeddings (b, n*m).
    Var forward_single(Graph& g, const std::vector<Var>& leaves, Var states) const;

    /// Multi-token path: one sample's [CLS] states (m, d) -> embedding (1, n*m).
    Var forward_multi(Graph& g, const std::vector<Var>& leaves, Var states) const;

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const HeadConfig& config() const { return cfg_; }

private:
    HeadConfig cfg_;
    ParamSet params_;
};

/// Truncated normal (|z| < 2) with std = 1/sqrt(fan_in).
Tensor init_projection(std::vector<int64_t> shape, int64_t fan_in, std::mt19937_64& rng);

std::vector<Var> make_leaves(Graph& g, const ParamSet& params);

}  // namespace obcl
