#include "obcl/encoder.hpp"

#include <cmath>

#include "obcl/errors.hpp"
#include "obcl/rng.hpp"

namespace obcl {

Tensor init_projection(std::vector<int64_t> shape, int64_t fan_in, std::mt19937_64& rng) {
    double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) {
        double z;
        do {
            z = dist(rng);
        } while (std::abs(z) >= 2.0);
        v = z * std;
    }
    return t;
}

std::vector<Var> make_leaves(Graph& g, const ParamSet& params) {
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const Tensor& t : params.values) leaves.push_back(g.leaf(t));
    return leaves;
}

// ---------------------------------------------------------------------------
// MLP

MLPEncoder::MLPEncoder(MLPEncoderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.input_dim < 1 || cfg_.output_dim < 1)
        throw ConfigError("MLPEncoder: dims must be >= 1");
    for (int64_t h : cfg_.hidden_dims)
        if (h < 1) throw ConfigError("MLPEncoder: hidden dims must be >= 1");
    auto rng = stream_rng(cfg_.seed, "mlp_encoder");
    int64_t in = cfg_.input_dim;
    for (size_t i = 0; i <= cfg_.hidden_dims.size(); ++i) {
        int64_t out = i < cfg_.hidden_dims.size() ? cfg_.hidden_dims[i] : cfg_.output_dim;
        std::string tag = std::to_string(i);
        params_.add("w" + tag, init_projection({in, out}, in, rng));
        params_.add("b" + tag, Tensor::zeros({out}));
        in = out;
    }
}

Var MLPEncoder::forward(Graph& g, const std::vector<Var>& leaves, Var x) const {
    const Tensor& xv = g.value(x);
    if (xv.rank() != 2 || xv.shape[1] != cfg_.input_dim)
        throw ShapeMismatch("MLPEncoder: expected (b, " + std::to_string(cfg_.input_dim) +
                            "), got " + xv.shape_str());
    size_t n_layers = cfg_.hidden_dims.size() + 1;
    Var h = x;
    for (size_t i = 0; i < n_layers; ++i) {
        h = g.add_rowvec(g.matmul(h, leaves[2 * i]), leaves[2 * i + 1]);
        if (i + 1 < n_layers)
            h = cfg_.activation == Activation::Gelu ? g.gelu(h) : g.relu(h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// MiniTransformer

MiniTransformer::MiniTransformer(MiniTransformerConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.model_dim % cfg_.heads != 0)
        throw ConfigError("MiniTransformer: model_dim must be divisible by heads");
    if (cfg_.cls_count < 1) throw ConfigError("MiniTransformer: cls_count must be >= 1");
    if (cfg_.input_dim % cfg_.seq_len != 0)
        throw ConfigError("MiniTransformer: input_dim must be divisible by seq_len");
    chunk_dim_ = cfg_.input_dim / cfg_.seq_len;

    auto rng = stream_rng(cfg_.seed, cfg_.modality == Modality::Visual ? "vis_transformer"
                                                                       : "txt_transformer");
    int64_t d = cfg_.model_dim, m = cfg_.cls_count;

    // Learned map from raw feature chunks to token embeddings.
    params_.add("embed_w", init_projection({chunk_dim_, d}, chunk_dim_, rng));
    params_.add("embed_b", Tensor::zeros({d}));
    params_.add("pos_seq", init_projection({cfg_.seq_len, d}, d, rng));

    if (cfg_.modality == Modality::Visual) {
        // m independent [CLS] embeddings break the symmetry between tokens.
        params_.add("cls_emb", init_projection({m, d}, d, rng));
    } else {
        params_.add("cls_emb", init_projection({1, d}, d, rng));
    }
    // Fixed-slot positional embeddings for the [CLS] tokens; for the textual
    // tower these are what distinguish the m copies.
    params_.add("cls_pos", init_projection({m, d}, d, rng));

    for (int64_t l = 0; l < cfg_.layers; ++l) {
        std::string p = "l" + std::to_string(l) + ".";
        params_.add(p + "ln1_g", Tensor::full({d}, 1.0));
        params_.add(p + "ln1_b", Tensor::zeros({d}));
        params_.add(p + "wq", init_projection({d, d}, d, rng));
        params_.add(p + "bq", Tensor::zeros({d}));
        params_.add(p + "wk", init_projection({d, d}, d, rng));
        params_.add(p + "bk", Tensor::zeros({d}));
        params_.add(p + "wv", init_projection({d, d}, d, rng));
        params_.add(p + "bv", Tensor::zeros({d}));
        params_.add(p + "wo", init_projection({d, d}, d, rng));
        params_.add(p + "bo", Tensor::zeros({d}));
        params_.add(p + "ln2_g", Tensor::full({d}, 1.0));
        params_.add(p + "ln2_b", Tensor::zeros({d}));
        params_.add(p + "w1", init_projection({d, cfg_.ff_dim}, d, rng));
        params_.add(p + "b1", Tensor::zeros({cfg_.ff_dim}));
        params_.add(p + "w2", init_projection({cfg_.ff_dim, d}, cfg_.ff_dim, rng));
        params_.add(p + "b2", Tensor::zeros({d}));
    }
    params_.add("lnf_g", Tensor::full({d}, 1.0));
    params_.add("lnf_b", Tensor::zeros({d}));
}

int64_t MiniTransformer::cls_parameter_count() const {
    int i = params_.index_of("cls_emb");
    return params_.values[static_cast<size_t>(i)].size();
}

Var MiniTransformer::block(Graph& g, const std::vector<Var>& leaves, Var x, int64_t layer) const {
    auto idx = [&](const std::string& name) {
        int i = params_.index_of("l" + std::to_string(layer) + "." + name);
        return leaves[static_cast<size_t>(i)];
    };
    int64_t d = cfg_.model_dim, h = cfg_.heads, hd = d / h;
    int64_t s = g.value(x).shape[0];

    Var xn = g.add_rowvec(g.mul_rowvec(g.layer_norm(x), idx("ln1_g")), idx("ln1_b"));
    Var q = g.add_rowvec(g.matmul(xn, idx("wq")), idx("bq"));
    Var k = g.add_rowvec(g.matmul(xn, idx("wk")), idx("bk"));
    Var v = g.add_rowvec(g.matmul(xn, idx("wv")), idx("bv"));

    std::vector<Var> head_outs;
    for (int64_t i = 0; i < h; ++i) {
        Var qi = g.slice(q, 0, s, i * hd, (i + 1) * hd);
        Var ki = g.slice(k, 0, s, i * hd, (i + 1) * hd);
        Var vi = g.slice(v, 0, s, i * hd, (i + 1) * hd);
        Var scores = g.scalar_mul(g.matmul(qi, g.transpose(ki)), 1.0 / std::sqrt(static_cast<double>(hd)));
        Var attn = g.softmax(scores, 1);
        head_outs.push_back(g.matmul(attn, vi));
    }
    Var o = g.concat(head_outs, 1);
    Var attn_out = g.add_rowvec(g.matmul(o, idx("wo")), idx("bo"));
    x = g.add(x, attn_out);

    Var xn2 = g.add_rowvec(g.mul_rowvec(g.layer_norm(x), idx("ln2_g")), idx("ln2_b"));
    Var hmid = g.gelu(g.add_rowvec(g.matmul(xn2, idx("w1")), idx("b1")));
    Var mlp_out = g.add_rowvec(g.matmul(hmid, idx("w2")), idx("b2"));
    return g.add(x, mlp_out);
}

Var MiniTransformer::forward_sample(Graph& g, const std::vector<Var>& leaves, Var features) const {
    const Tensor& fv = g.value(features);
    if (fv.size() != cfg_.input_dim)
        throw ShapeMismatch("MiniTransformer: expected " + std::to_string(cfg_.input_dim) +
                            " features, got " + fv.shape_str());
    auto at = [&](const std::string& name) {
        return leaves[static_cast<size_t>(params_.index_of(name))];
    };
    int64_t m = cfg_.cls_count, p = cfg_.seq_len;

    Var chunks = g.reshape(features, {p, chunk_dim_});
    Var tokens = g.add(g.add_rowvec(g.matmul(chunks, at("embed_w")), at("embed_b")),
                       at("pos_seq"));

    Var cls;
    if (cfg_.modality == Modality::Visual) {
        cls = g.add(at("cls_emb"), at("cls_pos"));
    } else {
        // shared token embedding replicated over the m slots
        std::vector<Var> reps(static_cast<size_t>(m), at("cls_emb"));
        Var stacked = m == 1 ? at("cls_emb") : g.concat(reps, 0);
        cls = g.add(stacked, at("cls_pos"));
    }

    Var x = g.concat({cls, tokens}, 0);
    for (int64_t l = 0; l < cfg_.layers; ++l) x = block(g, leaves, x, l);
    x = g.add_rowvec(g.mul_rowvec(g.layer_norm(x), at("lnf_g")), at("lnf_b"));
    return g.slice(x, 0, m, 0, cfg_.model_dim);
}

// ---------------------------------------------------------------------------
// ProjectionHead

ProjectionHead::ProjectionHead(HeadConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.n < 1 || cfg_.m < 1) throw ConfigError("ProjectionHead: n, m must be >= 1");
    int64_t l = cfg_.n * cfg_.m;
    if (cfg_.identity) {
        if (cfg_.in_dim != l && cfg_.in_dim != cfg_.n)
            throw ConfigError("ProjectionHead: identity head requires matching dims");
        return;
    }
    auto rng = stream_rng(cfg_.seed, "projection_head");
    if (!cfg_.multi_token) {
        // single reshape head: one d -> n*m map, whatever m is
        params_.add("proj", init_projection({cfg_.in_dim, l}, cfg_.in_dim, rng));
    } else if (cfg_.per_token) {
        for (int64_t t = 0; t < cfg_.m; ++t)
            params_.add("proj" + std::to_string(t),
                        init_projection({cfg_.in_dim, cfg_.n}, cfg_.in_dim, rng));
    } else {
        params_.add("proj", init_projection({cfg_.in_dim, cfg_.n}, cfg_.in_dim, rng));
    }
}

Var ProjectionHead::forward_single(Graph& g, const std::vector<Var>& leaves, Var states) const {
    const Tensor& sv = g.value(states);
    if (sv.rank() != 2 || sv.shape[1] != cfg_.in_dim)
        throw ShapeMismatch("ProjectionHead: expected (b, " + std::to_string(cfg_.in_dim) +
                            "), got " + sv.shape_str());
    int64_t l = cfg_.n * cfg_.m;
    Var emb;
    if (cfg_.identity) {
        if (cfg_.in_dim != l)
            throw ShapeMismatch("ProjectionHead: identity single head requires in_dim == n*m");
        emb = states;
    } else {
        // single-token path uses one d -> l map regardless of per_token
        if (g.value(leaves[0]).shape[1] != l)
            throw ShapeMismatch("ProjectionHead: single head projection must map to n*m");
        emb = g.matmul(states, leaves[0]);
    }
    switch (cfg_.norm) {
        case EmbedNorm::None: return emb;
        case EmbedNorm::Row: return g.l2_normalize(emb, l);
        case EmbedNorm::Groups: return g.l2_normalize(emb, cfg_.n);
    }
    throw Error("ProjectionHead: unknown norm");
}

Var ProjectionHead::forward_multi(Graph& g, const std::vector<Var>& leaves, Var states) const {
    const Tensor& sv = g.value(states);
    if (sv.rank() != 2 || sv.shape[0] != cfg_.m || sv.shape[1] != cfg_.in_dim)
        throw ShapeMismatch("ProjectionHead: expected (" + std::to_string(cfg_.m) + ", " +
                            std::to_string(cfg_.in_dim) + ") states, got " + sv.shape_str());
    std::vector<Var> cols;
    for (int64_t t = 0; t < cfg_.m; ++t) {
        Var state = g.slice(states, t, t + 1, 0, cfg_.in_dim);  // (1, d)
        Var proj;
        if (cfg_.identity) {
            proj = state;
        } else {
            Var w = cfg_.per_token ? leaves[static_cast<size_t>(t)] : leaves[0];
            proj = g.matmul(state, w);  // (1, n)
        }
        cols.push_back(g.l2_normalize(proj, cfg_.n));
    }
    return g.concat(cols, 1);  // (1, n*m), block t = sub-sphere t
}

}  // namespace obcl
