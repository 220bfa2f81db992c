#include <cmath>
#include <sstream>

#include "doctest.h"
#include "obcl/checkpoint.hpp"
#include "obcl/distance.hpp"
#include "obcl/encoder.hpp"
#include "obcl/errors.hpp"
#include "obcl/geometry.hpp"
#include "obcl/gradcheck.hpp"
#include "obcl/rng.hpp"

using namespace obcl;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::vector<int64_t> shape, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("affine MLP with identity weights is the identity") {
    MLPEncoderConfig cfg;
    cfg.input_dim = 3;
    cfg.output_dim = 3;
    MLPEncoder enc(cfg);
    Tensor* w = enc.params().find("w0");
    REQUIRE(w != nullptr);
    *w = Tensor::zeros({3, 3});
    for (int64_t i = 0; i < 3; ++i) w->at(i, i) = 1.0;

    Graph g;
    auto leaves = make_leaves(g, enc.params());
    Tensor x({2, 3}, {1.0, -2.0, 0.5, 3.0, 0.0, -1.0});
    Var y = enc.forward(g, leaves, g.leaf(x));
    CHECK(g.value(y).data == x.data);
}

TEST_CASE("encoders are deterministic given the seed") {
    MLPEncoderConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden_dims = {8};
    cfg.output_dim = 4;
    cfg.seed = 99;
    MLPEncoder a(cfg), b(cfg);
    REQUIRE(a.params().size() == b.params().size());
    for (size_t i = 0; i < a.params().size(); ++i)
        CHECK(a.params().values[i].data == b.params().values[i].data);

    MiniTransformerConfig tc;
    tc.input_dim = 16;
    tc.seq_len = 4;
    tc.cls_count = 2;
    tc.seed = 99;
    MiniTransformer ta(tc), tb(tc);
    auto rng = stream_rng(1, "det_input");
    Tensor feats = random_tensor(rng, {1, 16});
    Graph g1, g2;
    Var y1 = ta.forward_sample(g1, make_leaves(g1, ta.params()), g1.leaf(feats));
    Var y2 = tb.forward_sample(g2, make_leaves(g2, tb.params()), g2.leaf(feats));
    CHECK(g1.value(y1).data == g2.value(y2).data);
}

TEST_CASE("MLP gradcheck w.r.t. input") {
    MLPEncoderConfig cfg;
    cfg.input_dim = 5;
    cfg.hidden_dims = {6};
    cfg.output_dim = 3;
    cfg.seed = 7;
    MLPEncoder enc(cfg);
    auto rng = stream_rng(2, "mlp_gc");
    Tensor x = random_tensor(rng, {2, 5});
    double err = gradcheck(
        [&](Graph& g, const std::vector<Var>& v) {
            auto leaves = make_leaves(g, enc.params());
            Var y = enc.forward(g, leaves, v[0]);
            return g.sum(g.mul(y, y));
        },
        {x});
    CHECK(err < 1e-5);
}

TEST_CASE("transformer output shape is (m, model_dim)") {
    for (int64_t m : {1, 3}) {
        MiniTransformerConfig tc;
        tc.input_dim = 24;
        tc.seq_len = 6;
        tc.cls_count = m;
        tc.modality = Modality::Textual;
        MiniTransformer enc(tc);
        Graph g;
        auto rng = stream_rng(3, "tf_shape", static_cast<uint64_t>(m));
        Var y = enc.forward_sample(g, make_leaves(g, enc.params()),
                                   g.leaf(random_tensor(rng, {1, 24})));
        CHECK(g.value(y).shape == std::vector<int64_t>{m, tc.model_dim});
    }
}

TEST_CASE("zeroed mixing weights reduce [CLS] outputs to layer norm of their embeddings") {
    MiniTransformerConfig tc;
    tc.input_dim = 16;
    tc.seq_len = 4;
    tc.cls_count = 3;
    tc.modality = Modality::Visual;
    tc.seed = 5;
    MiniTransformer enc(tc);
    for (size_t i = 0; i < enc.params().size(); ++i) {
        const std::string& name = enc.params().names[i];
        for (const char* w : {"wq", "wk", "wv", "wo", "w1", "w2"})
            if (name.size() > 2 && name.substr(name.size() - 2) == w)
                enc.params().values[i] = Tensor::zeros(enc.params().values[i].shape);
    }

    auto rng = stream_rng(4, "tf_zero");
    Graph g;
    auto leaves = make_leaves(g, enc.params());
    Var y = enc.forward_sample(g, leaves, g.leaf(random_tensor(rng, {1, 16})));

    // residual stream untouched, so output = LN(cls_emb + cls_pos) rowwise
    Tensor cls_in = *enc.params().find("cls_emb");
    const Tensor& pos = *enc.params().find("cls_pos");
    for (size_t i = 0; i < cls_in.data.size(); ++i) cls_in.data[i] += pos.data[i];
    Graph ref;
    Var expect = ref.layer_norm(ref.leaf(cls_in));
    const Tensor& got = g.value(y);
    const Tensor& want = ref.value(expect);
    REQUIRE(got.shape == want.shape);
    for (size_t i = 0; i < got.data.size(); ++i)
        CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));

    // distinct rows: the independently drawn embeddings break symmetry
    for (int64_t a = 0; a < 3; ++a)
        for (int64_t b = a + 1; b < 3; ++b) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (int64_t c = 0; c < tc.model_dim; ++c) {
                dot += got.at(a, c) * got.at(b, c);
                na += got.at(a, c) * got.at(a, c);
                nb += got.at(b, c) * got.at(b, c);
            }
            CHECK(dot / std::sqrt(na * nb) < 1.0 - 1e-6);
        }
}

TEST_CASE("visual [CLS] parameter accounting is m * model_dim") {
    for (int64_t m : {1, 4, 8}) {
        MiniTransformerConfig tc;
        tc.input_dim = 16;
        tc.seq_len = 4;
        tc.cls_count = m;
        tc.modality = Modality::Visual;
        MiniTransformer enc(tc);
        CHECK(enc.cls_parameter_count() == m * tc.model_dim);
    }
    // textual towers share one embedding regardless of m
    MiniTransformerConfig tc;
    tc.input_dim = 16;
    tc.seq_len = 4;
    tc.cls_count = 8;
    tc.modality = Modality::Textual;
    CHECK(MiniTransformer(tc).cls_parameter_count() == tc.model_dim);
}

TEST_CASE("every [CLS] embedding receives gradient at init") {
    MiniTransformerConfig tc;
    tc.input_dim = 16;
    tc.seq_len = 4;
    tc.cls_count = 4;
    tc.modality = Modality::Visual;
    tc.seed = 12;
    MiniTransformer enc(tc);
    Graph g;
    auto leaves = make_leaves(g, enc.params());
    auto rng = stream_rng(13, "cls_grad");
    Var y = enc.forward_sample(g, leaves, g.leaf(random_tensor(rng, {1, 16})));
    g.backward(g.sum(g.mul(y, y)));
    int cls_idx = enc.params().index_of("cls_emb");
    const Tensor& grad = g.grad(leaves[static_cast<size_t>(cls_idx)]);
    for (int64_t token = 0; token < 4; ++token) {
        double norm = 0.0;
        for (int64_t c = 0; c < tc.model_dim; ++c) norm += grad.at(token, c) * grad.at(token, c);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("single head: identity projection matches reshape_to_oblique") {
    HeadConfig hc;
    hc.in_dim = 4;
    hc.n = 2;
    hc.m = 2;
    hc.identity = true;
    ProjectionHead head(hc);
    Graph g;
    Tensor state({1, 4}, {3.0, 4.0, 0.0, 1.0});
    Var y = head.forward_single(g, {}, g.leaf(state));
    const Tensor& yv = g.value(y);
    // column 0 = [0.6, 0.8], column 1 = [0, 1]
    CHECK(yv.at(0, 0) == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(yv.at(0, 1) == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(yv.at(0, 2) == doctest::Approx(0.0));
    CHECK(yv.at(0, 3) == doctest::Approx(1.0).epsilon(1e-9));
    ObliquePoint p{2, 2, g.value(y).data};
    validate(p, 1e-8);

    ObliquePoint ref = reshape_to_oblique({{3.0, 4.0, 0.0, 1.0}}, 2, 2);
    for (size_t i = 0; i < ref.data.size(); ++i)
        CHECK(yv.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
}

TEST_CASE("single head gradcheck") {
    HeadConfig hc;
    hc.in_dim = 5;
    hc.n = 3;
    hc.m = 2;
    hc.seed = 21;
    ProjectionHead head(hc);
    auto rng = stream_rng(22, "head_gc");
    Tensor x = random_tensor(rng, {2, 5});
    Tensor w = random_tensor(rng, {2, 6});
    double err = gradcheck(
        [&](Graph& g, const std::vector<Var>& v) {
            auto leaves = make_leaves(g, head.params());
            Var y = head.forward_single(g, leaves, v[0]);
            return g.sum(g.mul(y, g.leaf(w)));
        },
        {x});
    CHECK(err < 1e-5);
}

TEST_CASE("multi head: m=1 equals project_sphere, identical towers give -m") {
    auto rng = stream_rng(23, "head_multi");
    {
        HeadConfig hc;
        hc.in_dim = 4;
        hc.n = 4;
        hc.m = 1;
        hc.multi_token = true;
        hc.identity = true;
        ProjectionHead head(hc);
        Tensor state = random_tensor(rng, {1, 4});
        Graph g;
        Var y = head.forward_multi(g, {}, g.leaf(state));
        SpherePoint sp = project_sphere({state.data});
        for (size_t i = 0; i < sp.vec.size(); ++i)
            CHECK(g.value(y).data[i] == doctest::Approx(sp.vec[i]).epsilon(1e-12));
    }
    {
        HeadConfig hc;
        hc.in_dim = 6;
        hc.n = 3;
        hc.m = 2;
        hc.multi_token = true;
        hc.seed = 24;
        ProjectionHead head(hc);
        Tensor states = random_tensor(rng, {2, 6});
        Graph g;
        auto leaves = make_leaves(g, head.params());
        Var y = head.forward_multi(g, leaves, g.leaf(states));
        validate(ObliquePoint{3, 2, g.value(y).data}, 1e-8);
        Tensor d = distance_matrix_value(DistanceKind::ObliqueNegTrace, g.value(y), g.value(y), 3, 2);
        CHECK(d.at(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    MiniTransformerConfig tc;
    tc.input_dim = 16;
    tc.seq_len = 4;
    tc.cls_count = 2;
    tc.seed = 31;
    MiniTransformer enc(tc);
    std::vector<std::pair<std::string, Tensor>> entries;
    for (size_t i = 0; i < enc.params().size(); ++i)
        entries.emplace_back(enc.params().names[i], enc.params().values[i]);
    entries.emplace_back("t", Tensor::scalar(-1.2345678901234567e-3));

    std::stringstream ss;
    save_checkpoint(ss, entries);
    auto loaded = load_checkpoint(ss);
    REQUIRE(loaded.size() == entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
        CHECK(loaded[i].first == entries[i].first);
        CHECK(loaded[i].second.shape == entries[i].second.shape);
        CHECK(loaded[i].second.data == entries[i].second.data);
    }

    std::stringstream bad("obcl-checkpoint v9\n0\n");
    CHECK_THROWS_AS(load_checkpoint(bad), Error);
}
