#include "obcl/graph.hpp"

#include <algorithm>
#include <cmath>

namespace obcl {

namespace {

constexpr double kPi = 3.14159265358979323846;

// C += or = A * B with A (p x q), B (q x r); ikj loop order.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    int64_t p = a.shape[0], q = a.shape[1], r = b.shape[1];
    if (!accumulate) std::fill(c.data.begin(), c.data.end(), 0.0);
    for (int64_t i = 0; i < p; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i * q)];
        double* crow = &c.data[static_cast<size_t>(i * r)];
        for (int64_t k = 0; k < q; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.data[static_cast<size_t>(k * r)];
            for (int64_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
        }
    }
}

Tensor transpose_tensor(const Tensor& a) {
    Tensor t = Tensor::zeros({a.shape[1], a.shape[0]});
    for (int64_t i = 0; i < a.shape[0]; ++i)
        for (int64_t j = 0; j < a.shape[1]; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeMismatch(std::string(op) + ": expected rank-2 tensor, got " + t.shape_str());
}

void require_finite(const Tensor& t, const char* op) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
}

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_bwd(double x) {
    return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) +
           0.5 * x * std::sqrt(2.0 / kPi) * std::exp(-0.5 * x * x);
}

}  // namespace

void Graph::check(Var v, const char* op) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw Error(std::string(op) + ": variable not on this graph");
}

int Graph::push(Node n) {
    n.tag = current_tag_;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Graph::leaf(Tensor t) {
    Node n{Op::Leaf, {}, std::move(t), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::add(Var a, Var b) {
    check(a, "add");
    check(b, "add");
    require_same_shape("add", val(a.id), val(b.id));
    Tensor out = val(a.id);
    for (int64_t i = 0; i < out.size(); ++i) out.at(i) += val(b.id).at(i);
    Node n{Op::Add, {a.id, b.id}, std::move(out), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::sub(Var a, Var b) {
    check(a, "sub");
    check(b, "sub");
    require_same_shape("sub", val(a.id), val(b.id));
    Tensor out = val(a.id);
    for (int64_t i = 0; i < out.size(); ++i) out.at(i) -= val(b.id).at(i);
    Node n{Op::Sub, {a.id, b.id}, std::move(out), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::mul(Var a, Var b) {
    check(a, "mul");
    check(b, "mul");
    require_same_shape("mul", val(a.id), val(b.id));
    Tensor out = val(a.id);
    for (int64_t i = 0; i < out.size(); ++i) out.at(i) *= val(b.id).at(i);
    Node n{Op::Mul, {a.id, b.id}, std::move(out), {}, {}, {}, 0, static_cast<double>(out.size())};
    return Var{push(std::move(n))};
}

Var Graph::neg(Var a) {
    check(a, "neg");
    Tensor out = val(a.id);
    for (double& v : out.data) v = -v;
    Node n{Op::Neg, {a.id}, std::move(out), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::scalar_mul(Var a, double c) {
    check(a, "scalar_mul");
    Tensor out = val(a.id);
    for (double& v : out.data) v *= c;
    Node n{Op::ScalarMul, {a.id}, std::move(out), {}, {}, {c}, 0, static_cast<double>(out.size())};
    return Var{push(std::move(n))};
}

Var Graph::mul_scalar_var(Var a, Var s) {
    check(a, "mul_scalar_var");
    check(s, "mul_scalar_var");
    if (val(s.id).size() != 1) throw ShapeMismatch("mul_scalar_var: scalar operand must have one element");
    double c = val(s.id).at(0);
    Tensor out = val(a.id);
    for (double& v : out.data) v *= c;
    Node n{Op::MulScalarVar, {a.id, s.id}, std::move(out), {}, {}, {}, 0,
           static_cast<double>(val(a.id).size())};
    return Var{push(std::move(n))};
}

Var Graph::add_rowvec(Var x, Var v) {
    check(x, "add_rowvec");
    check(v, "add_rowvec");
    const Tensor& xv = val(x.id);
    const Tensor& vv = val(v.id);
    require_rank2(xv, "add_rowvec");
    if (vv.size() != xv.shape[1])
        throw ShapeMismatch("add_rowvec: vector length " + vv.shape_str() + " vs row length of " + xv.shape_str());
    Tensor out = xv;
    for (int64_t i = 0; i < xv.shape[0]; ++i)
        for (int64_t j = 0; j < xv.shape[1]; ++j) out.at(i, j) += vv.at(j);
    Node n{Op::AddRowVec, {x.id, v.id}, std::move(out), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::mul_rowvec(Var x, Var v) {
    check(x, "mul_rowvec");
    check(v, "mul_rowvec");
    const Tensor& xv = val(x.id);
    const Tensor& vv = val(v.id);
    require_rank2(xv, "mul_rowvec");
    if (vv.size() != xv.shape[1])
        throw ShapeMismatch("mul_rowvec: vector length " + vv.shape_str() + " vs row length of " + xv.shape_str());
    Tensor out = xv;
    for (int64_t i = 0; i < xv.shape[0]; ++i)
        for (int64_t j = 0; j < xv.shape[1]; ++j) out.at(i, j) *= vv.at(j);
    Node n{Op::MulRowVec, {x.id, v.id}, std::move(out), {}, {}, {}, 0,
           static_cast<double>(xv.size())};
    return Var{push(std::move(n))};
}

Var Graph::matmul(Var a, Var b) {
    check(a, "matmul");
    check(b, "matmul");
    const Tensor& av = val(a.id);
    const Tensor& bv = val(b.id);
    require_rank2(av, "matmul");
    require_rank2(bv, "matmul");
    if (av.shape[1] != bv.shape[0])
        throw ShapeMismatch("matmul: inner dimensions " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out = Tensor::zeros({av.shape[0], bv.shape[1]});
    matmul_into(av, bv, out, false);
    double fl = static_cast<double>(av.shape[0]) * av.shape[1] * bv.shape[1];
    Node n{Op::MatMul, {a.id, b.id}, std::move(out), {}, {}, {}, 0, fl};
    return Var{push(std::move(n))};
}

Var Graph::transpose(Var a) {
    check(a, "transpose");
    require_rank2(val(a.id), "transpose");
    Node n{Op::Transpose, {a.id}, transpose_tensor(val(a.id)), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::exp(Var a) {
    check(a, "exp");
    Tensor out = val(a.id);
    for (double& v : out.data) v = std::exp(v);
    Node n{Op::Exp, {a.id}, std::move(out), {}, {}, {}, 0, static_cast<double>(out.size())};
    return Var{push(std::move(n))};
}

Var Graph::log(Var a) {
    check(a, "log");
    Tensor out = val(a.id);
    for (double& v : out.data) v = std::log(v);
    Node n{Op::Log, {a.id}, std::move(out), {}, {}, {}, 0, static_cast<double>(out.size())};
    return Var{push(std::move(n))};
}

Var Graph::relu(Var a) {
    check(a, "relu");
    Tensor out = val(a.id);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    Node n{Op::Relu, {a.id}, std::move(out), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::gelu(Var a) {
    check(a, "gelu");
    Tensor out = val(a.id);
    for (double& v : out.data) v = gelu_fwd(v);
    Node n{Op::Gelu, {a.id}, std::move(out), {}, {}, {}, 0, static_cast<double>(out.size())};
    return Var{push(std::move(n))};
}

Var Graph::layer_norm(Var x, double eps) {
    check(x, "layer_norm");
    const Tensor& xv = val(x.id);
    int64_t r = xv.rows(), c = xv.cols();
    Tensor out = xv;
    Tensor inv_std = Tensor::zeros({r});
    for (int64_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (int64_t j = 0; j < c; ++j) mu += xv.at(i * c + j);
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            double d = xv.at(i * c + j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        double s = 1.0 / std::sqrt(var + eps);
        inv_std.at(i) = s;
        for (int64_t j = 0; j < c; ++j) out.at(i * c + j) = (xv.at(i * c + j) - mu) * s;
    }
    Node n{Op::LayerNorm, {x.id}, std::move(out), {}, {}, {eps}, 0, 5.0 * static_cast<double>(xv.size())};
    n.saved.push_back(n.value);       // normalized output
    n.saved.push_back(std::move(inv_std));
    return Var{push(std::move(n))};
}

Var Graph::softmax(Var x, int axis) {
    check(x, "softmax");
    const Tensor& xv = val(x.id);
    if (xv.rank() == 1 && axis != 0) throw ShapeMismatch("softmax: axis out of range for rank-1 input");
    if (xv.rank() == 2 && axis != 0 && axis != 1) throw ShapeMismatch("softmax: axis out of range");
    Tensor out = xv;
    int64_t r = xv.rows(), c = xv.cols();
    bool rows = (xv.rank() == 1) || axis == 1;
    int64_t outer = rows ? r : c;
    int64_t inner = rows ? c : r;
    for (int64_t i = 0; i < outer; ++i) {
        auto idx = [&](int64_t k) { return rows ? i * c + k : k * c + i; };
        double mx = -1e300;
        for (int64_t k = 0; k < inner; ++k) mx = std::max(mx, xv.at(idx(k)));
        double z = 0.0;
        for (int64_t k = 0; k < inner; ++k) z += std::exp(xv.at(idx(k)) - mx);
        for (int64_t k = 0; k < inner; ++k) out.at(idx(k)) = std::exp(xv.at(idx(k)) - mx) / z;
    }
    Node n{Op::Softmax, {x.id}, std::move(out), {}, {rows ? int64_t{1} : int64_t{0}}, {}, 0,
           3.0 * static_cast<double>(xv.size())};
    n.saved.push_back(n.value);
    return Var{push(std::move(n))};
}

Var Graph::reshape(Var x, std::vector<int64_t> shape) {
    check(x, "reshape");
    const Tensor& xv = val(x.id);
    if (Tensor::numel(shape) != xv.size())
        throw ShapeMismatch("reshape: element count mismatch " + xv.shape_str());
    Tensor out(shape, xv.data);
    Node n{Op::Reshape, {x.id}, std::move(out), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::concat(const std::vector<Var>& xs, int axis) {
    if (xs.empty()) throw ShapeMismatch("concat: no inputs");
    if (axis != 0 && axis != 1) throw ShapeMismatch("concat: axis out of range");
    for (Var v : xs) {
        check(v, "concat");
        require_rank2(val(v.id), "concat");
    }
    int64_t fixed = axis == 0 ? val(xs[0].id).shape[1] : val(xs[0].id).shape[0];
    int64_t total = 0;
    for (Var v : xs) {
        const Tensor& t = val(v.id);
        int64_t f = axis == 0 ? t.shape[1] : t.shape[0];
        if (f != fixed) throw ShapeMismatch("concat: incompatible shapes");
        total += axis == 0 ? t.shape[0] : t.shape[1];
    }
    Tensor out = axis == 0 ? Tensor::zeros({total, fixed}) : Tensor::zeros({fixed, total});
    int64_t off = 0;
    Node n{Op::Concat, {}, {}, {}, {static_cast<int64_t>(axis)}, {}, 0, 0.0};
    for (Var v : xs) {
        const Tensor& t = val(v.id);
        if (axis == 0) {
            std::copy(t.data.begin(), t.data.end(), out.data.begin() + off * fixed);
            n.iargs.push_back(t.shape[0]);
            off += t.shape[0];
        } else {
            for (int64_t i = 0; i < fixed; ++i)
                for (int64_t j = 0; j < t.shape[1]; ++j) out.at(i, off + j) = t.at(i, j);
            n.iargs.push_back(t.shape[1]);
            off += t.shape[1];
        }
        n.inputs.push_back(v.id);
    }
    n.value = std::move(out);
    return Var{push(std::move(n))};
}

Var Graph::slice(Var x, int64_t r0, int64_t r1, int64_t c0, int64_t c1) {
    check(x, "slice");
    const Tensor& xv = val(x.id);
    require_rank2(xv, "slice");
    if (r0 < 0 || r1 > xv.shape[0] || c0 < 0 || c1 > xv.shape[1] || r0 >= r1 || c0 >= c1)
        throw ShapeMismatch("slice: bounds out of range for " + xv.shape_str());
    Tensor out = Tensor::zeros({r1 - r0, c1 - c0});
    for (int64_t i = r0; i < r1; ++i)
        for (int64_t j = c0; j < c1; ++j) out.at(i - r0, j - c0) = xv.at(i, j);
    Node n{Op::Slice, {x.id}, std::move(out), {}, {r0, r1, c0, c1}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::sum(Var x, int axis) {
    check(x, "sum");
    const Tensor& xv = val(x.id);
    if (axis != -1 && xv.rank() == 1 && axis != 0) throw ShapeMismatch("sum: axis out of range");
    if (axis != -1 && xv.rank() == 2 && axis != 0 && axis != 1) throw ShapeMismatch("sum: axis out of range");
    Tensor out;
    if (axis == -1 || xv.rank() == 1) {
        double s = 0.0;
        for (double v : xv.data) s += v;
        out = Tensor::scalar(s);
        axis = -1;
    } else if (axis == 0) {
        out = Tensor::zeros({xv.shape[1]});
        for (int64_t i = 0; i < xv.shape[0]; ++i)
            for (int64_t j = 0; j < xv.shape[1]; ++j) out.at(j) += xv.at(i, j);
    } else {
        out = Tensor::zeros({xv.shape[0]});
        for (int64_t i = 0; i < xv.shape[0]; ++i)
            for (int64_t j = 0; j < xv.shape[1]; ++j) out.at(i) += xv.at(i, j);
    }
    Node n{Op::Sum, {x.id}, std::move(out), {}, {static_cast<int64_t>(axis)}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::mean(Var x) {
    check(x, "mean");
    const Tensor& xv = val(x.id);
    double s = 0.0;
    for (double v : xv.data) s += v;
    Node n{Op::Mean, {x.id}, Tensor::scalar(s / static_cast<double>(xv.size())), {}, {}, {}, 0, 0.0};
    return Var{push(std::move(n))};
}

Var Graph::l2_normalize(Var x, int64_t group_size, double eps) {
    check(x, "l2_normalize");
    if (eps <= 0.0) throw Error("l2_normalize: eps must be positive");
    const Tensor& xv = val(x.id);
    int64_t c = xv.cols();
    if (group_size <= 0 || c % group_size != 0)
        throw ShapeMismatch("l2_normalize: group size must divide row length of " + xv.shape_str());
    int64_t rows = xv.size() / c;
    int64_t groups_per_row = c / group_size;
    Tensor out = xv;
    Tensor norms = Tensor::zeros({rows * groups_per_row});
    int64_t gi = 0;
    for (int64_t i = 0; i < rows; ++i) {
        for (int64_t g = 0; g < groups_per_row; ++g, ++gi) {
            int64_t base = i * c + g * group_size;
            double ss = eps;
            for (int64_t k = 0; k < group_size; ++k) ss += xv.at(base + k) * xv.at(base + k);
            double r = std::sqrt(ss);
            norms.at(gi) = r;
            for (int64_t k = 0; k < group_size; ++k) out.at(base + k) = xv.at(base + k) / r;
        }
    }
    Node n{Op::L2NormalizeGroups, {x.id}, std::move(out), {}, {group_size}, {eps}, 0,
           2.0 * static_cast<double>(xv.size())};
    n.saved.push_back(std::move(norms));
    return Var{push(std::move(n))};
}

Var Graph::arccos_clamped(Var x, double eps) {
    check(x, "arccos_clamped");
    if (eps <= 0.0) throw Error("arccos_clamped: eps must be positive");
    const Tensor& xv = val(x.id);
    Tensor out = xv;
    Tensor clamped = xv;
    for (int64_t i = 0; i < xv.size(); ++i) {
        double cv = std::clamp(xv.at(i), -1.0 + eps, 1.0 - eps);
        clamped.at(i) = cv;
        out.at(i) = std::acos(cv);
    }
    Node n{Op::ArccosClamped, {x.id}, std::move(out), {}, {}, {eps}, 0,
           static_cast<double>(xv.size())};
    n.saved.push_back(std::move(clamped));
    return Var{push(std::move(n))};
}

Var Graph::pairwise_neg_inner(Var u, Var v) {
    check(u, "pairwise_neg_inner");
    check(v, "pairwise_neg_inner");
    const Tensor& uv = val(u.id);
    const Tensor& vv = val(v.id);
    require_rank2(uv, "pairwise_neg_inner");
    require_rank2(vv, "pairwise_neg_inner");
    if (uv.shape[1] != vv.shape[1])
        throw ShapeMismatch("pairwise_neg_inner: feature dims " + uv.shape_str() + " vs " + vv.shape_str());
    Tensor out = Tensor::zeros({uv.shape[0], vv.shape[0]});
    for (int64_t i = 0; i < uv.shape[0]; ++i)
        for (int64_t j = 0; j < vv.shape[0]; ++j) {
            double s = 0.0;
            for (int64_t k = 0; k < uv.shape[1]; ++k) s += uv.at(i, k) * vv.at(j, k);
            out.at(i, j) = s;
        }
    double fl = static_cast<double>(uv.shape[0]) * vv.shape[0] * uv.shape[1];
    Node n{Op::PairwiseNegInner, {u.id, v.id}, std::move(out), {}, {}, {}, 0, fl};
    return Var{push(std::move(n))};
}

Var Graph::pairwise_neg_trace(Var u, Var v, int64_t nsub, int64_t m) {
    check(u, "pairwise_neg_trace");
    check(v, "pairwise_neg_trace");
    const Tensor& uv = val(u.id);
    const Tensor& vv = val(v.id);
    require_rank2(uv, "pairwise_neg_trace");
    if (uv.shape[1] != nsub * m || vv.shape[1] != nsub * m)
        throw ShapeMismatch("pairwise_neg_trace: feature dim must equal n*m");
    // Same arithmetic as the inner product on re-vectorized points: one matmul,
    // nothing saved beyond the logits.
    Tensor out = Tensor::zeros({uv.shape[0], vv.shape[0]});
    for (int64_t i = 0; i < uv.shape[0]; ++i)
        for (int64_t j = 0; j < vv.shape[0]; ++j) {
            double s = 0.0;
            for (int64_t k = 0; k < uv.shape[1]; ++k) s += uv.at(i, k) * vv.at(j, k);
            out.at(i, j) = s;
        }
    double fl = static_cast<double>(uv.shape[0]) * vv.shape[0] * uv.shape[1];
    Node n{Op::PairwiseNegTrace, {u.id, v.id}, std::move(out), {}, {nsub, m}, {}, 0, fl};
    return Var{push(std::move(n))};
}

Var Graph::pairwise_l2(Var u, Var v) {
    check(u, "pairwise_l2");
    check(v, "pairwise_l2");
    const Tensor& uv = val(u.id);
    const Tensor& vv = val(v.id);
    require_rank2(uv, "pairwise_l2");
    if (uv.shape[1] != vv.shape[1])
        throw ShapeMismatch("pairwise_l2: feature dims " + uv.shape_str() + " vs " + vv.shape_str());
    int64_t bu = uv.shape[0], bv = vv.shape[0], d = uv.shape[1];
    Tensor out = Tensor::zeros({bu, bv});
    // The differences cannot be recomputed in place during backward; they are
    // retained on the tape, which is what makes this kind O(b^2 d).
    Tensor diffs = Tensor::zeros({bu * bv * d});
    Tensor dists = Tensor::zeros({bu * bv});
    for (int64_t i = 0; i < bu; ++i)
        for (int64_t j = 0; j < bv; ++j) {
            double ss = 0.0;
            int64_t base = (i * bv + j) * d;
            for (int64_t k = 0; k < d; ++k) {
                double dv = uv.at(i, k) - vv.at(j, k);
                diffs.at(base + k) = dv;
                ss += dv * dv;
            }
            double r = std::sqrt(ss);
            dists.at(i * bv + j) = r;
            out.at(i, j) = -r;
        }
    double fl = 3.0 * static_cast<double>(bu) * bv * d;
    Node n{Op::PairwiseL2, {u.id, v.id}, std::move(out), {}, {}, {}, 0, fl};
    n.saved.push_back(std::move(diffs));
    n.saved.push_back(std::move(dists));
    return Var{push(std::move(n))};
}

Var Graph::pairwise_geodesic(Var u, Var v, int64_t nsub, int64_t m) {
    check(u, "pairwise_geodesic");
    check(v, "pairwise_geodesic");
    const Tensor& uv = val(u.id);
    const Tensor& vv = val(v.id);
    require_rank2(uv, "pairwise_geodesic");
    if (uv.shape[1] != nsub * m || vv.shape[1] != nsub * m)
        throw ShapeMismatch("pairwise_geodesic: feature dim must equal n*m");
    int64_t bu = uv.shape[0], bv = vv.shape[0];
    const double eps = 1e-7;
    Tensor out = Tensor::zeros({bu, bv});
    // Only the diagonal of u^T v per pair: m curve lengths cached, O(b^2 m).
    Tensor dots = Tensor::zeros({bu * bv * m});
    Tensor arcs = Tensor::zeros({bu * bv * m});
    for (int64_t i = 0; i < bu; ++i)
        for (int64_t j = 0; j < bv; ++j) {
            double ss = 0.0;
            for (int64_t g = 0; g < m; ++g) {
                double c = 0.0;
                for (int64_t k = 0; k < nsub; ++k) c += uv.at(i, g * nsub + k) * vv.at(j, g * nsub + k);
                c = std::clamp(c, -1.0 + eps, 1.0 - eps);
                double a = std::acos(c);
                dots.at((i * bv + j) * m + g) = c;
                arcs.at((i * bv + j) * m + g) = a;
                ss += a * a;
            }
            out.at(i, j) = -std::sqrt(ss);
        }
    double fl = static_cast<double>(bu) * bv * (nsub * m) + 5.0 * static_cast<double>(bu) * bv * m;
    Node n{Op::PairwiseGeodesic, {u.id, v.id}, std::move(out), {}, {nsub, m}, {eps}, 0, fl};
    n.saved.push_back(std::move(dots));
    n.saved.push_back(std::move(arcs));
    return Var{push(std::move(n))};
}

Var Graph::cross_entropy_diag(Var logits) {
    check(logits, "cross_entropy_diag");
    const Tensor& lv = val(logits.id);
    require_rank2(lv, "cross_entropy_diag");
    if (lv.shape[0] != lv.shape[1]) throw ShapeMismatch("cross_entropy_diag: logits must be square");
    require_finite(lv, "cross_entropy_diag");
    int64_t b = lv.shape[0];
    Tensor prow = Tensor::zeros({b, b});
    Tensor pcol = Tensor::zeros({b, b});
    double loss_r = 0.0, loss_c = 0.0;
    for (int64_t i = 0; i < b; ++i) {
        double mx = -1e300;
        for (int64_t j = 0; j < b; ++j) mx = std::max(mx, lv.at(i, j));
        double z = 0.0;
        for (int64_t j = 0; j < b; ++j) z += std::exp(lv.at(i, j) - mx);
        for (int64_t j = 0; j < b; ++j) prow.at(i, j) = std::exp(lv.at(i, j) - mx) / z;
        loss_r += std::log(z) + mx - lv.at(i, i);
    }
    for (int64_t j = 0; j < b; ++j) {
        double mx = -1e300;
        for (int64_t i = 0; i < b; ++i) mx = std::max(mx, lv.at(i, j));
        double z = 0.0;
        for (int64_t i = 0; i < b; ++i) z += std::exp(lv.at(i, j) - mx);
        for (int64_t i = 0; i < b; ++i) pcol.at(i, j) = std::exp(lv.at(i, j) - mx) / z;
        loss_c += std::log(z) + mx - lv.at(j, j);
    }
    double bd = static_cast<double>(b);
    double loss = (loss_r / bd + loss_c / bd) / 2.0;
    Node n{Op::CrossEntropyDiag, {logits.id}, Tensor::scalar(loss), {}, {}, {}, 0,
           6.0 * static_cast<double>(b) * b};
    n.saved.push_back(std::move(prow));
    n.saved.push_back(std::move(pcol));
    return Var{push(std::move(n))};
}

Var Graph::exp_clamped(Var t, double cap) {
    check(t, "exp_clamped");
    if (val(t.id).size() != 1) throw ShapeMismatch("exp_clamped: expected scalar");
    double e = std::exp(val(t.id).at(0));
    Node n{Op::ExpClamped, {t.id}, Tensor::scalar(std::min(e, cap)), {}, {}, {cap}, 0, 0.0};
    return Var{push(std::move(n))};
}

void Graph::accumulate(int id, const Tensor& g) {
    if (!grad_set_[id]) {
        grads_[id] = g;
        grad_set_[id] = 1;
    } else {
        for (int64_t i = 0; i < g.size(); ++i) grads_[id].at(i) += g.at(i);
    }
}

bool Graph::has_grad(Var v) const {
    return v.valid() && v.id < static_cast<int>(grad_set_.size()) && grad_set_[v.id];
}

const Tensor& Graph::grad(Var v) const {
    if (!has_grad(v)) throw Error("grad: no gradient for this node (did backward reach it?)");
    return grads_[v.id];
}

void Graph::backward(Var root) {
    check(root, "backward");
    if (val(root.id).size() != 1) throw Error("backward: root must be a scalar");
    grads_.assign(nodes_.size(), Tensor());
    grad_set_.assign(nodes_.size(), 0);
    accumulate(root.id, Tensor::scalar(1.0));
    for (int id = root.id; id >= 0; --id) {
        if (!grad_set_[id]) continue;
        backward_node(id);
    }
}

void Graph::backward_node(int id) {
    const Node& n = nodes_[id];
    const Tensor& go = grads_[id];
    auto in = [&](size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
    auto acc = [&](size_t k, const Tensor& g) { accumulate(n.inputs[k], g); };

    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add:
            acc(0, go);
            acc(1, go);
            break;
        case Op::Sub: {
            acc(0, go);
            Tensor g = go;
            for (double& v : g.data) v = -v;
            acc(1, g);
            break;
        }
        case Op::Mul: {
            Tensor ga = go, gb = go;
            for (int64_t i = 0; i < go.size(); ++i) {
                ga.at(i) *= in(1).at(i);
                gb.at(i) *= in(0).at(i);
            }
            acc(0, ga);
            acc(1, gb);
            break;
        }
        case Op::Neg: {
            Tensor g = go;
            for (double& v : g.data) v = -v;
            acc(0, g);
            break;
        }
        case Op::ScalarMul: {
            Tensor g = go;
            for (double& v : g.data) v *= n.dargs[0];
            acc(0, g);
            break;
        }
        case Op::MulScalarVar: {
            double s = in(1).at(0);
            Tensor ga = go;
            for (double& v : ga.data) v *= s;
            acc(0, ga);
            double gs = 0.0;
            for (int64_t i = 0; i < go.size(); ++i) gs += go.at(i) * in(0).at(i);
            acc(1, Tensor::scalar(gs));
            break;
        }
        case Op::AddRowVec: {
            acc(0, go);
            Tensor gv = Tensor::zeros(in(1).shape);
            int64_t r = go.shape[0], c = go.shape[1];
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) gv.at(j) += go.at(i, j);
            acc(1, gv);
            break;
        }
        case Op::MulRowVec: {
            int64_t r = go.shape[0], c = go.shape[1];
            Tensor gx = go;
            Tensor gv = Tensor::zeros(in(1).shape);
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) {
                    gv.at(j) += go.at(i, j) * in(0).at(i, j);
                    gx.at(i, j) *= in(1).at(j);
                }
            acc(0, gx);
            acc(1, gv);
            break;
        }
        case Op::MatMul: {
            Tensor bt = transpose_tensor(in(1));
            Tensor ga = Tensor::zeros(in(0).shape);
            matmul_into(go, bt, ga, false);
            acc(0, ga);
            Tensor at = transpose_tensor(in(0));
            Tensor gb = Tensor::zeros(in(1).shape);
            matmul_into(at, go, gb, false);
            acc(1, gb);
            break;
        }
        case Op::Transpose:
            acc(0, transpose_tensor(go));
            break;
        case Op::Exp: {
            Tensor g = go;
            for (int64_t i = 0; i < g.size(); ++i) g.at(i) *= n.value.at(i);
            acc(0, g);
            break;
        }
        case Op::Log: {
            Tensor g = go;
            for (int64_t i = 0; i < g.size(); ++i) g.at(i) /= in(0).at(i);
            acc(0, g);
            break;
        }
        case Op::Relu: {
            Tensor g = go;
            for (int64_t i = 0; i < g.size(); ++i)
                if (in(0).at(i) <= 0.0) g.at(i) = 0.0;
            acc(0, g);
            break;
        }
        case Op::Gelu: {
            Tensor g = go;
            for (int64_t i = 0; i < g.size(); ++i) g.at(i) *= gelu_bwd(in(0).at(i));
            acc(0, g);
            break;
        }
        case Op::LayerNorm: {
            const Tensor& y = n.saved[0];
            const Tensor& inv_std = n.saved[1];
            int64_t r = y.rows(), c = y.cols();
            Tensor g = Tensor::zeros(y.shape);
            for (int64_t i = 0; i < r; ++i) {
                double mg = 0.0, mgy = 0.0;
                for (int64_t j = 0; j < c; ++j) {
                    mg += go.at(i * c + j);
                    mgy += go.at(i * c + j) * y.at(i * c + j);
                }
                mg /= static_cast<double>(c);
                mgy /= static_cast<double>(c);
                for (int64_t j = 0; j < c; ++j)
                    g.at(i * c + j) = (go.at(i * c + j) - mg - y.at(i * c + j) * mgy) * inv_std.at(i);
            }
            acc(0, g);
            break;
        }
        case Op::Softmax: {
            const Tensor& y = n.saved[0];
            bool rows = n.iargs[0] == 1;
            int64_t r = y.rows(), c = y.cols();
            int64_t outer = rows ? r : c;
            int64_t inner = rows ? c : r;
            Tensor g = Tensor::zeros(y.shape);
            for (int64_t i = 0; i < outer; ++i) {
                auto idx = [&](int64_t k) { return rows ? i * c + k : k * c + i; };
                double dot = 0.0;
                for (int64_t k = 0; k < inner; ++k) dot += go.at(idx(k)) * y.at(idx(k));
                for (int64_t k = 0; k < inner; ++k)
                    g.at(idx(k)) = y.at(idx(k)) * (go.at(idx(k)) - dot);
            }
            acc(0, g);
            break;
        }
        case Op::Reshape: {
            Tensor g(in(0).shape, go.data);
            acc(0, g);
            break;
        }
        case Op::Concat: {
            int axis = static_cast<int>(n.iargs[0]);
            int64_t off = 0;
            for (size_t k = 0; k < n.inputs.size(); ++k) {
                int64_t extent = n.iargs[k + 1];
                const Tensor& iv = in(k);
                Tensor g = Tensor::zeros(iv.shape);
                if (axis == 0) {
                    int64_t c = go.shape[1];
                    std::copy(go.data.begin() + off * c, go.data.begin() + (off + extent) * c,
                              g.data.begin());
                } else {
                    int64_t r = go.shape[0];
                    for (int64_t i = 0; i < r; ++i)
                        for (int64_t j = 0; j < extent; ++j) g.at(i, j) = go.at(i, off + j);
                }
                acc(k, g);
                off += extent;
            }
            break;
        }
        case Op::Slice: {
            Tensor g = Tensor::zeros(in(0).shape);
            int64_t r0 = n.iargs[0], r1 = n.iargs[1], c0 = n.iargs[2], c1 = n.iargs[3];
            for (int64_t i = r0; i < r1; ++i)
                for (int64_t j = c0; j < c1; ++j) g.at(i, j) = go.at(i - r0, j - c0);
            acc(0, g);
            break;
        }
        case Op::Sum: {
            int axis = static_cast<int>(n.iargs[0]);
            const Tensor& x = in(0);
            Tensor g = Tensor::zeros(x.shape);
            if (axis == -1) {
                for (double& v : g.data) v = go.at(0);
            } else if (axis == 0) {
                for (int64_t i = 0; i < x.shape[0]; ++i)
                    for (int64_t j = 0; j < x.shape[1]; ++j) g.at(i, j) = go.at(j);
            } else {
                for (int64_t i = 0; i < x.shape[0]; ++i)
                    for (int64_t j = 0; j < x.shape[1]; ++j) g.at(i, j) = go.at(i);
            }
            acc(0, g);
            break;
        }
        case Op::Mean: {
            const Tensor& x = in(0);
            Tensor g = Tensor::zeros(x.shape);
            double v = go.at(0) / static_cast<double>(x.size());
            for (double& e : g.data) e = v;
            acc(0, g);
            break;
        }
        case Op::L2NormalizeGroups: {
            const Tensor& x = in(0);
            const Tensor& norms = n.saved[0];
            int64_t gs = n.iargs[0];
            int64_t c = x.cols();
            int64_t rows = x.size() / c;
            int64_t gpr = c / gs;
            Tensor g = Tensor::zeros(x.shape);
            int64_t gi = 0;
            for (int64_t i = 0; i < rows; ++i)
                for (int64_t gg = 0; gg < gpr; ++gg, ++gi) {
                    int64_t base = i * c + gg * gs;
                    double r = norms.at(gi);
                    double xdg = 0.0;
                    for (int64_t k = 0; k < gs; ++k) xdg += x.at(base + k) * go.at(base + k);
                    double r3 = r * r * r;
                    for (int64_t k = 0; k < gs; ++k)
                        g.at(base + k) = go.at(base + k) / r - x.at(base + k) * xdg / r3;
                }
            acc(0, g);
            break;
        }
        case Op::ArccosClamped: {
            const Tensor& c = n.saved[0];
            Tensor g = go;
            for (int64_t i = 0; i < g.size(); ++i)
                g.at(i) *= -1.0 / std::sqrt(1.0 - c.at(i) * c.at(i));
            acc(0, g);
            break;
        }
        case Op::PairwiseNegInner:
        case Op::PairwiseNegTrace: {
            const Tensor& u = in(0);
            const Tensor& v = in(1);
            Tensor gu = Tensor::zeros(u.shape);
            Tensor gv = Tensor::zeros(v.shape);
            matmul_into(go, v, gu, false);
            Tensor got = transpose_tensor(go);
            matmul_into(got, u, gv, false);
            acc(0, gu);
            acc(1, gv);
            break;
        }
        case Op::PairwiseL2: {
            const Tensor& diffs = n.saved[0];
            const Tensor& dists = n.saved[1];
            const Tensor& u = in(0);
            const Tensor& v = in(1);
            int64_t bu = u.shape[0], bv = v.shape[0], d = u.shape[1];
            Tensor gu = Tensor::zeros(u.shape);
            Tensor gv = Tensor::zeros(v.shape);
            for (int64_t i = 0; i < bu; ++i)
                for (int64_t j = 0; j < bv; ++j) {
                    double r = dists.at(i * bv + j);
                    if (r < 1e-12) continue;
                    double coeff = -go.at(i, j) / r;  // output is -r
                    int64_t base = (i * bv + j) * d;
                    for (int64_t k = 0; k < d; ++k) {
                        double dv = diffs.at(base + k) * coeff;
                        gu.at(i, k) += dv;
                        gv.at(j, k) -= dv;
                    }
                }
            acc(0, gu);
            acc(1, gv);
            break;
        }
        case Op::PairwiseGeodesic: {
            const Tensor& dots = n.saved[0];
            const Tensor& arcs = n.saved[1];
            const Tensor& u = in(0);
            const Tensor& v = in(1);
            int64_t nsub = n.iargs[0], m = n.iargs[1];
            int64_t bu = u.shape[0], bv = v.shape[0];
            Tensor gu = Tensor::zeros(u.shape);
            Tensor gv = Tensor::zeros(v.shape);
            for (int64_t i = 0; i < bu; ++i)
                for (int64_t j = 0; j < bv; ++j) {
                    double G = -n.value.at(i, j);
                    if (G < 1e-12) continue;
                    double dG = -go.at(i, j);
                    for (int64_t g = 0; g < m; ++g) {
                        double a = arcs.at((i * bv + j) * m + g);
                        double cv = dots.at((i * bv + j) * m + g);
                        double dc = (a / G) * dG * (-1.0 / std::sqrt(1.0 - cv * cv));
                        for (int64_t k = 0; k < nsub; ++k) {
                            gu.at(i, g * nsub + k) += dc * v.at(j, g * nsub + k);
                            gv.at(j, g * nsub + k) += dc * u.at(i, g * nsub + k);
                        }
                    }
                }
            acc(0, gu);
            acc(1, gv);
            break;
        }
        case Op::CrossEntropyDiag: {
            const Tensor& prow = n.saved[0];
            const Tensor& pcol = n.saved[1];
            int64_t b = prow.shape[0];
            double s = go.at(0) / (2.0 * static_cast<double>(b));
            Tensor g = Tensor::zeros({b, b});
            for (int64_t i = 0; i < b; ++i)
                for (int64_t j = 0; j < b; ++j) {
                    double v = prow.at(i, j) + pcol.at(i, j);
                    if (i == j) v -= 2.0;
                    g.at(i, j) = v * s;
                }
            acc(0, g);
            break;
        }
        case Op::ExpClamped: {
            double e = std::exp(in(0).at(0));
            double d = e < n.dargs[0] ? e : 0.0;
            acc(0, Tensor::scalar(go.at(0) * d));
            break;
        }
    }
}

int64_t Graph::saved_elements(int node_id) const {
    int64_t s = 0;
    for (const Tensor& t : nodes_[node_id].saved) s += t.size();
    return s;
}

int64_t Graph::retained_scalars(int tag) const {
    int64_t total = 0;
    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].tag != tag) continue;
        total += nodes_[i].value.size() + saved_elements(static_cast<int>(i));
    }
    return total;
}

double Graph::flops(int tag) const {
    double total = 0.0;
    for (const Node& n : nodes_)
        if (n.tag == tag) total += n.flops;
    return total;
}

double Graph::total_flops() const {
    double total = 0.0;
    for (const Node& n : nodes_) total += n.flops;
    return total;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h) {
    if (h <= 0.0) throw Error("finite_diff_gradient: h must be positive");
    Tensor g = Tensor::zeros(x.shape);
    Tensor xp = x;
    for (int64_t i = 0; i < x.size(); ++i) {
        double orig = x.at(i);
        xp.at(i) = orig + h;
        double fp = f(xp);
        xp.at(i) = orig - h;
        double fm = f(xp);
        xp.at(i) = orig;
        g.at(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace obcl
