#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "obcl/tensor.hpp"

namespace obcl {

enum class Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    ScalarMul,
    MulScalarVar,
    AddRowVec,
    MulRowVec,
    MatMul,
    Transpose,
    Exp,
    Log,
    Relu,
    Gelu,
    LayerNorm,
    Softmax,
    Reshape,
    Concat,
    Slice,
    Sum,
    Mean,
    L2NormalizeGroups,
    ArccosClamped,
    PairwiseNegInner,
    PairwiseL2,
    PairwiseGeodesic,
    PairwiseNegTrace,
    CrossEntropyDiag,
    ExpClamped,
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense float64 tensors. Single-owner: build and
/// backward from one thread; distinct graphs are independent.
class Graph {
public:
    Var leaf(Tensor t);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var neg(Var a);
    Var scalar_mul(Var a, double c);
    /// Tensor times a tracked scalar (the only broadcasting form supported).
    Var mul_scalar_var(Var a, Var s);
    /// x (r x c) plus / times a length-c vector applied to every row.
    Var add_rowvec(Var x, Var v);
    Var mul_rowvec(Var x, Var v);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var relu(Var a);
    Var gelu(Var a);
    Var layer_norm(Var x, double eps = 1e-5);
    Var softmax(Var x, int axis);
    Var reshape(Var x, std::vector<int64_t> shape);
    Var concat(const std::vector<Var>& xs, int axis);
    Var slice(Var x, int64_t r0, int64_t r1, int64_t c0, int64_t c1);
    Var sum(Var x, int axis = -1);  // -1 = all elements
    Var mean(Var x);
    /// Normalize each contiguous block of group_size elements within each row.
    /// group_size == row length gives plain row-wise l2_normalize.
    Var l2_normalize(Var x, int64_t group_size, double eps = 1e-12);
    Var arccos_clamped(Var x, double eps = 1e-7);

    // Batch similarity matrices: entry (i,j) is the NEGATIVE distance between
    // row i of U and row j of V, i.e. softmax-ready logits.
    Var pairwise_neg_inner(Var u, Var v);
    Var pairwise_l2(Var u, Var v);
    Var pairwise_geodesic(Var u, Var v, int64_t n, int64_t m);
    Var pairwise_neg_trace(Var u, Var v, int64_t n, int64_t m);

    /// Symmetric diagonal-label cross-entropy over a b x b logits matrix:
    /// (mean row CE + mean column CE) / 2.
    Var cross_entropy_diag(Var logits);
    /// min(exp(t), cap) with gradient blocked above the cap.
    Var exp_clamped(Var t, double cap);

    void backward(Var root);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    bool has_grad(Var v) const;
    const Tensor& grad(Var v) const;

    // Scope tags attribute tape storage to a subgraph (bench module).
    void set_tag(int tag) { current_tag_ = tag; }
    int current_tag() const { return current_tag_; }
    /// Elements this node keeps alive for backward: its output plus explicitly
    /// saved intermediates.
    int64_t retained_scalars(int tag) const;
    double flops(int tag) const;
    double total_flops() const;

    size_t num_nodes() const { return nodes_.size(); }
    int64_t saved_elements(int node_id) const;

private:
    struct Node {
        Op op;
        std::vector<int> inputs;
        Tensor value;
        std::vector<Tensor> saved;
        std::vector<int64_t> iargs;
        std::vector<double> dargs;
        int tag = 0;
        double flops = 0.0;
    };

    int push(Node n);
    const Tensor& val(int id) const { return nodes_[id].value; }
    void accumulate(int id, const Tensor& g);
    void backward_node(int id);
    void check(Var v, const char* op) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> grad_set_;
    int current_tag_ = 0;
};

/// Central finite differences (f(x+h e_i) - f(x-h e_i)) / 2h; the gradient
/// oracle used by the gradcheck suites.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h = 1e-6);

}  // namespace obcl
