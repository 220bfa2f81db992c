#pragma once

#include <functional>
#include <vector>

#include "obcl/graph.hpp"

namespace obcl {

/// Builds a scalar from leaves of the given shapes; used for both the analytic
/// backward pass and the finite-difference probes.
using ScalarBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;

/// Max-norm relative error between analytic gradients and central finite
/// differences, over all inputs: max_i |a_i - fd_i| / max(max_j |fd_j|, 1e-12).
inline double gradcheck(const ScalarBuilder& build, const std::vector<Tensor>& inputs,
                        double h = 1e-6) {
    Graph g;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(g.leaf(t));
    Var root = build(g, leaves);
    g.backward(root);

    auto eval = [&](const std::vector<Tensor>& xs) {
        Graph fg;
        std::vector<Var> ls;
        for (const Tensor& t : xs) ls.push_back(fg.leaf(t));
        return fg.value(build(fg, ls)).at(0);
    };

    double worst = 0.0;
    std::vector<Tensor> probe = inputs;
    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor fd = finite_diff_gradient(
            [&](const Tensor& x) {
                probe[k] = x;
                double v = eval(probe);
                probe[k] = inputs[k];
                return v;
            },
            inputs[k], h);
        double scale = 1e-12;
        for (double v : fd.data) scale = std::max(scale, std::abs(v));
        const Tensor* analytic = g.has_grad(leaves[k]) ? &g.grad(leaves[k]) : nullptr;
        for (int64_t i = 0; i < fd.size(); ++i) {
            double a = analytic ? analytic->at(i) : 0.0;
            worst = std::max(worst, std::abs(a - fd.at(i)) / scale);
        }
    }
    return worst;
}

}  // namespace obcl
