#include "obcl/loss.hpp"

#include <cmath>

#include "obcl/errors.hpp"

namespace obcl {

double TemperatureParam::tau() const { return std::min(std::exp(t), tau_max); }

double TemperatureParam::default_tau_max(bool multi_token, int64_t m) {
    return multi_token ? 100.0 / static_cast<double>(m) : 100.0;
}

Var contrastive_loss_graph(Graph& g, Var neg_dist, Var t_var, const TemperatureParam& temp) {
    const Tensor& nd = g.value(neg_dist);
    if (nd.rank() != 2 || nd.shape[0] != nd.shape[1])
        throw ShapeMismatch("contrastive_loss: expected square matrix, got " + nd.shape_str());
    if (nd.shape[0] < 2) throw BatchTooSmall("contrastive_loss: batch size must be >= 2");
    for (double v : nd.data)
        if (!std::isfinite(v)) throw NumericError("contrastive_loss: non-finite distance entry");
    Var logits;
    if (temp.learnable && t_var.valid()) {
        Var tau = g.exp_clamped(t_var, temp.tau_max);
        logits = g.mul_scalar_var(neg_dist, tau);
    } else {
        logits = g.scalar_mul(neg_dist, temp.tau());
    }
    return g.cross_entropy_diag(logits);
}

LossOutput contrastive_loss(const Tensor& neg_dist, const TemperatureParam& temp) {
    Graph g;
    Var nd = g.leaf(neg_dist);
    Var t_var = temp.learnable ? g.leaf(Tensor::scalar(temp.t)) : Var{};
    Var loss = contrastive_loss_graph(g, nd, t_var, temp);
    g.backward(loss);

    LossOutput out;
    out.loss = g.value(loss).at(0);
    out.logits = neg_dist;
    for (double& v : out.logits.data) v *= temp.tau();
    out.grad_neg_dist = g.grad(nd);
    out.grad_t = (temp.learnable && g.has_grad(t_var)) ? g.grad(t_var).at(0) : 0.0;

    int64_t b = neg_dist.shape[0];
    double pos = 0.0, neg = 0.0;
    for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < b; ++j) {
            if (i == j)
                pos += -neg_dist.at(i, j);
            else
                neg += -neg_dist.at(i, j);
        }
    out.mean_pos_dist = pos / static_cast<double>(b);
    out.mean_neg_dist = neg / static_cast<double>(b * (b - 1));
    return out;
}

double infonce_oracle(const std::vector<double>& pos_dists,
                      const std::vector<std::vector<double>>& neg_dists_per_anchor, double tau) {
    if (pos_dists.empty() || pos_dists.size() != neg_dists_per_anchor.size())
        throw Error("infonce_oracle: anchor count mismatch");
    double total = 0.0;
    for (size_t i = 0; i < pos_dists.size(); ++i) {
        const auto& negs = neg_dists_per_anchor[i];
        if (negs.empty()) throw Error("infonce_oracle: anchor " + std::to_string(i) + " has no negatives");
        // log-sum-exp over the negative term N
        double mx = -INFINITY;
        for (double d : negs) mx = std::max(mx, -tau * d);
        double z = 0.0;
        for (double d : negs) z += std::exp(-tau * d - mx);
        double log_n = std::log(z) + mx;
        total += -(-tau * pos_dists[i]) + log_n;
    }
    return total / static_cast<double>(pos_dists.size());
}

double temperature_grad_check(const TemperatureParam& temp, const Tensor& neg_dist, double h) {
    if (!temp.learnable) throw Error("temperature_grad_check: temperature must be learnable");
    double analytic = contrastive_loss(neg_dist, temp).grad_t;
    auto loss_at = [&](double t) {
        TemperatureParam p = temp;
        p.t = t;
        return contrastive_loss(neg_dist, p).loss;
    };
    double fd = (loss_at(temp.t + h) - loss_at(temp.t - h)) / (2.0 * h);
    return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-12);
}

}  // namespace obcl
