#pragma once

#include <vector>

#include "obcl/graph.hpp"

namespace obcl {

/// Learnable log-temperature t with effective tau = min(exp(t), tau_max).
struct TemperatureParam {
    double t = 0.0;
    double tau_max = 100.0;
    bool learnable = true;

    double tau() const;

    /// Multi-token runs default the ceiling to 100/m; single-token keeps 100.
    static double default_tau_max(bool multi_token, int64_t m);
    /// Named preset from the large-scale multi-token configuration.
    static constexpr double kMulti32x16TauMax = 3.95;
};

struct LossOutput {
    double loss = 0.0;
    Tensor logits;               // tau-scaled negative distances
    double mean_pos_dist = 0.0;  // mean of d(U_i, V_i)
    double mean_neg_dist = 0.0;  // mean of d(U_i, V_j), i != j
    Tensor grad_neg_dist;        // dLoss / d neg_dist
    double grad_t = 0.0;         // dLoss / dt (0 when clamped or frozen)
};

/// Symmetric diagonal-label contrastive loss over a b x b matrix of negative
/// distances: (mean row CE + mean column CE) / 2 on logits = neg_dist * tau.
LossOutput contrastive_loss(const Tensor& neg_dist, const TemperatureParam& temp);

/// Same loss inside an existing graph; t_var may be invalid for a frozen
/// temperature (tau then comes from temp directly).
Var contrastive_loss_graph(Graph& g, Var neg_dist, Var t_var, const TemperatureParam& temp);

/// Direct summation of the single-denominator InfoNCE form: per anchor,
/// -log(e^{-tau d+} / sum_j e^{-tau d-_j}), averaged over anchors.
double infonce_oracle(const std::vector<double>& pos_dists,
                      const std::vector<std::vector<double>>& neg_dists_per_anchor, double tau);

/// Relative error |analytic - central FD| / max(|FD|, 1e-12) of dLoss/dt.
double temperature_grad_check(const TemperatureParam& temp, const Tensor& neg_dist,
                              double h = 1e-6);

}  // namespace obcl
