#pragma once

#include <Eigen/Dense>

#include <functional>

#include "nudgerl/advantage.hpp"
#include "nudgerl/nudging.hpp"
#include "nudgerl/policy.hpp"

namespace nudgerl {

struct LossReport {
    double loss_rl = 0.0;
    double loss_distill = 0.0;
    double loss_total = 0.0;       // loss_rl + lambda_distill * loss_distill
    double clip_fraction = 0.0;    // share of rollouts where the clipped branch won
    Eigen::VectorXd gradient;      // d loss_total / d theta[problem][.]
};

struct RlSurrogate {
    double loss = 0.0;
    double clip_fraction = 0.0;
    Eigen::VectorXd gradient;
};

// Clipped surrogate on the conditioned policy. Per rollout the ratio is
// r1 = exp(log pi(y|problem,z) - logprob_conditioned recorded at generation);
// the contribution is -min(r1*A, clip(r1, 1-eps_low, 1+eps_high)*A), averaged
// over the group. Gradient flows only when the unclipped term attains the
// min (zero through the clipped branch).
RlSurrogate rl_surrogate(const RolloutGroup& group, const Eigen::VectorXd& normalized_adv,
                         const PolicyParams& params, const Problem& problem, double eps_low,
                         double eps_high);

struct DistillResult {
    double loss = 0.0;
    Eigen::VectorXd gradient;
};

// Advantage-weighted distillation onto the base prompt:
// -mean_i(A_i * log pi(y_i | problem)), log-probability evaluated fresh under
// the current params with no context bias.
DistillResult distill_loss(const RolloutGroup& group, const Eigen::VectorXd& normalized_adv,
                           const PolicyParams& params, const Problem& problem);

// Combined objective; distill gradient scaled by lambda_distill.
LossReport nudgerl_loss(const RolloutGroup& group, const AdvantageVector& adv,
                        const PolicyParams& params, const Problem& problem, double eps_low,
                        double eps_high, double lambda_distill);

// Smallest |r1 - clip boundary| over the group at the given params. The
// finite-difference comparison is only meaningful where this margin exceeds
// ~10h (the active branch must not flip inside the stencil).
double min_clip_margin(const RolloutGroup& group, const PolicyParams& params,
                       const Problem& problem, double eps_low, double eps_high);

// Central-difference check over every entry of the problem's theta row.
// Returns max over entries of |numeric - analytic| / max(1, |numeric|, |analytic|).
double finite_difference_check(const std::function<double(const PolicyParams&)>& loss_fn,
                               const PolicyParams& at, int problem_id, int n_trajectories,
                               const Eigen::VectorXd& analytic_grad, double h);

}  // namespace nudgerl
