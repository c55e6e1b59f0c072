#include "nudgerl/objective.hpp"

#include <algorithm>
#include <cmath>

#include "nudgerl/common.hpp"

namespace nudgerl {

namespace {

// Distributions per distinct context label in the group, base included.
class DistCache {
  public:
    DistCache(const PolicyParams& params, const Problem& problem)
        : params_(params), problem_(problem), base_(distribution(params, problem, std::nullopt)) {}

    const ConditionedDistribution& for_context(const std::optional<Context>& z) {
        if (!z) return base_;
        for (const auto& [id, d] : conditioned_)
            if (id == z->id) return d;
        conditioned_.emplace_back(z->id, distribution(params_, problem_, z));
        return conditioned_.back().second;
    }

    const ConditionedDistribution& base() const { return base_; }

  private:
    const PolicyParams& params_;
    const Problem& problem_;
    ConditionedDistribution base_;
    std::vector<std::pair<int, ConditionedDistribution>> conditioned_;
};

}  // namespace

RlSurrogate rl_surrogate(const RolloutGroup& group, const Eigen::VectorXd& normalized_adv,
                         const PolicyParams& params, const Problem& problem, double eps_low,
                         double eps_high) {
    const int n = group.size();
    if (n < 1) throw DomainError("rl_surrogate: empty group");
    if (normalized_adv.size() != n) throw DomainError("rl_surrogate: advantage size mismatch");
    if (eps_low < 0.0 || eps_high < 0.0) throw DomainError("rl_surrogate: negative clip range");

    DistCache dists(params, problem);
    RlSurrogate out;
    out.gradient = Eigen::VectorXd::Zero(problem.n_trajectories);

    int clipped_count = 0;
    double loss_sum = 0.0;
    const double inv_n = 1.0 / n;
    const double inv_temp = 1.0 / params.temperature;

    for (int i = 0; i < n; ++i) {
        const Rollout& r = group.rollouts[i];
        const ConditionedDistribution& dist = dists.for_context(r.context);
        const double ratio = std::exp(dist.logprobs[r.trajectory] - r.logprob_conditioned);
        if (!std::isfinite(ratio)) throw NumericError("rl_surrogate: non-finite ratio");

        const double a = normalized_adv[i];
        const double unclipped = ratio * a;
        const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high) * a;
        loss_sum += -std::min(unclipped, clipped);

        if (unclipped <= clipped) {
            // Unclipped branch attains the min: gradient of -ratio*a w.r.t.
            // theta is -a * ratio * grad log pi(y|x1).
            const double w = -a * ratio * inv_n * inv_temp;
            out.gradient -= w * dist.probs;
            out.gradient[r.trajectory] += w;
        } else {
            ++clipped_count;
        }
    }

    out.loss = loss_sum * inv_n;
    out.clip_fraction = static_cast<double>(clipped_count) * inv_n;
    return out;
}

DistillResult distill_loss(const RolloutGroup& group, const Eigen::VectorXd& normalized_adv,
                           const PolicyParams& params, const Problem& problem) {
    const int n = group.size();
    if (n < 1) throw DomainError("distill_loss: empty group");
    if (normalized_adv.size() != n) throw DomainError("distill_loss: advantage size mismatch");

    const ConditionedDistribution base = distribution(params, problem, std::nullopt);
    DistillResult out;
    out.gradient = Eigen::VectorXd::Zero(problem.n_trajectories);

    double loss_sum = 0.0;
    const double inv_n = 1.0 / n;
    const double inv_temp = 1.0 / params.temperature;
    for (int i = 0; i < n; ++i) {
        const Rollout& r = group.rollouts[i];
        const double a = normalized_adv[i];
        loss_sum += -a * base.logprobs[r.trajectory];
        const double w = -a * inv_n * inv_temp;
        out.gradient -= w * base.probs;
        out.gradient[r.trajectory] += w;
    }
    out.loss = loss_sum * inv_n;
    return out;
}

LossReport nudgerl_loss(const RolloutGroup& group, const AdvantageVector& adv,
                        const PolicyParams& params, const Problem& problem, double eps_low,
                        double eps_high, double lambda_distill) {
    const RlSurrogate rl =
        rl_surrogate(group, adv.normalized, params, problem, eps_low, eps_high);
    const DistillResult distill = distill_loss(group, adv.normalized, params, problem);

    LossReport report;
    report.loss_rl = rl.loss;
    report.loss_distill = distill.loss;
    report.loss_total = rl.loss + lambda_distill * distill.loss;
    report.clip_fraction = rl.clip_fraction;
    report.gradient = rl.gradient + lambda_distill * distill.gradient;
    return report;
}

double min_clip_margin(const RolloutGroup& group, const PolicyParams& params,
                       const Problem& problem, double eps_low, double eps_high) {
    DistCache dists(params, problem);
    double margin = std::numeric_limits<double>::infinity();
    for (const Rollout& r : group.rollouts) {
        const ConditionedDistribution& dist = dists.for_context(r.context);
        const double ratio = std::exp(dist.logprobs[r.trajectory] - r.logprob_conditioned);
        margin = std::min(margin, std::abs(ratio - (1.0 - eps_low)));
        margin = std::min(margin, std::abs(ratio - (1.0 + eps_high)));
    }
    return margin;
}

double finite_difference_check(const std::function<double(const PolicyParams&)>& loss_fn,
                               const PolicyParams& at, int problem_id, int n_trajectories,
                               const Eigen::VectorXd& analytic_grad, double h) {
    if (h < 1e-7 || h > 1e-3) throw DomainError("finite_difference_check: h outside [1e-7, 1e-3]");
    if (analytic_grad.size() != n_trajectories)
        throw DomainError("finite_difference_check: gradient size mismatch");

    PolicyParams probe = at;
    double max_err = 0.0;
    for (int j = 0; j < n_trajectories; ++j) {
        const double saved = probe.theta(problem_id, j);
        probe.theta(problem_id, j) = saved + h;
        const double up = loss_fn(probe);
        probe.theta(problem_id, j) = saved - h;
        const double down = loss_fn(probe);
        probe.theta(problem_id, j) = saved;

        const double numeric = (up - down) / (2.0 * h);
        const double analytic = analytic_grad[j];
        const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
        max_err = std::max(max_err, std::abs(numeric - analytic) / denom);
    }
    return max_err;
}

}  // namespace nudgerl
