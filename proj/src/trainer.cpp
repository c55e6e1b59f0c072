#include "nudgerl/trainer.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <set>

#include "nudgerl/advantage.hpp"
#include "nudgerl/common.hpp"
#include "nudgerl/nudging.hpp"
#include "nudgerl/objective.hpp"
#include "nudgerl/rng.hpp"

namespace nudgerl {

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "grpo") return Algorithm::Grpo;
    if (s == "nudgerl") return Algorithm::NudgeRl;
    if (s == "pope_sim") return Algorithm::PopeSim;
    throw ConfigError("unknown algorithm '" + s + "' (expected grpo|nudgerl|pope_sim)");
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Grpo: return "grpo";
        case Algorithm::NudgeRl: return "nudgerl";
        case Algorithm::PopeSim: return "pope_sim";
    }
    return "?";
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd|adam)");
}

std::string to_string(OptimizerKind o) {
    return o == OptimizerKind::Sgd ? "sgd" : "adam";
}

void TrainConfig::validate() const {
    if (n_rollouts < 2) throw ConfigError("config: n_rollouts must be >= 2");
    if (steps < 1) throw ConfigError("config: steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
    if (p_drop < 0.0 || p_drop > 1.0) throw ConfigError("config: p_drop outside [0,1]");
    if (eps_low < 0.0 || eps_high < 0.0) throw ConfigError("config: clip range must be >= 0");
    if (!(delta > 0.0)) throw ConfigError("config: delta must be > 0");
    if (!(kappa > 0.0)) throw ConfigError("config: kappa must be > 0");
    if (!(temperature > 0.0)) throw ConfigError("config: temperature must be > 0");
    if (lambda_distill < 0.0) throw ConfigError("config: lambda_distill must be >= 0");
    if (!(pope_prefix_fraction > 0.0) || pope_prefix_fraction > 1.0)
        throw ConfigError("config: pope_prefix_fraction outside (0,1]");
    if (pope_mixture < 0.0 || pope_mixture > 1.0)
        throw ConfigError("config: pope_mixture outside [0,1]");
    if (ema_decay < 0.0 || !(ema_decay < 1.0)) throw ConfigError("config: ema_decay outside [0,1)");
    if (lambda < 0.0 || lambda > 2.0)
        std::cerr << "warning: lambda = " << lambda
                  << " is outside [0,2]; reward-order consistency is no longer guaranteed\n";
}

double ema_update(double prev, double value, double decay) {
    if (decay < 0.0 || !(decay < 1.0)) throw DomainError("ema_update: decay outside [0,1)");
    return decay * prev + (1.0 - decay) * value;
}

OptimizerState OptimizerState::make(OptimizerKind kind, Eigen::Index rows, Eigen::Index cols) {
    OptimizerState state;
    state.kind = kind;
    if (kind == OptimizerKind::Adam) {
        state.m = Eigen::MatrixXd::Zero(rows, cols);
        state.v = Eigen::MatrixXd::Zero(rows, cols);
    }
    return state;
}

void apply_update(PolicyParams& params, const Eigen::MatrixXd& gradient, OptimizerState& state,
                  double learning_rate) {
    if (gradient.rows() != params.theta.rows() || gradient.cols() != params.theta.cols())
        throw DomainError("apply_update: gradient shape mismatch");
    if (!gradient.allFinite()) throw NumericError("apply_update: non-finite gradient");

    if (state.kind == OptimizerKind::Sgd) {
        params.theta -= learning_rate * gradient;
        return;
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.step;
    state.m = beta1 * state.m + (1.0 - beta1) * gradient;
    state.v = beta2 * state.v + (1.0 - beta2) * gradient.cwiseProduct(gradient);
    const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    params.theta -=
        (learning_rate / corr1) *
        (state.m.array() / ((state.v.array() / corr2).sqrt() + eps)).matrix();
}

namespace {

RolloutGroup make_group(const TrainConfig& config, const Benchmark& bench, const Problem& problem,
                        const PolicyParams& params, int step) {
    RngStream traj_rng = substream(config.seed, Stream::Trajectory,
                                   static_cast<std::uint64_t>(problem.id),
                                   static_cast<std::uint64_t>(step));
    switch (config.algorithm) {
        case Algorithm::Grpo:
            return generate_group_base(params, problem, config.n_rollouts, traj_rng);
        case Algorithm::NudgeRl: {
            RngStream ctx_rng = substream(config.seed, Stream::Context,
                                          static_cast<std::uint64_t>(problem.id),
                                          static_cast<std::uint64_t>(step));
            return generate_group(params, problem, bench.pools[problem.id], config.n_rollouts,
                                  config.p_drop, ctx_rng, traj_rng);
        }
        case Algorithm::PopeSim: {
            RngStream ctx_rng = substream(config.seed, Stream::Context,
                                          static_cast<std::uint64_t>(problem.id),
                                          static_cast<std::uint64_t>(step));
            const int oracle = *problem.oracle_trajectory;
            const Context oracle_ctx{0, problem.strategy_of[oracle],
                                     config.kappa * config.pope_prefix_fraction};
            return generate_group_oracle(params, problem, oracle_ctx, config.pope_mixture,
                                         config.n_rollouts, ctx_rng, traj_rng);
        }
    }
    throw ConfigError("train: unhandled algorithm");
}

int count_distinct_strategies(const RolloutGroup& group, const Problem& problem) {
    std::set<int> seen;
    for (const Rollout& r : group.rollouts) seen.insert(problem.strategy_of[r.trajectory]);
    return static_cast<int>(seen.size());
}

}  // namespace

TrainResult train(const TrainConfig& config, const Benchmark& bench, PolicyParams params,
                  const StepCallback& on_step, const GroupCallback& on_group) {
    config.validate();
    bench.validate();
    params.validate();
    if (params.theta.rows() != bench.n_problems() ||
        params.theta.cols() < bench.max_trajectories())
        throw ConfigError("train: params shape does not match benchmark");
    if (config.algorithm == Algorithm::PopeSim)
        for (const Problem& p : bench.problems)
            if (!p.oracle_trajectory)
                throw ConfigError("train: pope_sim needs an oracle trajectory on every problem "
                                  "(problem " + std::to_string(p.id) + " has none)");
    if (config.algorithm == Algorithm::NudgeRl)
        for (const ContextPool& pool : bench.pools)
            if (pool.contexts.empty())
                throw ConfigError("train: nudgerl needs a nonempty context pool per problem");

    const double lambda_distill_eff =
        config.algorithm == Algorithm::NudgeRl ? config.lambda_distill : 0.0;
    const int n_problems = bench.n_problems();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    TrainResult result{std::move(params), {}};
    result.metrics.reserve(config.steps);
    OptimizerState opt =
        OptimizerState::make(config.optimizer, result.params.theta.rows(),
                             result.params.theta.cols());

    for (int step = 0; step < config.steps; ++step) {
        const PolicyParams old = snapshot(result.params);
        Eigen::MatrixXd grad =
            Eigen::MatrixXd::Zero(result.params.theta.rows(), result.params.theta.cols());

        double reward_sum = 0.0, dropout_sum = 0.0, hinted_sum = 0.0;
        int reward_n = 0, dropout_n = 0, hinted_n = 0;
        double loss_rl_sum = 0.0, loss_distill_sum = 0.0, clip_sum = 0.0;
        int distinct_sum = 0;

        for (const Problem& problem : bench.problems) {
            const RolloutGroup group = make_group(config, bench, problem, old, step);
            if (on_group) on_group(problem, step, group);

            const AdvantageVector adv =
                config.algorithm == Algorithm::NudgeRl
                    ? inter_intra_advantage(group, config.lambda, config.delta)
                    : grpo_advantage(group.rewards(), config.delta);

            const LossReport report =
                nudgerl_loss(group, adv, result.params, problem, config.eps_low, config.eps_high,
                             lambda_distill_eff);
            grad.row(problem.id).head(problem.n_trajectories) += report.gradient;

            for (const Rollout& r : group.rollouts) {
                reward_sum += r.reward;
                ++reward_n;
                if (r.context) {
                    hinted_sum += r.reward;
                    ++hinted_n;
                } else {
                    dropout_sum += r.reward;
                    ++dropout_n;
                }
            }
            loss_rl_sum += report.loss_rl;
            loss_distill_sum += report.loss_distill;
            clip_sum += report.clip_fraction;
            distinct_sum += count_distinct_strategies(group, problem);
        }

        grad /= static_cast<double>(n_problems);
        apply_update(result.params, grad, opt, config.learning_rate);

        StepMetrics sm;
        sm.step = step;
        sm.reward_mean = reward_sum / reward_n;
        sm.reward_mean_dropout = dropout_n ? dropout_sum / dropout_n : nan;
        sm.reward_mean_hinted = hinted_n ? hinted_sum / hinted_n : nan;
        sm.ema_reward = step == 0 ? sm.reward_mean
                                  : ema_update(result.metrics.back().ema_reward, sm.reward_mean,
                                               config.ema_decay);
        sm.loss_rl = loss_rl_sum / n_problems;
        sm.loss_distill = loss_distill_sum / n_problems;
        sm.clip_fraction = clip_sum / n_problems;
        sm.distinct_strategies = static_cast<double>(distinct_sum) / n_problems;

        result.metrics.push_back(sm);
        if (on_step) on_step(sm);
    }

    return result;
}

}  // namespace nudgerl
