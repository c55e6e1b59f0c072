#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nudgerl/env.hpp"
#include "nudgerl/nudging.hpp"
#include "nudgerl/policy.hpp"

namespace nudgerl {

enum class Algorithm { Grpo, NudgeRl, PopeSim };
enum class OptimizerKind { Sgd, Adam };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);
OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind o);

struct TrainConfig {
    Algorithm algorithm = Algorithm::NudgeRl;
    int n_rollouts = 8;  // N
    int steps = 500;
    double learning_rate = 0.1;
    double lambda = 1.1;          // inter-context weight
    double lambda_distill = 0.1;  // distillation coefficient (nudgerl only)
    double p_drop = 0.5;
    double eps_low = 0.2;
    double eps_high = 0.2;
    double delta = 1e-4;      // advantage normalization stabilizer
    double kappa = 6.0;       // context bias strength (benchmark-level constant)
    double temperature = 1.0;
    std::uint64_t seed = 42;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    double pope_prefix_fraction = 0.15;  // oracle-nudge strength = kappa * fraction
    double pope_mixture = 0.5;           // share of rollouts given the oracle nudge
    double ema_decay = 0.99;

    // Throws ConfigError on hard violations; lambda outside [0,2] only warns
    // (the reward-ordering guarantee holds inside that range).
    void validate() const;
};

struct StepMetrics {
    int step = 0;
    double reward_mean = 0.0;
    double reward_mean_dropout = 0.0;  // E[r | z empty]; NaN when no such rollout
    double reward_mean_hinted = 0.0;   // E[r | z present]; NaN when no such rollout
    double ema_reward = 0.0;
    double loss_rl = 0.0;
    double loss_distill = 0.0;
    double clip_fraction = 0.0;
    double distinct_strategies = 0.0;  // mean distinct strategy count per group
};

// ema_t = decay * prev + (1 - decay) * value.
double ema_update(double prev, double value, double decay);

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Sgd;
    Eigen::MatrixXd m, v;  // Adam moments
    long step = 0;

    static OptimizerState make(OptimizerKind kind, Eigen::Index rows, Eigen::Index cols);
};

// One optimizer step in place. SGD: theta -= lr * g. Adam: betas (0.9, 0.999),
// epsilon 1e-8, bias-corrected. Non-finite gradients abort with NumericError.
void apply_update(PolicyParams& params, const Eigen::MatrixXd& gradient, OptimizerState& state,
                  double learning_rate);

using StepCallback = std::function<void(const StepMetrics&)>;
using GroupCallback = std::function<void(const Problem&, int step, const RolloutGroup&)>;

struct TrainResult {
    PolicyParams params;
    std::vector<StepMetrics> metrics;
};

// Runs the configured algorithm. Per step: snapshot pi_old, generate one
// rollout group per problem on substreams keyed by (seed, stream, problem,
// step), compute advantages and the combined loss, then apply a single
// optimizer update from the gradient mean over problems. Fully determined by
// (config, benchmark, initial params).
TrainResult train(const TrainConfig& config, const Benchmark& bench, PolicyParams params,
                  const StepCallback& on_step = {}, const GroupCallback& on_group = {});

}  // namespace nudgerl
