#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "nudgerl/env.hpp"
#include "nudgerl/rng.hpp"

namespace nudgerl {

// Tabular softmax policy: one logit row per problem. A context never touches
// theta; it contributes a fixed additive bias to the logits of its target
// strategy, so base and conditioned distributions share parameters.
struct PolicyParams {
    Eigen::MatrixXd theta;     // [problem id][trajectory index]
    double temperature = 1.0;  // applies to sampling and logprobs alike

    void validate() const;  // finite logits, positive temperature
};

// Zero logits plus the dominant-mode tilt on each problem's dominant
// trajectory; this is the initial policy every training run starts from.
PolicyParams init_params(const Benchmark& bench, double dominant_tilt,
                         double temperature = 1.0);

struct ConditionedDistribution {
    int problem_id = 0;
    std::optional<Context> context;
    Eigen::VectorXd probs;     // sums to 1
    Eigen::VectorXd logprobs;  // logprobs[y] = log(probs[y])
};

// theta[problem][y] + strength * [strategy_of(y) == target]; plain theta row
// when no context is given.
Eigen::VectorXd logits(const PolicyParams& params, const Problem& problem,
                       const std::optional<Context>& context);

// softmax(logits / temperature) with the usual max-shift stabilization.
ConditionedDistribution distribution(const PolicyParams& params, const Problem& problem,
                                     const std::optional<Context>& context);

// One trajectory index per call; consumes exactly one draw from `rng`.
int sample(const ConditionedDistribution& dist, RngStream& rng);

// d log pi(y | problem, context) / d theta[problem][j] = ([j == y] - pi(j)) / T.
Eigen::VectorXd grad_logprob(const PolicyParams& params, const Problem& problem,
                             const std::optional<Context>& context, int trajectory);

// Value copy frozen as pi_old.
PolicyParams snapshot(const PolicyParams& params);

// Checkpoint format: hexfloat text keyed by (problem id, trajectory index);
// byte-stable across runs on the same platform and exact on round trip.
void save_params(const PolicyParams& params, std::ostream& out);
void save_params_file(const PolicyParams& params, const std::string& path);
PolicyParams load_params(std::istream& in);
PolicyParams load_params_file(const std::string& path);

}  // namespace nudgerl
