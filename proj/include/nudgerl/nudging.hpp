#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <vector>

#include "nudgerl/env.hpp"
#include "nudgerl/policy.hpp"
#include "nudgerl/rng.hpp"

namespace nudgerl {

// Per-rollout context draw plus dropout mask. The effective context z is the
// drawn one when the mask kept it, empty otherwise.
struct ContextAssignment {
    int rollout_index = 0;
    Context drawn;
    bool kept = false;
    std::optional<Context> effective;
};

struct Rollout {
    int trajectory = 0;
    std::optional<Context> context;  // z for this rollout; nullopt = empty
    int reward = 0;
    double logprob_conditioned = 0.0;  // log pi_old(y | problem, z)
    double logprob_base = 0.0;         // log pi_old(y | problem)
};

struct RolloutGroup {
    int problem_id = 0;
    std::vector<Rollout> rollouts;

    int size() const { return static_cast<int>(rollouts.size()); }
    Eigen::VectorXd rewards() const;
    // Context id per rollout, -1 for the empty context.
    std::vector<int> context_labels() const;
};

// Draws context then mask for each rollout, in that fixed order, both from the
// context stream: exactly 2N draws regardless of p_drop or which contexts come
// up, so trajectory-stream consumption is invariant to the context setup.
std::vector<ContextAssignment> assign_contexts(const ContextPool& pool, int n, double p_drop,
                                               RngStream& context_rng);

// Nudged sampling: assigns contexts, then samples each trajectory from the
// conditioned distribution (one trajectory-stream draw per rollout). Records
// reward and both logprobs under the passed-in params, which the trainer
// snapshots as pi_old before updating.
RolloutGroup generate_group(const PolicyParams& params, const Problem& problem,
                            const ContextPool& pool, int n, double p_drop,
                            RngStream& context_rng, RngStream& trajectory_rng);

// Plain sampling at the base prompt: every z empty, no context draws consumed.
RolloutGroup generate_group_base(const PolicyParams& params, const Problem& problem, int n,
                                 RngStream& trajectory_rng);

// Deterministic even split over the pool (rollout i gets pool context
// i*M/n), no dropout. Used by the diversity diagnostics.
RolloutGroup generate_group_balanced(const PolicyParams& params, const Problem& problem,
                                     const ContextPool& pool, int n,
                                     RngStream& trajectory_rng);

// Oracle-nudge sampling: each rollout is conditioned on `oracle_context` with
// probability `mixture` (one context-stream draw per rollout), else on the
// base prompt.
RolloutGroup generate_group_oracle(const PolicyParams& params, const Problem& problem,
                                   const Context& oracle_context, double mixture, int n,
                                   RngStream& context_rng, RngStream& trajectory_rng);

// Samples until `target` appears; returns the 1-based draw count of the first
// hit, or nullopt if max_draws passes without one.
std::optional<int> discovery_cost(const PolicyParams& params, const Problem& problem, int target,
                                  const std::optional<Context>& context, int max_draws,
                                  RngStream& rng);

// Line-oriented rollout log:
//   <problem> <step> <i> <trajectory> <context id|-1> <b> <reward> <logprob_conditioned> <logprob_base>
struct RolloutLogRecord {
    int problem_id = 0;
    int step = 0;
    int rollout_index = 0;
    int trajectory = 0;
    int context_id = -1;
    int mask = 0;
    int reward = 0;
    double logprob_conditioned = 0.0;
    double logprob_base = 0.0;
};

void append_rollout_log(std::ostream& out, const RolloutGroup& group, int step);
std::vector<RolloutLogRecord> read_rollout_log(std::istream& in);

}  // namespace nudgerl
