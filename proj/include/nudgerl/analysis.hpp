#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "nudgerl/env.hpp"
#include "nudgerl/nudging.hpp"
#include "nudgerl/policy.hpp"

namespace nudgerl {

// Unbiased estimator 1 - C(n-c, k) / C(n, k) of the probability that at least
// one of k uniformly chosen samples (out of n with c correct) is correct.
// Exact integer binomials where they fit in 64 bits, log-gamma otherwise, so
// n = 128 evaluates without overflow.
double pass_at_k(int n, int c, int k);

struct ProblemEval {
    int problem_id = 0;
    int n = 0;  // samples drawn
    int c = 0;  // correct among them
    std::vector<double> pass_at_k;  // aligned with EvalReport::ks
    int distinct_strategies = 0;
};

struct EvalReport {
    std::vector<int> ks;
    std::vector<ProblemEval> problems;
    std::vector<double> mean_pass_at_k;  // aligned with ks
    double mean_correct_fraction = 0.0;
    std::map<int, int> distinct_strategy_histogram;  // #distinct -> #problems
};

// Samples n context-free rollouts per problem at the given temperature
// (inference never sees contexts) and scores pass@k for every requested k.
// Deterministic given seed; per-problem substreams make the result
// independent of evaluation order.
EvalReport evaluate(const PolicyParams& params, const Benchmark& bench, int n_samples,
                    const std::vector<int>& ks, double temperature, std::uint64_t seed);

// Expected squared probability mass left unsampled after n_draws rollouts:
// sum_i p_i^2 (1 - p_i)^n_draws.
double unsampled_mass(const Eigen::VectorXd& p, int n_draws);

// Second-moment decomposition of the base distribution against the sampled
// set of a rollout group. q_pos is the total correct mass; a2/b2 are second
// moments of sampled correct/incorrect trajectories, u_pos2/u_neg2 of
// unsampled ones.
struct DeltaQTerms {
    double q_pos = 0.0;
    double q_neg = 0.0;
    double a2 = 0.0;
    double b2 = 0.0;
    double u_pos2 = 0.0;
    double u_neg2 = 0.0;
};

DeltaQTerms delta_q_terms(const PolicyParams& params, const Problem& problem,
                          const RolloutGroup& group);

// Assembles the expected one-step improvement from the decomposition, with
// the net sampled-reward contribution s_r supplied by the caller:
// (lr / n) * [(1-s_r) q_neg a2 + s_r q_pos b2 + s_r (q_pos u_neg2 - q_neg u_pos2)].
double delta_q_pos(const DeltaQTerms& t, double s_r, double learning_rate, int n_rollouts);

// Number of distinct strategy labels among the group's trajectories.
int distinct_strategies(const RolloutGroup& group, const Problem& problem);

// CSV rows (problem,n,c,k,pass_at_k) and a JSON summary; both schemas stable.
void save_eval_csv(const EvalReport& report, std::ostream& out);
void save_eval_summary_json(const EvalReport& report, std::ostream& out);

}  // namespace nudgerl
