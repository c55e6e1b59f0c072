#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "nudgerl/nudging.hpp"

namespace nudgerl {

struct AdvantageStats {
    // Context label (-1 for the empty context) -> mean reward within the group.
    std::vector<std::pair<int, double>> context_means;
    double reward_mean = 0.0;  // global mean over all N rollouts
    double mean_a = 0.0;       // mean of the pre-normalization advantages
    double std_a = 0.0;        // population standard deviation of the same
    double delta = 0.0;
};

struct AdvantageVector {
    Eigen::VectorXd pre_norm;    // A_i
    Eigen::VectorXd normalized;  // (A_i - mean_a) / (std_a + delta)
    AdvantageStats stats;
};

// Group-relative advantage: A_i = r_i - mean(r), normalized across the group.
// Implemented as the all-empty-context case of the inter-intra form so the
// two agree bit-for-bit when every rollout is context-free.
AdvantageVector grpo_advantage(const Eigen::VectorXd& rewards, double delta);

// Inter-intra group advantage. Rollouts with a context get
//   A_i = (r_i - rbar_z) + lambda * (rbar_z - rbar),
// context-free rollouts get A_i = r_i - rbar; the whole vector is then
// normalized with its own mean and population standard deviation.
AdvantageVector inter_intra_advantage(const Eigen::VectorXd& rewards,
                                      const std::vector<int>& context_labels, double lambda,
                                      double delta);
AdvantageVector inter_intra_advantage(const RolloutGroup& group, double lambda, double delta);

// Ordering oracle for binary rewards: true iff every strictly higher reward
// received a strictly higher pre-normalization advantage. Normalization is a
// strictly increasing affine map when std_a > 0, so the ordering carries over
// to the normalized values.
bool check_ordering(const Eigen::VectorXd& rewards, const std::vector<int>& context_labels,
                    double lambda);

}  // namespace nudgerl
