#include "nudgerl/advantage.hpp"

#include <algorithm>
#include <cmath>

#include "nudgerl/common.hpp"

namespace nudgerl {

namespace {

AdvantageVector build(const Eigen::VectorXd& rewards, const std::vector<int>& labels,
                      double lambda, double delta) {
    const Eigen::Index n = rewards.size();
    if (n < 2) throw DomainError("advantage: need at least 2 rollouts");
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw DomainError("advantage: rewards/labels size mismatch");
    if (!(delta > 0.0)) throw DomainError("advantage: delta must be > 0");

    AdvantageVector adv;
    adv.stats.delta = delta;
    adv.stats.reward_mean = rewards.mean();
    const double rbar = adv.stats.reward_mean;

    // Context means over the unique labels, in first-appearance order.
    std::vector<int> unique;
    for (int l : labels)
        if (std::find(unique.begin(), unique.end(), l) == unique.end()) unique.push_back(l);
    for (int l : unique) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (labels[i] == l) {
                sum += rewards[i];
                ++count;
            }
        adv.stats.context_means.emplace_back(l, sum / count);
    }
    auto mean_of = [&](int label) {
        for (const auto& [l, m] : adv.stats.context_means)
            if (l == label) return m;
        return rbar;  // unreachable
    };

    adv.pre_norm.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[i] < 0) {
            adv.pre_norm[i] = rewards[i] - rbar;
        } else {
            const double rbar_z = mean_of(labels[i]);
            adv.pre_norm[i] = (rewards[i] - rbar_z) + lambda * (rbar_z - rbar);
        }
    }

    adv.stats.mean_a = adv.pre_norm.mean();
    const Eigen::ArrayXd centered = adv.pre_norm.array() - adv.stats.mean_a;
    adv.stats.std_a = std::sqrt(centered.square().mean());
    adv.normalized = (centered / (adv.stats.std_a + delta)).matrix();
    return adv;
}

}  // namespace

AdvantageVector grpo_advantage(const Eigen::VectorXd& rewards, double delta) {
    return build(rewards, std::vector<int>(rewards.size(), -1), 0.0, delta);
}

AdvantageVector inter_intra_advantage(const Eigen::VectorXd& rewards,
                                      const std::vector<int>& context_labels, double lambda,
                                      double delta) {
    return build(rewards, context_labels, lambda, delta);
}

AdvantageVector inter_intra_advantage(const RolloutGroup& group, double lambda, double delta) {
    return build(group.rewards(), group.context_labels(), lambda, delta);
}

bool check_ordering(const Eigen::VectorXd& rewards, const std::vector<int>& context_labels,
                    double lambda) {
    const AdvantageVector adv = inter_intra_advantage(rewards, context_labels, lambda, 1e-4);
    const Eigen::Index n = rewards.size();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (rewards[i] > rewards[j] && !(adv.pre_norm[i] > adv.pre_norm[j])) return false;
    return true;
}

}  // namespace nudgerl
