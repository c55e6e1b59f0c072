#include "nudgerl/nudging.hpp"

#include <sstream>
#include <string>

#include "nudgerl/common.hpp"

namespace nudgerl {

Eigen::VectorXd RolloutGroup::rewards() const {
    Eigen::VectorXd r(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) r[static_cast<Eigen::Index>(i)] = rollouts[i].reward;
    return r;
}

std::vector<int> RolloutGroup::context_labels() const {
    std::vector<int> labels(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i)
        labels[i] = rollouts[i].context ? rollouts[i].context->id : -1;
    return labels;
}

std::vector<ContextAssignment> assign_contexts(const ContextPool& pool, int n, double p_drop,
                                               RngStream& context_rng) {
    if (pool.contexts.empty()) throw ConfigError("assign_contexts: empty context pool");
    if (n < 1) throw ConfigError("assign_contexts: n must be >= 1");
    if (p_drop < 0.0 || p_drop > 1.0) throw ConfigError("assign_contexts: p_drop outside [0,1]");

    std::vector<ContextAssignment> out(n);
    const int m = static_cast<int>(pool.contexts.size());
    for (int i = 0; i < n; ++i) {
        ContextAssignment& a = out[i];
        a.rollout_index = i;
        a.drawn = pool.contexts[context_rng.uniform_int(m)];
        a.kept = context_rng.bernoulli(1.0 - p_drop);
        if (a.kept) a.effective = a.drawn;
    }
    return out;
}

namespace {

RolloutGroup sample_with_assignments(const PolicyParams& params, const Problem& problem,
                                     const std::vector<std::optional<Context>>& zs,
                                     RngStream& trajectory_rng) {
    const ConditionedDistribution base = distribution(params, problem, std::nullopt);

    RolloutGroup group;
    group.problem_id = problem.id;
    group.rollouts.reserve(zs.size());

    // Cache conditioned distributions per context id; base re-used for z = empty.
    std::vector<std::pair<int, ConditionedDistribution>> cache;
    auto dist_for = [&](const std::optional<Context>& z) -> const ConditionedDistribution& {
        if (!z) return base;
        for (const auto& [id, d] : cache)
            if (id == z->id) return d;
        cache.emplace_back(z->id, distribution(params, problem, z));
        return cache.back().second;
    };

    for (const auto& z : zs) {
        const ConditionedDistribution& dist = dist_for(z);
        Rollout r;
        r.trajectory = sample(dist, trajectory_rng);
        r.context = z;
        r.reward = verify(problem, r.trajectory);
        r.logprob_conditioned = dist.logprobs[r.trajectory];
        r.logprob_base = base.logprobs[r.trajectory];
        group.rollouts.push_back(std::move(r));
    }
    return group;
}

}  // namespace

RolloutGroup generate_group(const PolicyParams& params, const Problem& problem,
                            const ContextPool& pool, int n, double p_drop,
                            RngStream& context_rng, RngStream& trajectory_rng) {
    const auto assignments = assign_contexts(pool, n, p_drop, context_rng);
    std::vector<std::optional<Context>> zs(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) zs[i] = assignments[i].effective;
    return sample_with_assignments(params, problem, zs, trajectory_rng);
}

RolloutGroup generate_group_base(const PolicyParams& params, const Problem& problem, int n,
                                 RngStream& trajectory_rng) {
    if (n < 1) throw ConfigError("generate_group_base: n must be >= 1");
    std::vector<std::optional<Context>> zs(n);
    return sample_with_assignments(params, problem, zs, trajectory_rng);
}

RolloutGroup generate_group_balanced(const PolicyParams& params, const Problem& problem,
                                     const ContextPool& pool, int n,
                                     RngStream& trajectory_rng) {
    if (pool.contexts.empty()) throw ConfigError("generate_group_balanced: empty context pool");
    if (n < 1) throw ConfigError("generate_group_balanced: n must be >= 1");
    const int m = static_cast<int>(pool.contexts.size());
    std::vector<std::optional<Context>> zs(n);
    for (int i = 0; i < n; ++i) zs[i] = pool.contexts[static_cast<int>(
        static_cast<long long>(i) * m / n)];
    return sample_with_assignments(params, problem, zs, trajectory_rng);
}

RolloutGroup generate_group_oracle(const PolicyParams& params, const Problem& problem,
                                   const Context& oracle_context, double mixture, int n,
                                   RngStream& context_rng, RngStream& trajectory_rng) {
    if (n < 1) throw ConfigError("generate_group_oracle: n must be >= 1");
    if (mixture < 0.0 || mixture > 1.0)
        throw ConfigError("generate_group_oracle: mixture outside [0,1]");
    std::vector<std::optional<Context>> zs(n);
    for (int i = 0; i < n; ++i)
        if (context_rng.bernoulli(mixture)) zs[i] = oracle_context;
    return sample_with_assignments(params, problem, zs, trajectory_rng);
}

std::optional<int> discovery_cost(const PolicyParams& params, const Problem& problem, int target,
                                  const std::optional<Context>& context, int max_draws,
                                  RngStream& rng) {
    if (max_draws < 1) throw ConfigError("discovery_cost: max_draws must be >= 1");
    if (target < 0 || target >= problem.n_trajectories)
        throw DomainError("discovery_cost: target out of range");
    const ConditionedDistribution dist = distribution(params, problem, context);
    for (int draw = 1; draw <= max_draws; ++draw)
        if (sample(dist, rng) == target) return draw;
    return std::nullopt;
}

void append_rollout_log(std::ostream& out, const RolloutGroup& group, int step) {
    for (int i = 0; i < group.size(); ++i) {
        const Rollout& r = group.rollouts[i];
        out << group.problem_id << ' ' << step << ' ' << i << ' ' << r.trajectory << ' '
            << (r.context ? r.context->id : -1) << ' ' << (r.context ? 1 : 0) << ' ' << r.reward
            << ' ' << fmt_double(r.logprob_conditioned) << ' ' << fmt_double(r.logprob_base)
            << '\n';
    }
}

std::vector<RolloutLogRecord> read_rollout_log(std::istream& in) {
    std::vector<RolloutLogRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        RolloutLogRecord rec;
        if (!(ls >> rec.problem_id >> rec.step >> rec.rollout_index >> rec.trajectory >>
              rec.context_id >> rec.mask >> rec.reward >> rec.logprob_conditioned >>
              rec.logprob_base))
            throw ConfigError("rollout log: malformed line: " + line);
        records.push_back(rec);
    }
    return records;
}

}  // namespace nudgerl
