#include "nudgerl/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "nudgerl/common.hpp"
#include "nudgerl/rng.hpp"

namespace nudgerl {

namespace {

// C(n, k) when it fits in uint64 (n <= 62 always does), 0 on overflow signal.
bool binom_u64(int n, int k, std::uint64_t& out) {
    if (k < 0 || k > n) {
        out = 0;
        return true;
    }
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
        if (r > UINT64_MAX) return false;
    }
    out = static_cast<std::uint64_t>(r);
    return true;
}

double log_binom(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double pass_at_k(int n, int c, int k) {
    if (n < 1 || c < 0 || c > n) throw DomainError("pass_at_k: need 0 <= c <= n, n >= 1");
    if (k < 1 || k > n) throw DomainError("pass_at_k: need 1 <= k <= n");
    if (c == 0) return 0.0;
    if (n - c < k) return 1.0;  // every k-subset hits a correct sample

    std::uint64_t num, den;
    if (binom_u64(n - c, k, num) && binom_u64(n, k, den))
        return 1.0 - static_cast<double>(num) / static_cast<double>(den);
    return -std::expm1(log_binom(n - c, k) - log_binom(n, k));
}

EvalReport evaluate(const PolicyParams& params, const Benchmark& bench, int n_samples,
                    const std::vector<int>& ks, double temperature, std::uint64_t seed) {
    if (ks.empty()) throw ConfigError("evaluate: need at least one k");
    for (int k : ks)
        if (k < 1 || k > n_samples)
            throw ConfigError("evaluate: k = " + std::to_string(k) +
                              " outside [1, n_samples = " + std::to_string(n_samples) + "]");

    PolicyParams eval_params = params;
    eval_params.temperature = temperature;

    EvalReport report;
    report.ks = ks;
    report.mean_pass_at_k.assign(ks.size(), 0.0);

    for (const Problem& problem : bench.problems) {
        RngStream rng = substream(seed, Stream::Eval, static_cast<std::uint64_t>(problem.id));
        const ConditionedDistribution dist = distribution(eval_params, problem, std::nullopt);

        ProblemEval pe;
        pe.problem_id = problem.id;
        pe.n = n_samples;
        std::set<int> strategies;
        for (int s = 0; s < n_samples; ++s) {
            const int y = sample(dist, rng);
            pe.c += verify(problem, y);
            strategies.insert(problem.strategy_of[y]);
        }
        pe.distinct_strategies = static_cast<int>(strategies.size());
        for (std::size_t i = 0; i < ks.size(); ++i) {
            pe.pass_at_k.push_back(pass_at_k(pe.n, pe.c, ks[i]));
            report.mean_pass_at_k[i] += pe.pass_at_k.back();
        }
        report.mean_correct_fraction += static_cast<double>(pe.c) / n_samples;
        report.distinct_strategy_histogram[pe.distinct_strategies] += 1;
        report.problems.push_back(std::move(pe));
    }

    const double inv = 1.0 / bench.n_problems();
    for (double& m : report.mean_pass_at_k) m *= inv;
    report.mean_correct_fraction *= inv;
    return report;
}

double unsampled_mass(const Eigen::VectorXd& p, int n_draws) {
    if (n_draws < 0) throw DomainError("unsampled_mass: n_draws must be >= 0");
    if ((p.array() < 0.0).any()) throw DomainError("unsampled_mass: negative probability");
    if (std::abs(p.sum() - 1.0) > 1e-9)
        throw DomainError("unsampled_mass: probabilities must sum to 1");
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        total += p[i] * p[i] * std::pow(1.0 - p[i], n_draws);
    return total;
}

DeltaQTerms delta_q_terms(const PolicyParams& params, const Problem& problem,
                          const RolloutGroup& group) {
    const ConditionedDistribution base = distribution(params, problem, std::nullopt);
    std::set<int> sampled;
    for (const Rollout& r : group.rollouts) sampled.insert(r.trajectory);

    DeltaQTerms t;
    for (int y = 0; y < problem.n_trajectories; ++y) {
        const double prob = base.probs[y];
        const double sq = prob * prob;
        const bool is_correct = problem.correct.count(y) > 0;
        const bool is_sampled = sampled.count(y) > 0;
        if (is_correct) {
            t.q_pos += prob;
            (is_sampled ? t.a2 : t.u_pos2) += sq;
        } else {
            (is_sampled ? t.b2 : t.u_neg2) += sq;
        }
    }
    t.q_neg = 1.0 - t.q_pos;
    return t;
}

double delta_q_pos(const DeltaQTerms& t, double s_r, double learning_rate, int n_rollouts) {
    if (n_rollouts < 1) throw DomainError("delta_q_pos: n_rollouts must be >= 1");
    return learning_rate / n_rollouts *
           ((1.0 - s_r) * t.q_neg * t.a2 + s_r * t.q_pos * t.b2 +
            s_r * (t.q_pos * t.u_neg2 - t.q_neg * t.u_pos2));
}

int distinct_strategies(const RolloutGroup& group, const Problem& problem) {
    std::set<int> seen;
    for (const Rollout& r : group.rollouts) seen.insert(problem.strategy_of[r.trajectory]);
    return static_cast<int>(seen.size());
}

void save_eval_csv(const EvalReport& report, std::ostream& out) {
    out << "problem,n,c,k,pass_at_k\n";
    for (const ProblemEval& pe : report.problems)
        for (std::size_t i = 0; i < report.ks.size(); ++i)
            out << pe.problem_id << ',' << pe.n << ',' << pe.c << ',' << report.ks[i] << ','
                << fmt_double(pe.pass_at_k[i]) << '\n';
}

void save_eval_summary_json(const EvalReport& report, std::ostream& out) {
    nlohmann::json j;
    j["n_problems"] = report.problems.size();
    j["ks"] = report.ks;
    nlohmann::json means;
    for (std::size_t i = 0; i < report.ks.size(); ++i)
        means[std::to_string(report.ks[i])] = report.mean_pass_at_k[i];
    j["mean_pass_at_k"] = means;
    j["mean_correct_fraction"] = report.mean_correct_fraction;
    nlohmann::json hist;
    for (const auto& [distinct, count] : report.distinct_strategy_histogram)
        hist[std::to_string(distinct)] = count;
    j["distinct_strategy_histogram"] = hist;
    out << j.dump(2) << '\n';
}

}  // namespace nudgerl
