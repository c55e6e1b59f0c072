#include "nudgerl/env.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "nudgerl/common.hpp"
#include "nudgerl/rng.hpp"

namespace nudgerl {

int Problem::n_strategies() const {
    int n = 0;
    for (int s : strategy_of) n = std::max(n, s + 1);
    return n;
}

void Problem::validate() const {
    if (n_trajectories < 2)
        throw DomainError("problem " + std::to_string(id) + ": need >= 2 trajectories");
    if (static_cast<int>(strategy_of.size()) != n_trajectories)
        throw DomainError("problem " + std::to_string(id) + ": strategy_of size mismatch");
    for (int s : strategy_of)
        if (s < 0) throw DomainError("problem " + std::to_string(id) + ": negative strategy id");
    for (int y : correct)
        if (y < 0 || y >= n_trajectories)
            throw DomainError("problem " + std::to_string(id) + ": correct index out of range");
    if (oracle_trajectory && correct.count(*oracle_trajectory) == 0)
        throw DomainError("problem " + std::to_string(id) + ": oracle trajectory is not correct");
}

int Benchmark::max_trajectories() const {
    int m = 0;
    for (const auto& p : problems) m = std::max(m, p.n_trajectories);
    return m;
}

void Benchmark::validate() const {
    if (problems.size() != pools.size())
        throw DomainError("benchmark: problems/pools size mismatch");
    for (int i = 0; i < n_problems(); ++i) {
        if (problems[i].id != i)
            throw DomainError("benchmark: problem ids must be contiguous from 0");
        problems[i].validate();
        const auto& pool = pools[i];
        if (pool.problem_id != i) throw DomainError("benchmark: pool/problem id mismatch");
        std::set<int> ids;
        const int n_strat = problems[i].n_strategies();
        for (const auto& c : pool.contexts) {
            if (!ids.insert(c.id).second)
                throw DomainError("benchmark: duplicate context id in pool " + std::to_string(i));
            if (c.target_strategy < 0 || c.target_strategy >= n_strat)
                throw DomainError("benchmark: context targets unknown strategy in pool " +
                                  std::to_string(i));
        }
    }
}

int verify(const Problem& problem, int trajectory) {
    if (trajectory < 0 || trajectory >= problem.n_trajectories)
        throw DomainError("verify: trajectory " + std::to_string(trajectory) +
                          " out of range for problem " + std::to_string(problem.id));
    return problem.correct.count(trajectory) ? 1 : 0;
}

std::optional<int> dominant_trajectory(const Problem& problem) {
    for (int y = 0; y < problem.n_trajectories; ++y)
        if (problem.correct.count(y) == 0) return y;
    return std::nullopt;
}

double BenchmarkSpec::fraction_for(int strategy) const {
    if (correct_fraction.empty()) return 0.0;
    if (correct_fraction.size() == 1) return correct_fraction[0];
    return correct_fraction.at(static_cast<std::size_t>(strategy));
}

void BenchmarkSpec::validate() const {
    if (n_problems < 1) throw ConfigError("benchmark spec: n_problems must be >= 1");
    if (n_trajectories < 2) throw ConfigError("benchmark spec: n_trajectories must be >= 2");
    if (n_strategies < 1) throw ConfigError("benchmark spec: n_strategies must be >= 1");
    if (n_strategies > n_trajectories)
        throw ConfigError("benchmark spec: n_strategies > n_trajectories");
    if (contexts_per_problem < 1) throw ConfigError("benchmark spec: need >= 1 context per problem");
    if (contexts_per_problem > n_strategies)
        throw ConfigError("benchmark spec: contexts_per_problem > n_strategies "
                          "(contexts must target distinct strategies)");
    if (correct_fraction.size() != 1 &&
        static_cast<int>(correct_fraction.size()) != n_strategies)
        throw ConfigError("benchmark spec: correct_fraction must have 1 or n_strategies entries");
    for (double f : correct_fraction)
        if (f < 0.0 || f > 1.0) throw ConfigError("benchmark spec: correct_fraction outside [0,1]");
    if (rare_correct_prob <= 0.0 || rare_correct_prob >= 1.0)
        throw ConfigError("benchmark spec: rare_correct_prob must lie in (0,1)");
    if (dominant_tilt < 0.0) throw ConfigError("benchmark spec: dominant_tilt must be >= 0");
    if (context_strength <= 0.0) throw ConfigError("benchmark spec: context_strength must be > 0");
}

namespace {

// Fisher-Yates over [0, n), all draws from one stream.
std::vector<int> shuffled_indices(int n, RngStream& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        const int j = rng.uniform_int(i + 1);
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

}  // namespace

Benchmark make_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Benchmark bench;
    bench.problems.reserve(spec.n_problems);
    bench.pools.reserve(spec.n_problems);

    const int K = spec.n_trajectories;
    const int S = spec.n_strategies;

    for (int p = 0; p < spec.n_problems; ++p) {
        RngStream rng = substream(seed, Stream::Init, static_cast<std::uint64_t>(p));

        Problem prob;
        prob.id = p;
        prob.n_trajectories = K;
        prob.strategy_of.assign(K, 0);

        // Trajectory 0 is the dominant incorrect mode; the rare correct
        // trajectory lives in a different strategy whenever S >= 2.
        const int dom_strategy = rng.uniform_int(S);
        int rare_strategy = dom_strategy;
        if (S >= 2) {
            rare_strategy = rng.uniform_int(S - 1);
            if (rare_strategy >= dom_strategy) ++rare_strategy;
        }

        prob.strategy_of[0] = dom_strategy;

        // Cover every strategy at least once among indices >= 1, then fill
        // the rest uniformly.
        std::vector<int> order = shuffled_indices(K - 1, rng);  // values 0..K-2 -> index+1
        int next = 0;
        for (int s = 0; s < S; ++s) {
            if (s == dom_strategy) continue;
            prob.strategy_of[order[next++] + 1] = s;
        }
        for (; next < K - 1; ++next)
            prob.strategy_of[order[next] + 1] = rng.uniform_int(S);

        // Rare correct trajectory: uniform among the rare strategy's members
        // (excluding the dominant index 0).
        std::vector<int> rare_members;
        for (int y = 1; y < K; ++y)
            if (prob.strategy_of[y] == rare_strategy) rare_members.push_back(y);
        if (rare_members.empty())
            throw ConfigError("benchmark spec: no slot for a rare correct trajectory; "
                              "increase n_trajectories");
        const int rare_traj = rare_members[rng.uniform_int(static_cast<int>(rare_members.size()))];

        prob.correct.insert(rare_traj);
        for (int y = 1; y < K; ++y) {
            if (y == rare_traj) continue;
            if (rng.bernoulli(spec.fraction_for(prob.strategy_of[y]))) prob.correct.insert(y);
        }
        if (spec.with_oracle) prob.oracle_trajectory = rare_traj;

        // Rarity check against the actual tilted init distribution.
        Eigen::VectorXd logits = Eigen::VectorXd::Zero(K);
        logits[0] = spec.dominant_tilt;
        const Eigen::VectorXd w = (logits.array() - logits.maxCoeff()).exp();
        const double p_rare = w[rare_traj] / w.sum();
        if (!(p_rare < spec.rare_correct_prob))
            throw ConfigError("benchmark spec: dominant_tilt " + fmt_double(spec.dominant_tilt) +
                              " leaves rare-mode probability " + fmt_double(p_rare) +
                              " >= rare_correct_prob " + fmt_double(spec.rare_correct_prob));

        // Context pool: context 0 targets the rare strategy, the rest target
        // distinct other strategies in shuffled order.
        ContextPool pool;
        pool.problem_id = p;
        pool.contexts.push_back(Context{0, rare_strategy, spec.context_strength});
        std::vector<int> others;
        for (int s = 0; s < S; ++s)
            if (s != rare_strategy) others.push_back(s);
        for (int i = static_cast<int>(others.size()) - 1; i > 0; --i)
            std::swap(others[i], others[rng.uniform_int(i + 1)]);
        for (int m = 1; m < spec.contexts_per_problem; ++m)
            pool.contexts.push_back(Context{m, others[m - 1], spec.context_strength});

        bench.problems.push_back(std::move(prob));
        bench.pools.push_back(std::move(pool));
    }

    bench.validate();
    return bench;
}

void save_benchmark(const Benchmark& bench, std::ostream& out) {
    out << "# nudgerl benchmark v1\n";
    for (int i = 0; i < bench.n_problems(); ++i) {
        const Problem& p = bench.problems[i];
        const ContextPool& pool = bench.pools[i];
        out << "problem " << p.id << ' ' << p.n_trajectories;
        out << " correct " << p.correct.size();
        for (int y : p.correct) out << ' ' << y;
        out << " strategies";
        for (int s : p.strategy_of) out << ' ' << s;
        out << " oracle " << (p.oracle_trajectory ? *p.oracle_trajectory : -1);
        out << " contexts " << pool.contexts.size();
        for (const auto& c : pool.contexts)
            out << ' ' << c.id << ' ' << c.target_strategy << ' ' << fmt_double(c.strength);
        out << '\n';
    }
}

void save_benchmark_file(const Benchmark& bench, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open benchmark file for writing: " + path);
    save_benchmark(bench, out);
}

Benchmark load_benchmark(std::istream& in) {
    Benchmark bench;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok != "problem")
            throw ConfigError("benchmark file: expected 'problem', got '" + tok + "'");

        Problem p;
        std::size_t n_correct = 0, n_contexts = 0;
        int oracle = -1;
        if (!(ls >> p.id >> p.n_trajectories)) throw ConfigError("benchmark file: bad problem header");

        auto expect = [&](const char* kw) {
            ls >> tok;
            if (tok != kw) throw ConfigError(std::string("benchmark file: expected '") + kw + "'");
        };

        expect("correct");
        ls >> n_correct;
        for (std::size_t k = 0; k < n_correct; ++k) {
            int y;
            if (!(ls >> y)) throw ConfigError("benchmark file: truncated correct list");
            p.correct.insert(y);
        }
        expect("strategies");
        p.strategy_of.resize(p.n_trajectories);
        for (int& s : p.strategy_of)
            if (!(ls >> s)) throw ConfigError("benchmark file: truncated strategy list");
        expect("oracle");
        ls >> oracle;
        if (oracle >= 0) p.oracle_trajectory = oracle;
        expect("contexts");
        ls >> n_contexts;

        ContextPool pool;
        pool.problem_id = p.id;
        for (std::size_t k = 0; k < n_contexts; ++k) {
            Context c;
            if (!(ls >> c.id >> c.target_strategy >> c.strength))
                throw ConfigError("benchmark file: truncated context list");
            pool.contexts.push_back(c);
        }

        bench.problems.push_back(std::move(p));
        bench.pools.push_back(std::move(pool));
    }
    bench.validate();
    return bench;
}

Benchmark load_benchmark_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open benchmark file: " + path);
    return load_benchmark(in);
}

}  // namespace nudgerl
