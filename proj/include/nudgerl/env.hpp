#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nudgerl {

// A synthetic verifiable-reward problem: a finite trajectory space where each
// trajectory carries a strategy label and is either correct or not.
struct Problem {
    int id = 0;
    int n_trajectories = 0;
    std::set<int> correct;                 // may be empty (unsolvable stress case)
    std::vector<int> strategy_of;          // one strategy id per trajectory
    std::optional<int> oracle_trajectory;  // known-correct; used by the pope_sim baseline

    int n_strategies() const;
    void validate() const;  // throws DomainError on broken invariants
};

// A strategy-level nudge: conditioning on it adds `strength` to the logits of
// every trajectory labelled with `target_strategy`.
struct Context {
    int id = 0;
    int target_strategy = 0;
    double strength = 0.0;  // logit units, > 0
};

struct ContextPool {
    int problem_id = 0;
    std::vector<Context> contexts;  // ids unique within the pool
};

struct Benchmark {
    std::vector<Problem> problems;   // problem i has id i
    std::vector<ContextPool> pools;  // pools[i] belongs to problems[i]

    int n_problems() const { return static_cast<int>(problems.size()); }
    int max_trajectories() const;
    void validate() const;
};

// Binary verifier R(problem, trajectory) in {0, 1}. Pure.
int verify(const Problem& problem, int trajectory);

// The trajectory the initial policy is tilted toward: the lowest-indexed
// incorrect one (nothing when every trajectory is correct). Derivable from a
// benchmark file alone, so runs reproduce from (config, seed, benchmark).
std::optional<int> dominant_trajectory(const Problem& problem);

// Generator config for synthetic benchmarks.
struct BenchmarkSpec {
    int n_problems = 50;
    int n_trajectories = 12;
    int n_strategies = 4;
    int contexts_per_problem = 2;  // M
    // Probability that a trajectory of strategy s (other than the dominant and
    // the designated rare one) is correct. Size 1 broadcasts to all strategies.
    std::vector<double> correct_fraction{0.15};
    double rare_correct_prob = 0.02;  // init probability of the rare correct mode must stay below this
    double dominant_tilt = 5.0;       // logit boost the initial policy puts on the dominant mode
    double context_strength = 6.0;    // kappa for generated contexts
    bool with_oracle = true;

    double fraction_for(int strategy) const;
    void validate() const;  // throws ConfigError on inconsistent settings
};

// Deterministic given (spec, seed). Each problem gets a rare correct
// trajectory whose probability under the tilted initial policy is below
// spec.rare_correct_prob (checked by evaluating the softmax), and a context
// pool of M distinct-strategy targets, one of them the rare strategy.
Benchmark make_benchmark(const BenchmarkSpec& spec, std::uint64_t seed);

// Line-oriented text format, one problem per record:
//   problem <id> <n_traj> correct <m> <idx...> strategies <s...> oracle <idx|-1> contexts <M> (<id> <target> <strength>)...
void save_benchmark(const Benchmark& bench, std::ostream& out);
void save_benchmark_file(const Benchmark& bench, const std::string& path);
Benchmark load_benchmark(std::istream& in);
Benchmark load_benchmark_file(const std::string& path);

}  // namespace nudgerl
