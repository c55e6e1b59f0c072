#include "nudgerl/policy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nudgerl/common.hpp"

namespace nudgerl {

void PolicyParams::validate() const {
    if (!(temperature > 0.0)) throw DomainError("policy: temperature must be > 0");
    if (!theta.allFinite()) throw NumericError("policy: non-finite logits");
}

PolicyParams init_params(const Benchmark& bench, double dominant_tilt, double temperature) {
    PolicyParams params;
    params.theta = Eigen::MatrixXd::Zero(bench.n_problems(), bench.max_trajectories());
    params.temperature = temperature;
    for (const Problem& p : bench.problems)
        if (auto dom = dominant_trajectory(p)) params.theta(p.id, *dom) = dominant_tilt;
    params.validate();
    return params;
}

namespace {

void check_problem_row(const PolicyParams& params, const Problem& problem) {
    if (problem.id < 0 || problem.id >= params.theta.rows())
        throw DomainError("policy: unknown problem id " + std::to_string(problem.id));
    if (problem.n_trajectories > params.theta.cols())
        throw DomainError("policy: theta row shorter than problem " +
                          std::to_string(problem.id));
}

}  // namespace

Eigen::VectorXd logits(const PolicyParams& params, const Problem& problem,
                       const std::optional<Context>& context) {
    check_problem_row(params, problem);
    Eigen::VectorXd out = params.theta.row(problem.id).head(problem.n_trajectories);
    if (context) {
        for (int y = 0; y < problem.n_trajectories; ++y)
            if (problem.strategy_of[y] == context->target_strategy) out[y] += context->strength;
    }
    return out;
}

ConditionedDistribution distribution(const PolicyParams& params, const Problem& problem,
                                     const std::optional<Context>& context) {
    if (!(params.temperature > 0.0)) throw DomainError("policy: temperature must be > 0");
    const Eigen::VectorXd scaled = logits(params, problem, context) / params.temperature;
    if (!scaled.allFinite()) throw NumericError("policy: non-finite logits");

    const double shift = scaled.maxCoeff();
    const Eigen::ArrayXd w = (scaled.array() - shift).exp();
    const double z = w.sum();

    ConditionedDistribution dist;
    dist.problem_id = problem.id;
    dist.context = context;
    dist.probs = (w / z).matrix();
    dist.logprobs = (scaled.array() - shift - std::log(z)).matrix();
    return dist;
}

int sample(const ConditionedDistribution& dist, RngStream& rng) {
    const double u = rng.u01();
    double acc = 0.0;
    const int n = static_cast<int>(dist.probs.size());
    for (int y = 0; y < n; ++y) {
        acc += dist.probs[y];
        if (u < acc) return y;
    }
    return n - 1;  // guards against acc summing to slightly below 1
}

Eigen::VectorXd grad_logprob(const PolicyParams& params, const Problem& problem,
                             const std::optional<Context>& context, int trajectory) {
    if (trajectory < 0 || trajectory >= problem.n_trajectories)
        throw DomainError("grad_logprob: trajectory out of range");
    const ConditionedDistribution dist = distribution(params, problem, context);
    Eigen::VectorXd g = -dist.probs;
    g[trajectory] += 1.0;
    return g / params.temperature;
}

PolicyParams snapshot(const PolicyParams& params) {
    return params;
}

namespace {

std::string fmt_hex(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

}  // namespace

void save_params(const PolicyParams& params, std::ostream& out) {
    out << "# nudgerl policy checkpoint v1\n";
    out << "temperature " << fmt_hex(params.temperature) << '\n';
    out << "shape " << params.theta.rows() << ' ' << params.theta.cols() << '\n';
    for (Eigen::Index p = 0; p < params.theta.rows(); ++p) {
        out << "row " << p;
        for (Eigen::Index y = 0; y < params.theta.cols(); ++y)
            out << ' ' << fmt_hex(params.theta(p, y));
        out << '\n';
    }
}

void save_params_file(const PolicyParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    save_params(params, out);
}

PolicyParams load_params(std::istream& in) {
    PolicyParams params;
    std::string line, tok;
    Eigen::Index rows = -1, cols = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ls >> tok;
        if (tok == "temperature") {
            ls >> tok;
            params.temperature = std::strtod(tok.c_str(), nullptr);
        } else if (tok == "shape") {
            if (!(ls >> rows >> cols)) throw ConfigError("checkpoint: bad shape line");
            params.theta = Eigen::MatrixXd::Zero(rows, cols);
        } else if (tok == "row") {
            Eigen::Index p;
            if (!(ls >> p) || rows < 0 || p < 0 || p >= rows)
                throw ConfigError("checkpoint: bad row index");
            for (Eigen::Index y = 0; y < cols; ++y) {
                if (!(ls >> tok)) throw ConfigError("checkpoint: truncated row");
                params.theta(p, y) = std::strtod(tok.c_str(), nullptr);
            }
        } else {
            throw ConfigError("checkpoint: unknown record '" + tok + "'");
        }
    }
    if (rows < 0) throw ConfigError("checkpoint: missing shape");
    params.validate();
    return params;
}

PolicyParams load_params_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    return load_params(in);
}

}  // namespace nudgerl
