#include "nudgerl/runio.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nudgerl/common.hpp"
#include "nudgerl/nudging.hpp"
#include "nudgerl/rng.hpp"

#ifndef NUDGERL_SOURCE_REVISION
#define NUDGERL_SOURCE_REVISION "unknown"
#endif

namespace fs = std::filesystem;

namespace nudgerl {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': cannot parse '" + value + "' as number");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': cannot parse '" + value + "' as integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config field '" + key + "': cannot parse '" + value + "' as bool");
}

std::vector<std::string> split_commas(const std::string& value) {
    std::vector<std::string> parts;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

std::map<std::string, std::string> parse_key_values_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_key_values(in);
}

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = {
        "algorithm",      "n_rollouts",    "steps",
        "learning_rate",  "lambda",        "lambda_distill",
        "p_drop",         "eps_low",       "eps_high",
        "delta",          "kappa",         "temperature",
        "seed",           "optimizer",     "pope_prefix_fraction",
        "pope_mixture",   "ema_decay",     "bench_problems",
        "bench_trajectories", "bench_strategies", "bench_contexts",
        "bench_correct_fraction", "bench_rare_prob", "bench_tilt",
        "bench_oracle",   "benchmark_file", "eval_samples",
        "eval_ks",        "eval_temperature",
    };
    return keys;
}

namespace {

void apply_key(RunConfig& c, const std::string& key, const std::string& value) {
    TrainConfig& t = c.train;
    BenchmarkSpec& b = c.bench;
    if (key == "algorithm") t.algorithm = algorithm_from_string(value);
    else if (key == "n_rollouts") t.n_rollouts = static_cast<int>(parse_int(key, value));
    else if (key == "steps") t.steps = static_cast<int>(parse_int(key, value));
    else if (key == "learning_rate") t.learning_rate = parse_double(key, value);
    else if (key == "lambda") t.lambda = parse_double(key, value);
    else if (key == "lambda_distill") t.lambda_distill = parse_double(key, value);
    else if (key == "p_drop") t.p_drop = parse_double(key, value);
    else if (key == "eps_low") t.eps_low = parse_double(key, value);
    else if (key == "eps_high") t.eps_high = parse_double(key, value);
    else if (key == "delta") t.delta = parse_double(key, value);
    else if (key == "kappa") t.kappa = parse_double(key, value);
    else if (key == "temperature") t.temperature = parse_double(key, value);
    else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "optimizer") t.optimizer = optimizer_from_string(value);
    else if (key == "pope_prefix_fraction") t.pope_prefix_fraction = parse_double(key, value);
    else if (key == "pope_mixture") t.pope_mixture = parse_double(key, value);
    else if (key == "ema_decay") t.ema_decay = parse_double(key, value);
    else if (key == "bench_problems") b.n_problems = static_cast<int>(parse_int(key, value));
    else if (key == "bench_trajectories") b.n_trajectories = static_cast<int>(parse_int(key, value));
    else if (key == "bench_strategies") b.n_strategies = static_cast<int>(parse_int(key, value));
    else if (key == "bench_contexts") b.contexts_per_problem = static_cast<int>(parse_int(key, value));
    else if (key == "bench_correct_fraction") {
        b.correct_fraction.clear();
        for (const std::string& part : split_commas(value))
            b.correct_fraction.push_back(parse_double(key, part));
        if (b.correct_fraction.empty())
            throw ConfigError("config field 'bench_correct_fraction': empty list");
    } else if (key == "bench_rare_prob") b.rare_correct_prob = parse_double(key, value);
    else if (key == "bench_tilt") b.dominant_tilt = parse_double(key, value);
    else if (key == "bench_oracle") b.with_oracle = parse_bool(key, value);
    else if (key == "benchmark_file") c.benchmark_file = value;
    else if (key == "eval_samples") c.eval_samples = static_cast<int>(parse_int(key, value));
    else if (key == "eval_ks") {
        c.eval_ks.clear();
        for (const std::string& part : split_commas(value))
            c.eval_ks.push_back(static_cast<int>(parse_int(key, part)));
        if (c.eval_ks.empty()) throw ConfigError("config field 'eval_ks': empty list");
    } else if (key == "eval_temperature") c.eval_temperature = parse_double(key, value);
    else throw ConfigError("unknown config field '" + key + "'");
}

}  // namespace

RunConfig make_run_config(const std::map<std::string, std::string>& file_values,
                          const std::vector<std::pair<std::string, std::string>>& overrides,
                          std::vector<std::string>* defaulted) {
    RunConfig config;
    std::map<std::string, std::string> merged = file_values;
    for (const auto& [key, value] : overrides) merged[key] = value;
    for (const auto& [key, value] : merged) apply_key(config, key, value);

    // The generated pool's bias strength is the benchmark-level kappa.
    config.bench.context_strength = config.train.kappa;

    if (defaulted)
        for (const std::string& key : run_config_keys())
            if (merged.find(key) == merged.end()) defaulted->push_back(key);
    return config;
}

void write_config_snapshot(const RunConfig& config, std::ostream& out) {
    const TrainConfig& t = config.train;
    const BenchmarkSpec& b = config.bench;
    out << "algorithm = " << to_string(t.algorithm) << '\n';
    out << "n_rollouts = " << t.n_rollouts << '\n';
    out << "steps = " << t.steps << '\n';
    out << "learning_rate = " << fmt_double(t.learning_rate) << '\n';
    out << "lambda = " << fmt_double(t.lambda) << '\n';
    out << "lambda_distill = " << fmt_double(t.lambda_distill) << '\n';
    out << "p_drop = " << fmt_double(t.p_drop) << '\n';
    out << "eps_low = " << fmt_double(t.eps_low) << '\n';
    out << "eps_high = " << fmt_double(t.eps_high) << '\n';
    out << "delta = " << fmt_double(t.delta) << '\n';
    out << "kappa = " << fmt_double(t.kappa) << '\n';
    out << "temperature = " << fmt_double(t.temperature) << '\n';
    out << "seed = " << t.seed << '\n';
    out << "optimizer = " << to_string(t.optimizer) << '\n';
    out << "pope_prefix_fraction = " << fmt_double(t.pope_prefix_fraction) << '\n';
    out << "pope_mixture = " << fmt_double(t.pope_mixture) << '\n';
    out << "ema_decay = " << fmt_double(t.ema_decay) << '\n';
    out << "bench_problems = " << b.n_problems << '\n';
    out << "bench_trajectories = " << b.n_trajectories << '\n';
    out << "bench_strategies = " << b.n_strategies << '\n';
    out << "bench_contexts = " << b.contexts_per_problem << '\n';
    out << "bench_correct_fraction = ";
    for (std::size_t i = 0; i < b.correct_fraction.size(); ++i)
        out << (i ? "," : "") << fmt_double(b.correct_fraction[i]);
    out << '\n';
    out << "bench_rare_prob = " << fmt_double(b.rare_correct_prob) << '\n';
    out << "bench_tilt = " << fmt_double(b.dominant_tilt) << '\n';
    out << "bench_oracle = " << (b.with_oracle ? "true" : "false") << '\n';
    out << "benchmark_file = " << config.benchmark_file << '\n';
    out << "eval_samples = " << config.eval_samples << '\n';
    out << "eval_ks = ";
    for (std::size_t i = 0; i < config.eval_ks.size(); ++i)
        out << (i ? "," : "") << config.eval_ks[i];
    out << '\n';
    out << "eval_temperature = " << fmt_double(config.eval_temperature) << '\n';
}

std::string metrics_csv_header() {
    return "step,reward_mean,reward_mean_dropout,reward_mean_hinted,ema_reward,"
           "loss_rl,loss_distill,clip_fraction,distinct_strategies";
}

std::string metrics_csv_row(const StepMetrics& m) {
    std::ostringstream os;
    os << m.step << ',' << fmt_double(m.reward_mean) << ',' << fmt_double(m.reward_mean_dropout)
       << ',' << fmt_double(m.reward_mean_hinted) << ',' << fmt_double(m.ema_reward) << ','
       << fmt_double(m.loss_rl) << ',' << fmt_double(m.loss_distill) << ','
       << fmt_double(m.clip_fraction) << ',' << fmt_double(m.distinct_strategies);
    return os.str();
}

std::string summary_csv_header() {
    return "axis,value,seed,final_pass1,final_reward";
}

Benchmark resolve_benchmark(const RunConfig& config) {
    if (!config.benchmark_file.empty()) return load_benchmark_file(config.benchmark_file);
    return make_benchmark(config.bench, config.train.seed);
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string source_revision() {
    return NUDGERL_SOURCE_REVISION;
}

namespace {

nlohmann::json config_json(const RunConfig& config) {
    std::ostringstream snap;
    write_config_snapshot(config, snap);
    nlohmann::json j;
    std::istringstream in(snap.str());
    for (const auto& [key, value] : parse_key_values(in)) j[key] = value;
    return j;
}

void write_manifest(const fs::path& path, const RunConfig& config, const std::string& out_dir,
                    const std::string& started, const std::string& finished,
                    const std::string& status, const std::string& error) {
    nlohmann::json j;
    j["config"] = config_json(config);
    j["master_seed"] = config.train.seed;
    j["benchmark_file"] = (fs::path(out_dir) / "benchmark.txt").string();
    j["output_dir"] = out_dir;
    j["source_revision"] = source_revision();
    j["started_at"] = started;
    j["finished_at"] = finished;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write manifest: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

RunResult run_train(const RunConfig& config, const std::string& out_dir,
                    const std::string& rollout_log_path) {
    config.train.validate();
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const std::string started = now_iso8601();

    write_manifest(dir / "manifest.json", config, out_dir, started, "", "running", "");
    {
        std::ofstream snap(dir / "config.cfg");
        if (!snap) throw ConfigError("cannot write config snapshot in " + out_dir);
        write_config_snapshot(config, snap);
    }

    try {
        const Benchmark bench = resolve_benchmark(config);
        save_benchmark_file(bench, (dir / "benchmark.txt").string());

        PolicyParams params =
            init_params(bench, config.bench.dominant_tilt, config.train.temperature);

        std::ofstream metrics(dir / "metrics.csv");
        if (!metrics) throw ConfigError("cannot write metrics.csv in " + out_dir);
        metrics << metrics_csv_header() << '\n';
        metrics.flush();

        std::ofstream rollout_log;
        if (!rollout_log_path.empty()) {
            rollout_log.open(rollout_log_path);
            if (!rollout_log) throw ConfigError("cannot write rollout log: " + rollout_log_path);
        }

        TrainResult trained = train(
            config.train, bench, std::move(params),
            [&](const StepMetrics& m) {
                metrics << metrics_csv_row(m) << '\n';
                metrics.flush();
            },
            rollout_log_path.empty()
                ? GroupCallback{}
                : [&](const Problem&, int step, const RolloutGroup& group) {
                      append_rollout_log(rollout_log, group, step);
                  });

        save_params_file(trained.params, (dir / "checkpoint.txt").string());

        RunResult result;
        result.eval = evaluate(trained.params, bench, config.eval_samples, config.eval_ks,
                               config.eval_temperature, config.train.seed);
        result.final_reward = trained.metrics.back().reward_mean;
        for (std::size_t i = 0; i < result.eval.ks.size(); ++i)
            if (result.eval.ks[i] == 1) result.final_pass1 = result.eval.mean_pass_at_k[i];

        {
            std::ofstream csv(dir / "eval.csv");
            save_eval_csv(result.eval, csv);
            std::ofstream json_out(dir / "eval_summary.json");
            save_eval_summary_json(result.eval, json_out);
        }

        write_manifest(dir / "manifest.json", config, out_dir, started, now_iso8601(),
                       "completed", "");
        return result;
    } catch (const std::exception& e) {
        write_manifest(dir / "manifest.json", config, out_dir, started, now_iso8601(), "failed",
                       e.what());
        throw;
    }
}

RunConfig apply_axis_value(const RunConfig& base, const std::string& axis,
                           const std::string& value) {
    RunConfig config = base;
    if (axis == "p_drop") config.train.p_drop = parse_double(axis, value);
    else if (axis == "lambda") config.train.lambda = parse_double(axis, value);
    else if (axis == "lambda_distill") config.train.lambda_distill = parse_double(axis, value);
    else if (axis == "eps_high") config.train.eps_high = parse_double(axis, value);
    else if (axis == "rollouts") config.train.n_rollouts = static_cast<int>(parse_int(axis, value));
    else if (axis == "algorithm") config.train.algorithm = algorithm_from_string(value);
    else
        throw ConfigError("unknown sweep axis '" + axis +
                          "' (expected p_drop|lambda|lambda_distill|eps_high|rollouts|algorithm)");
    return config;
}

std::vector<SweepRowResult> run_sweep(const std::string& axis,
                                      const std::vector<std::string>& values,
                                      const RunConfig& base, int n_seeds,
                                      const std::string& out_dir) {
    if (values.empty()) throw ConfigError("sweep: empty values list");
    if (n_seeds < 1) throw ConfigError("sweep: need >= 1 seed replicate");

    fs::create_directories(out_dir);
    std::vector<SweepRowResult> rows;

    for (const std::string& value : values) {
        for (int r = 0; r < n_seeds; ++r) {
            RunConfig child = apply_axis_value(base, axis, value);
            child.train.seed = base.train.seed + static_cast<std::uint64_t>(r);

            SweepRowResult row;
            row.value = value;
            row.seed = child.train.seed;
            const fs::path child_dir =
                fs::path(out_dir) / (axis + "=" + value + "_seed" + std::to_string(row.seed));
            try {
                const RunResult res = run_train(child, child_dir.string());
                row.ok = true;
                row.final_pass1 = res.final_pass1;
                row.final_reward = res.final_reward;
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
    }

    std::ofstream summary(fs::path(out_dir) / "summary.csv");
    if (!summary) throw ConfigError("cannot write sweep summary in " + out_dir);
    summary << summary_csv_header() << '\n';
    for (const SweepRowResult& row : rows)
        if (row.ok)
            summary << axis << ',' << row.value << ',' << row.seed << ','
                    << fmt_double(row.final_pass1) << ',' << fmt_double(row.final_reward) << '\n';
    return rows;
}

}  // namespace nudgerl
