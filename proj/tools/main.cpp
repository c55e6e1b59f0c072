#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nudgerl/analysis.hpp"
#include "nudgerl/common.hpp"
#include "nudgerl/env.hpp"
#include "nudgerl/policy.hpp"
#include "nudgerl/runio.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw nudgerl::ConfigError("--set expects key=value, got '" + s + "'");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return overrides;
}

nudgerl::RunConfig load_run_config(const std::string& config_path,
                                   const std::vector<std::string>& sets, bool log_defaults) {
    std::map<std::string, std::string> file_values;
    if (!config_path.empty()) file_values = nudgerl::parse_key_values_file(config_path);
    std::vector<std::string> defaulted;
    nudgerl::RunConfig config =
        nudgerl::make_run_config(file_values, parse_overrides(sets), &defaulted);
    if (log_defaults && !defaulted.empty()) {
        std::cerr << "defaults applied:";
        for (const std::string& key : defaulted) std::cerr << ' ' << key;
        std::cerr << '\n';
    }
    return config;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(csv);
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured-exploration RLVR simulator (tabular softmax policies)"};
    app.require_subcommand(1);

    std::string config_path, out_path, rollout_log;
    std::vector<std::string> sets;

    auto* cmd_train = app.add_subcommand("train", "Run one training run into a run directory");
    cmd_train->add_option("--config", config_path, "flat key=value config file");
    cmd_train->add_option("--set", sets, "override a config field (key=value, repeatable)");
    cmd_train->add_option("--out", out_path, "run output directory")->required();
    cmd_train->add_option("--rollout-log", rollout_log, "also write a per-rollout log file");

    std::string axis, values_csv;
    int n_seeds = 1;
    auto* cmd_sweep = app.add_subcommand("sweep", "Run one training run per axis value");
    cmd_sweep->add_option("--config", config_path, "flat key=value config file");
    cmd_sweep->add_option("--set", sets, "override a config field (key=value, repeatable)");
    cmd_sweep
        ->add_option("--axis", axis,
                     "one of p_drop|lambda|lambda_distill|eps_high|rollouts|algorithm")
        ->required();
    cmd_sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
    cmd_sweep->add_option("--seeds", n_seeds, "seed replicates per value (default 1)");
    cmd_sweep->add_option("--out", out_path, "sweep output directory")->required();

    std::string checkpoint_path, benchmark_path, eval_json;
    int eval_n = 128;
    std::string eval_ks_csv = "1";
    double eval_temperature = 0.7;
    std::uint64_t eval_seed = 42;
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a benchmark");
    cmd_eval->add_option("--checkpoint", checkpoint_path, "policy checkpoint file")->required();
    cmd_eval->add_option("--benchmark", benchmark_path, "benchmark file")->required();
    cmd_eval->add_option("--n", eval_n, "samples per problem (default 128)");
    cmd_eval->add_option("--ks", eval_ks_csv, "comma-separated k values (default 1)");
    cmd_eval->add_option("--temperature", eval_temperature, "sampling temperature (default 0.7)");
    cmd_eval->add_option("--seed", eval_seed, "evaluation seed (default 42)");
    cmd_eval->add_option("--out", out_path, "eval CSV path (default stdout)");
    cmd_eval->add_option("--json", eval_json, "also write the JSON summary here");

    auto* cmd_make = app.add_subcommand("make-benchmark", "Generate a benchmark file");
    cmd_make->add_option("--config", config_path, "flat key=value config file");
    cmd_make->add_option("--set", sets, "override a config field (key=value, repeatable)");
    cmd_make->add_option("--out", out_path, "benchmark file path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_train->parsed()) {
            const nudgerl::RunConfig config = load_run_config(config_path, sets, true);
            const nudgerl::RunResult result = nudgerl::run_train(config, out_path, rollout_log);
            std::cout << "run completed: " << out_path
                      << "  final_reward=" << nudgerl::fmt_double(result.final_reward)
                      << "  final_pass1=" << nudgerl::fmt_double(result.final_pass1) << '\n';
            return kExitOk;
        }

        if (cmd_sweep->parsed()) {
            nudgerl::RunConfig base = load_run_config(config_path, sets, true);
            // The summary reports pass@1, so make sure the evaluation computes it.
            if (std::find(base.eval_ks.begin(), base.eval_ks.end(), 1) == base.eval_ks.end())
                base.eval_ks.insert(base.eval_ks.begin(), 1);
            const auto rows =
                nudgerl::run_sweep(axis, split_list(values_csv), base, n_seeds, out_path);
            int failed = 0;
            for (const auto& row : rows) {
                if (row.ok) {
                    std::cout << axis << '=' << row.value << " seed=" << row.seed
                              << " final_pass1=" << nudgerl::fmt_double(row.final_pass1)
                              << " final_reward=" << nudgerl::fmt_double(row.final_reward) << '\n';
                } else {
                    ++failed;
                    std::cerr << "child run failed (" << axis << '=' << row.value
                              << ", seed=" << row.seed << "): " << row.error << '\n';
                }
            }
            if (failed) {
                std::cerr << "sweep partial: " << failed << '/' << rows.size()
                          << " child runs failed; summary covers the rest\n";
                return kExitNumeric;
            }
            return kExitOk;
        }

        if (cmd_eval->parsed()) {
            const nudgerl::PolicyParams params = nudgerl::load_params_file(checkpoint_path);
            const nudgerl::Benchmark bench = nudgerl::load_benchmark_file(benchmark_path);
            std::vector<int> ks;
            for (const std::string& k : split_list(eval_ks_csv)) ks.push_back(std::stoi(k));
            const nudgerl::EvalReport report =
                nudgerl::evaluate(params, bench, eval_n, ks, eval_temperature, eval_seed);
            if (out_path.empty()) {
                nudgerl::save_eval_csv(report, std::cout);
            } else {
                std::ofstream out(out_path);
                if (!out) throw nudgerl::ConfigError("cannot write eval CSV: " + out_path);
                nudgerl::save_eval_csv(report, out);
            }
            if (!eval_json.empty()) {
                std::ofstream out(eval_json);
                if (!out) throw nudgerl::ConfigError("cannot write eval JSON: " + eval_json);
                nudgerl::save_eval_summary_json(report, out);
            }
            return kExitOk;
        }

        if (cmd_make->parsed()) {
            const nudgerl::RunConfig config = load_run_config(config_path, sets, false);
            const nudgerl::Benchmark bench = nudgerl::resolve_benchmark(config);
            nudgerl::save_benchmark_file(bench, out_path);
            std::cout << "wrote " << bench.n_problems() << " problems to " << out_path << '\n';
            return kExitOk;
        }
    } catch (const nudgerl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nudgerl::DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nudgerl::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
