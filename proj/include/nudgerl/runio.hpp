#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nudgerl/analysis.hpp"
#include "nudgerl/env.hpp"
#include "nudgerl/trainer.hpp"

namespace nudgerl {

// Flat `key = value` config text; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> parse_key_values_file(const std::string& path);

// Everything one run needs: training hyperparameters, benchmark generator
// settings (or a benchmark file to load instead), and evaluation settings.
// The generator's context strength is keyed off `kappa`, the one
// benchmark-level bias constant.
struct RunConfig {
    TrainConfig train;
    BenchmarkSpec bench;
    std::string benchmark_file;  // empty: generate from bench spec + seed
    int eval_samples = 128;
    std::vector<int> eval_ks{1, 8};
    double eval_temperature = 0.7;
};

// Merges file values and command-line overrides (overrides win), with
// field-level errors for unknown keys or unparseable values. Keys absent from
// both get their defaults; their names are appended to *defaulted.
RunConfig make_run_config(const std::map<std::string, std::string>& file_values,
                          const std::vector<std::pair<std::string, std::string>>& overrides,
                          std::vector<std::string>* defaulted = nullptr);

// Full key set in snapshot order (also the set accepted by make_run_config).
const std::vector<std::string>& run_config_keys();

void write_config_snapshot(const RunConfig& config, std::ostream& out);

// Pinned CSV schemas.
std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);
std::string summary_csv_header();

// Benchmark resolution: load benchmark_file when set, generate otherwise
// (init stream keyed by the training seed).
Benchmark resolve_benchmark(const RunConfig& config);

struct RunResult {
    EvalReport eval;
    double final_reward = 0.0;  // last-step reward_mean
    double final_pass1 = 0.0;   // mean pass@1 from the final evaluation
};

// Executes one training run into out_dir: manifest.json, config.cfg,
// benchmark.txt, metrics.csv (appended after every step), checkpoint.txt,
// eval.csv, eval_summary.json. On error the manifest is rewritten with
// status "failed" before the exception propagates.
RunResult run_train(const RunConfig& config, const std::string& out_dir,
                    const std::string& rollout_log_path = "");

struct SweepRowResult {
    std::string value;
    std::uint64_t seed = 0;
    bool ok = false;
    double final_pass1 = 0.0;
    double final_reward = 0.0;
    std::string error;
};

// One child run per (value, seed replicate); child seeds are base seed + r.
// Children that fail leave a row with ok = false; the summary CSV covers the
// completed ones. Returns all rows.
std::vector<SweepRowResult> run_sweep(const std::string& axis,
                                      const std::vector<std::string>& values,
                                      const RunConfig& base, int n_seeds,
                                      const std::string& out_dir);

// Applies one axis value (axis in {p_drop, lambda, lambda_distill, eps_high,
// rollouts, algorithm}) onto a config copy.
RunConfig apply_axis_value(const RunConfig& base, const std::string& axis,
                           const std::string& value);

std::string now_iso8601();
std::string source_revision();

}  // namespace nudgerl
