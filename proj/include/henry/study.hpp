#pragma once
// Pipeline operations behind the CLI subcommands: single deterministic
// solves with field snapshots, coupled pilot batches, tolerance planning,
// full estimator runs, cost comparisons, and the quasi-Monte Carlo study.
// Every operation writes its artifacts under config.out_dir/<command>/ and
// echoes the effective configuration next to them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "henry/executor.hpp"
#include "henry/mlmc.hpp"
#include "henry/params.hpp"
#include "henry/solver.hpp"

namespace henry {

struct StudyConfig {
  HenryParameters params;
  SolverConfig solver;
  std::string profile = "desk";  // "desk" | "full"
  int l_max = 2;
  std::vector<long> pilot_m = {32, 8, 4};
  std::vector<double> eps_list = {0.1, 0.05, 0.02};
  double eps = 0.05;
  double calibration_time = 640.0;
  std::uint64_t seed = 97531;
  int workers = 1;
  std::string qoi = "Q9";
  std::string sampling = "pseudo";  // "pseudo" | "halton"
  long qmc_n = 64;
  int qmc_level = 1;
  std::filesystem::path out_dir = "out";
  std::string run_id = "study";
  bool geometric_tail = false;
};

// Applies profile presets ("desk" keeps the defaults; "full" adds level 3
// and the 600-sample QMC scale) and validates ranges.
void apply_profile(StudyConfig& cfg, const std::string& profile);
void validate_config(const StudyConfig& cfg);

// JSON round trip for configuration files. Loading starts from defaults,
// applies a "profile" key first if present, then explicit keys; unknown
// keys are rejected. The serialized form is also echoed into output dirs.
std::string config_to_json(const StudyConfig& cfg);
StudyConfig config_from_json(const std::string& text);

struct StudyPlan {
  std::string run_id;
  std::string qoi;
  std::string sampling;
  std::uint64_t seed = 0;
  double eps = 0.0;
  double E0 = 0.0;
  double calibration_time = 0.0;
  RateFit rates;
  int L = 0;
  bool bias_limited = false;  // L was clamped at l_max
  std::vector<long> m;
  double predicted_cost = 0.0;
  double predicted_mc_cost = 0.0;
  std::vector<double> planning_variance;  // V per level used for m
  std::vector<double> planning_cost;      // s per level used for m
};

void write_plan(const std::filesystem::path& file, const StudyPlan& plan);
StudyPlan read_plan(const std::filesystem::path& file);

// One trajectory on `level` (xi from `xi` if given, else drawn from the
// seed at `sample_index`); writes VTK snapshots, the QoI series CSV and a
// metrics JSON. Returns the run result.
RunResult solve_one(const StudyConfig& cfg, int level,
                    std::optional<RandomInput> xi, long sample_index = 0);

// Coupled pilot batch on levels 0..pilot_m.size()-1; writes
// pilot/level_stats.csv, rates.json and the decay plot. Returns the stats.
std::vector<LevelStats> pilot_study(const StudyConfig& cfg);

// Plan from pilot statistics (measured V and s at the calibration time,
// model-extended past the pilot depth).
StudyPlan make_plan(const StudyConfig& cfg, double eps,
                    const std::vector<LevelStats>& pilot_stats);
// Convenience wrapper reading pilot/level_stats.csv from out_dir.
StudyPlan plan_from_pilot_dir(const StudyConfig& cfg, double eps);

// Executes the plan through the worker pool, accumulates the configured
// QoI, and writes run-<eps>/level_stats.csv plus result.json.
MlmcResult execute_plan(const StudyConfig& cfg, const StudyPlan& plan);

// MLMC-vs-MC cost table over eps_list from pilot statistics; writes
// compare/cost_table.csv and the cost plot.
CostReport compare_study(const StudyConfig& cfg,
                         const std::vector<LevelStats>& pilot_stats);

struct QmcSummary {
  long n = 0;
  int level = 0;
  double variance_peak_x = 0.0;  // location of the largest c(T) variance
  double variance_peak_y = 0.0;
  double variance_peak = 0.0;
};

// Sequential Halton study at qmc_level: streaming mean/variance field of
// c(T), per-point mean/variance series, and quantile fans for QS and QFW.
// Persists one sample record per index (1-based) for audit and reuse by
// other tooling.
QmcSummary qmc_study(const StudyConfig& cfg);

// Regenerates plots and a plain-text summary from artifacts already in
// out_dir; returns the summary text.
std::string write_report(const StudyConfig& cfg);

}  // namespace henry
