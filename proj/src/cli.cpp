#include "henry/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "henry/io.hpp"
#include "henry/study.hpp"

namespace henry {

namespace fs = std::filesystem;

namespace {

std::string plan_file_name(double eps) {
  return "plan-" + io::fmt(eps) + ".json";
}

void print_plan(const StudyPlan& p) {
  std::cout << "plan " << p.run_id << ": eps=" << io::fmt(p.eps)
            << " L=" << p.L << (p.bias_limited ? " (bias limited)" : "")
            << " E0=" << io::fmt(p.E0) << "\n";
  std::cout << "  rates: alpha=" << io::fmt(p.rates.alpha)
            << " beta=" << io::fmt(p.rates.beta)
            << " gamma=" << io::fmt(p.rates.gamma) << "\n";
  std::cout << "  m:";
  for (long m : p.m) std::cout << ' ' << m;
  std::cout << "\n  predicted work: mlmc=" << io::fmt(p.predicted_cost)
            << " mc=" << io::fmt(p.predicted_mc_cost) << "\n";
}

}  // namespace

int run_cli(int argc, char** argv) try {
  CLI::App app{
      "Variable-density groundwater flow in a coastal aquifer with random "
      "porosity, permeability and recharge; multilevel Monte Carlo over a "
      "nested grid hierarchy."};
  app.require_subcommand(1);

  std::string config_file, profile, sampling, qoi, out, run_id, plan_file;
  double eps = 0.0;
  std::vector<double> eps_list, xi_flag;
  std::vector<long> pilot_m;
  std::uint64_t seed = 0;
  int level = 0, workers = 0;
  long qmc_n = 0, sample_index = 0, max_steps = 0;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", config_file, "JSON configuration file");
    s->add_option("--profile", profile, "preset: desk or full")
        ->check(CLI::IsMember({"desk", "full"}));
    s->add_option("--out", out, "output directory");
    s->add_option("--seed", seed, "master random seed");
    s->add_option("--workers", workers, "solver threads")
        ->check(CLI::PositiveNumber);
    s->add_option("--qoi", qoi, "quantity of interest (QS, QFW, Q1..Q15)");
    s->add_option("--sampling", sampling, "parameter sampling")
        ->check(CLI::IsMember({"pseudo", "halton"}));
    s->add_option("--run-id", run_id, "artifact namespace");
    s->add_option("--max-steps", max_steps,
                  "truncate every trajectory after this many steps (debug)");
  };

  CLI::App* c_solve = app.add_subcommand(
      "solve", "one trajectory with field snapshots and QoI series");
  add_common(c_solve);
  c_solve->add_option("--level", level, "grid level")->required();
  c_solve->add_option("--xi", xi_flag, "explicit sample point in [-1,1]^3")
      ->expected(3);
  c_solve->add_option("--sample-index", sample_index,
                      "index of the drawn sample when --xi is absent");

  CLI::App* c_pilot = app.add_subcommand(
      "pilot", "coupled pilot batch, decay rates and level statistics");
  add_common(c_pilot);
  c_pilot->add_option("--pilot-m", pilot_m,
                      "samples per level, coarsest first");

  CLI::App* c_plan = app.add_subcommand(
      "plan", "optimal sample allocation for a tolerance, from the pilot");
  add_common(c_plan);
  c_plan->add_option("--eps", eps, "relative tolerance");

  CLI::App* c_run = app.add_subcommand(
      "run", "execute a plan and assemble the multilevel estimate");
  add_common(c_run);
  c_run->add_option("--eps", eps, "relative tolerance");
  c_run->add_option("--plan", plan_file, "plan file (default: from out/plan)");

  CLI::App* c_compare = app.add_subcommand(
      "compare", "predicted multilevel vs single-level cost table");
  add_common(c_compare);
  c_compare->add_option("--eps-list", eps_list, "tolerances for the table");

  CLI::App* c_qmc = app.add_subcommand(
      "qmc", "sequential Halton study: field statistics and quantile fans");
  add_common(c_qmc);
  c_qmc->add_option("--level", level, "grid level of the study");
  c_qmc->add_option("--n", qmc_n, "number of Halton samples");

  CLI::App* c_report = app.add_subcommand(
      "report", "regenerate plots and a text summary from artifacts");
  add_common(c_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  CLI::App* sub = app.get_subcommands().front();

  StudyConfig cfg;
  if (sub->count("--config"))
    cfg = config_from_json(io::read_text(config_file));
  if (sub->count("--profile")) apply_profile(cfg, profile);
  if (sub->count("--out")) cfg.out_dir = out;
  if (sub->count("--seed")) cfg.seed = seed;
  if (sub->count("--workers")) cfg.workers = workers;
  if (sub->count("--qoi")) cfg.qoi = qoi;
  if (sub->count("--sampling")) cfg.sampling = sampling;
  if (sub->count("--run-id")) cfg.run_id = run_id;
  if (sub->count("--max-steps")) cfg.solver.max_steps = max_steps;
  if (sub == c_pilot && c_pilot->count("--pilot-m")) cfg.pilot_m = pilot_m;
  if (sub == c_compare && c_compare->count("--eps-list"))
    cfg.eps_list = eps_list;
  if (sub == c_qmc) {
    if (c_qmc->count("--level")) cfg.qmc_level = level;
    if (c_qmc->count("--n")) cfg.qmc_n = qmc_n;
  }
  if ((sub == c_plan || sub == c_run) && sub->count("--eps")) cfg.eps = eps;
  validate_config(cfg);

  if (sub == c_solve) {
    std::optional<RandomInput> xi;
    if (c_solve->count("--xi"))
      xi = RandomInput{xi_flag[0], xi_flag[1], xi_flag[2]};
    const RunResult res = solve_one(cfg, level, xi, sample_index);
    std::cout << "solve level " << level << ": " << to_string(res.status)
              << ", steps=" << res.metrics.steps
              << ", newton=" << res.metrics.newton_iters
              << ", linear=" << res.metrics.linear_iters
              << ", work=" << io::fmt(res.metrics.work_units())
              << ", wall=" << io::fmt(res.metrics.wall_seconds) << "s\n";
    std::cout << "  c range [" << io::fmt(res.metrics.cmin) << ", "
              << io::fmt(res.metrics.cmax) << "], mass balance "
              << io::fmt(res.metrics.max_mass_balance_error) << "\n";
    if (res.status != RunStatus::ok) {
      std::cerr << "error: " << res.message << "\n";
      return 1;
    }
    std::cout << "artifacts in " << (cfg.out_dir / "solve").string() << "\n";
    return 0;
  }

  if (sub == c_pilot) {
    const auto stats = pilot_study(cfg);
    const RateFit rates = fit_rates(stats, cfg.calibration_time);
    std::cout << "pilot with";
    for (long m : cfg.pilot_m) std::cout << ' ' << m;
    std::cout << " samples on levels 0.." << stats.size() - 1 << "\n";
    std::cout << "  E0=" << io::fmt(time_averaged_mean(stats[0]))
              << " alpha=" << io::fmt(rates.alpha)
              << " beta=" << io::fmt(rates.beta)
              << " gamma=" << io::fmt(rates.gamma) << "\n";
    for (const auto& note : rates.notes) std::cout << "  note: " << note << "\n";
    std::cout << "artifacts in " << (cfg.out_dir / "pilot").string() << "\n";
    return 0;
  }

  if (sub == c_plan) {
    const StudyPlan plan = plan_from_pilot_dir(cfg, cfg.eps);
    const fs::path dir = cfg.out_dir / "plan";
    fs::create_directories(dir);
    write_plan(dir / plan_file_name(cfg.eps), plan);
    io::write_text(dir / "config.json", config_to_json(cfg));
    print_plan(plan);
    std::cout << "plan written to "
              << (dir / plan_file_name(cfg.eps)).string() << "\n";
    return 0;
  }

  if (sub == c_run) {
    StudyPlan plan;
    const fs::path default_plan =
        cfg.out_dir / "plan" / plan_file_name(cfg.eps);
    if (c_run->count("--plan"))
      plan = read_plan(plan_file);
    else if (fs::exists(default_plan))
      plan = read_plan(default_plan);
    else
      plan = plan_from_pilot_dir(cfg, cfg.eps);
    print_plan(plan);
    const MlmcResult result = execute_plan(cfg, plan);
    const size_t last = result.t.size() - 1;
    std::cout << "estimate at t=" << io::fmt(result.t[last]) << ": "
              << io::fmt(result.estimate[last]);
    if (!result.variance.empty())
      std::cout << " (stderr " << io::fmt(std::sqrt(result.variance[last]))
                << ")";
    std::cout << "\nrealized work: " << io::fmt(result.realized_cost) << "\n";
    std::cout << "artifacts in "
              << (cfg.out_dir / ("run-" + io::fmt(plan.eps))).string() << "\n";
    return 0;
  }

  if (sub == c_compare) {
    const fs::path stats_file = cfg.out_dir / "pilot" / "level_stats.csv";
    if (!fs::exists(stats_file))
      throw std::runtime_error("no pilot statistics at " +
                               stats_file.string() +
                               "; run the pilot subcommand first");
    const auto stats = io::read_level_stats(stats_file);
    const CostReport rep = compare_study(cfg, stats);
    std::cout << "regime: " << rep.regime
              << (rep.theorem_applicable ? "" : " (bias assumption not met)")
              << "\n";
    std::cout << "predicted cost exponents: mlmc=" << io::fmt(rep.mlmc_exponent)
              << " mc=" << io::fmt(rep.mc_exponent) << "\n";
    std::cout << "eps        L  cost_mlmc      cost_mc        ratio\n";
    for (const auto& row : rep.rows) {
      std::cout << io::fmt(row.eps) << "\t" << row.L << "  "
                << io::fmt(row.cost_mlmc) << "  " << io::fmt(row.cost_mc)
                << "  " << io::fmt(row.ratio) << "\n";
    }
    std::cout << "artifacts in " << (cfg.out_dir / "compare").string() << "\n";
    return 0;
  }

  if (sub == c_qmc) {
    const QmcSummary s = qmc_study(cfg);
    std::cout << "qmc: " << s.n << " samples on level " << s.level << "\n";
    std::cout << "largest c(T) variance " << io::fmt(s.variance_peak)
              << " at (" << io::fmt(s.variance_peak_x) << ", "
              << io::fmt(s.variance_peak_y) << ")\n";
    std::cout << "artifacts in " << (cfg.out_dir / "qmc").string() << "\n";
    return 0;
  }

  std::cout << write_report(cfg);
  std::cout << "artifacts in " << (cfg.out_dir / "report").string() << "\n";
  return 0;
} catch (const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

}  // namespace henry
