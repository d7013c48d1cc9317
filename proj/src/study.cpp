#include "henry/study.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "henry/io.hpp"

namespace henry {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

size_t nearest_index(const std::vector<double>& t, double tc) {
  if (t.empty()) throw std::invalid_argument("nearest_index: empty grid");
  size_t k = 0;
  for (size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i] - tc) < std::abs(t[k] - tc)) k = i;
  return k;
}

const double kInvLog4 = 1.0 / std::log(4.0);
double log4(double x) { return std::log(x) * kInvLog4; }

ordered_json params_to_json(const HenryParameters& p) {
  ordered_json j;
  j["porosity_ref"] = p.porosity_ref;
  j["diffusion"] = p.diffusion;
  j["permeability_ref"] = p.permeability_ref;
  j["rho_fresh"] = p.rho_fresh;
  j["rho_brine"] = p.rho_brine;
  j["viscosity"] = p.viscosity;
  j["kozeny_scale"] = p.kozeny_scale;
  j["gravity_y"] = p.gravity_y;
  j["recharge_base"] = p.recharge_base;
  j["fw_threshold"] = p.fw_threshold;
  return j;
}

ordered_json solver_to_json(const SolverConfig& s) {
  ordered_json j;
  j["newton_abs_tol"] = s.newton_abs_tol;
  j["newton_max_iter"] = s.newton_max_iter;
  j["backtrack_factor"] = s.backtrack_factor;
  j["max_backtracks"] = s.max_backtracks;
  j["linear_rel_tol"] = s.linear_rel_tol;
  j["linear_max_iter"] = s.linear_max_iter;
  j["mg_pre_sweeps"] = s.mg_pre_sweeps;
  j["mg_post_sweeps"] = s.mg_post_sweeps;
  j["upwind_weight"] = s.upwind_weight;
  j["max_steps"] = s.max_steps;
  j["use_multigrid"] = s.use_multigrid;
  j["check_max_principle"] = s.check_max_principle;
  j["max_principle_slack"] = s.max_principle_slack;
  j["record_step_log"] = s.record_step_log;
  return j;
}

ordered_json config_to_json_obj(const StudyConfig& c) {
  ordered_json j;
  j["schema"] = "henry-config-v1";
  j["profile"] = c.profile;
  j["l_max"] = c.l_max;
  j["pilot_m"] = c.pilot_m;
  j["eps_list"] = c.eps_list;
  j["eps"] = c.eps;
  j["calibration_time"] = c.calibration_time;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["qoi"] = c.qoi;
  j["sampling"] = c.sampling;
  j["qmc_n"] = c.qmc_n;
  j["qmc_level"] = c.qmc_level;
  j["out_dir"] = c.out_dir.string();
  j["run_id"] = c.run_id;
  j["geometric_tail"] = c.geometric_tail;
  j["params"] = params_to_json(c.params);
  j["solver"] = solver_to_json(c.solver);
  return j;
}

void reject_unknown(const ordered_json& j, const std::vector<std::string>& keys,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw std::invalid_argument("unknown config key '" + key + "' in " +
                                  where);
  }
}

void echo_config(const StudyConfig& cfg, const fs::path& dir) {
  io::write_text(dir / "config.json", config_to_json_obj(cfg).dump(1) + "\n");
}

void values_at_calibration(const LevelStats& s, double tc, double* mean_abs,
                           double* var, double* cost) {
  const size_t k = nearest_index(s.t, tc);
  if (mean_abs) *mean_abs = std::abs(s.mean_diff[k]);
  if (var) *var = s.variance_available() ? s.variance[k] : 0.0;
  if (cost) *cost = s.cost_mean;
}

std::string eps_tag(double eps) { return io::fmt(eps); }

void write_decay_plot(const fs::path& file,
                      const std::vector<LevelStats>& stats,
                      const RateFit& rates, double tc) {
  io::PlotSeries mean_s, var_s, mean_fit, var_fit;
  mean_s.label = "log4 |mean difference|";
  mean_s.color = "#1f77b4";
  var_s.label = "log4 variance";
  var_s.color = "#d62728";
  for (const auto& s : stats) {
    double ma = 0.0, vv = 0.0;
    values_at_calibration(s, tc, &ma, &vv, nullptr);
    if (ma > 0.0) {
      mean_s.x.push_back(s.level);
      mean_s.y.push_back(log4(ma));
    }
    if (vv > 0.0) {
      var_s.x.push_back(s.level);
      var_s.y.push_back(log4(vv));
    }
  }
  const double lmax = stats.empty() ? 1.0 : stats.back().level;
  mean_fit.label = "fit slope -alpha";
  mean_fit.color = "#1f77b4";
  mean_fit.dashed = true;
  mean_fit.markers = false;
  var_fit.label = "fit slope -beta";
  var_fit.color = "#d62728";
  var_fit.dashed = true;
  var_fit.markers = false;
  for (double l = 1.0; l <= lmax + 0.01; l += 0.5) {
    mean_fit.x.push_back(l);
    mean_fit.y.push_back(rates.zeta1 - rates.alpha * l);
    var_fit.x.push_back(l);
    var_fit.y.push_back(rates.zeta2 - rates.beta * l);
  }
  io::write_svg_plot(file, "Level-difference decay", "level",
                     "log4 of decay quantity",
                     {mean_s, var_s, mean_fit, var_fit});
}

void write_cost_plot(const fs::path& file, const CostReport& rep) {
  io::PlotSeries mlmc, mc;
  mlmc.label = "MLMC predicted cost";
  mlmc.color = "#1f77b4";
  mc.label = "MC predicted cost";
  mc.color = "#d62728";
  for (const auto& row : rep.rows) {
    mlmc.x.push_back(log4(1.0 / row.eps));
    mlmc.y.push_back(log4(row.cost_mlmc));
    mc.x.push_back(log4(1.0 / row.eps));
    mc.y.push_back(log4(row.cost_mc));
  }
  io::write_svg_plot(file, "Estimator cost vs tolerance", "log4(1/eps)",
                     "log4 cost", {mlmc, mc});
}

}  // namespace

void apply_profile(StudyConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    cfg.profile = "desk";
    cfg.l_max = 2;
    cfg.pilot_m = {32, 8, 4};
    cfg.eps_list = {0.1, 0.05, 0.02};
    cfg.qmc_n = 64;
    if (cfg.qmc_level > 2) cfg.qmc_level = 2;
  } else if (profile == "full") {
    cfg.profile = "full";
    cfg.l_max = 3;
    cfg.pilot_m = {32, 8, 4, 2};
    cfg.eps_list = {0.1, 0.05, 0.02, 0.01};
    cfg.qmc_n = 600;
  } else {
    throw std::invalid_argument("unknown profile '" + profile +
                                "' (expected desk or full)");
  }
}

void validate_config(const StudyConfig& cfg) {
  if (cfg.l_max < 0 || cfg.l_max > kMaxLevel)
    throw std::invalid_argument("config: l_max out of range");
  if (cfg.pilot_m.empty() ||
      cfg.pilot_m.size() > static_cast<size_t>(cfg.l_max) + 1)
    throw std::invalid_argument("config: pilot_m must cover levels 0..l_max");
  for (long m : cfg.pilot_m)
    if (m < 1) throw std::invalid_argument("config: pilot counts must be >= 1");
  if (cfg.eps_list.empty())
    throw std::invalid_argument("config: eps_list must not be empty");
  for (double e : cfg.eps_list)
    if (!(e > 0.0)) throw std::invalid_argument("config: eps must be > 0");
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("config: eps must be > 0");
  if (!(cfg.calibration_time >= 0.0) || cfg.calibration_time > kHorizon)
    throw std::invalid_argument("config: calibration_time outside [0, T]");
  if (cfg.workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (!is_qoi_name(cfg.qoi))
    throw std::invalid_argument("config: unknown qoi '" + cfg.qoi + "'");
  if (cfg.sampling != "pseudo" && cfg.sampling != "halton")
    throw std::invalid_argument("config: sampling must be pseudo or halton");
  if (cfg.qmc_n < 1) throw std::invalid_argument("config: qmc_n must be >= 1");
  if (cfg.qmc_level < 0 || cfg.qmc_level > cfg.l_max)
    throw std::invalid_argument("config: qmc_level outside [0, l_max]");
  if (cfg.run_id.empty() || cfg.run_id.find('/') != std::string::npos)
    throw std::invalid_argument("config: run_id must be a plain name");
}

std::string config_to_json(const StudyConfig& cfg) {
  return config_to_json_obj(cfg).dump(1) + "\n";
}

StudyConfig config_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  StudyConfig cfg;
  reject_unknown(j, {"schema", "profile", "l_max", "pilot_m", "eps_list",
                     "eps", "calibration_time", "seed", "workers", "qoi",
                     "sampling", "qmc_n", "qmc_level", "out_dir", "run_id",
                     "geometric_tail", "params", "solver"},
                 "config");
  if (j.contains("profile"))
    apply_profile(cfg, j.at("profile").get<std::string>());
  if (j.contains("l_max")) cfg.l_max = j.at("l_max").get<int>();
  if (j.contains("pilot_m"))
    cfg.pilot_m = j.at("pilot_m").get<std::vector<long>>();
  if (j.contains("eps_list"))
    cfg.eps_list = j.at("eps_list").get<std::vector<double>>();
  if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
  if (j.contains("calibration_time"))
    cfg.calibration_time = j.at("calibration_time").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
  if (j.contains("qoi")) cfg.qoi = j.at("qoi").get<std::string>();
  if (j.contains("sampling"))
    cfg.sampling = j.at("sampling").get<std::string>();
  if (j.contains("qmc_n")) cfg.qmc_n = j.at("qmc_n").get<long>();
  if (j.contains("qmc_level")) cfg.qmc_level = j.at("qmc_level").get<int>();
  if (j.contains("out_dir"))
    cfg.out_dir = fs::path(j.at("out_dir").get<std::string>());
  if (j.contains("run_id")) cfg.run_id = j.at("run_id").get<std::string>();
  if (j.contains("geometric_tail"))
    cfg.geometric_tail = j.at("geometric_tail").get<bool>();

  if (j.contains("params")) {
    const ordered_json& p = j.at("params");
    reject_unknown(p, {"porosity_ref", "diffusion", "permeability_ref",
                       "rho_fresh", "rho_brine", "viscosity", "kozeny_scale",
                       "gravity_y", "recharge_base", "fw_threshold"},
                   "config.params");
    auto& prm = cfg.params;
    if (p.contains("porosity_ref"))
      prm.porosity_ref = p.at("porosity_ref").get<double>();
    if (p.contains("diffusion")) prm.diffusion = p.at("diffusion").get<double>();
    if (p.contains("permeability_ref"))
      prm.permeability_ref = p.at("permeability_ref").get<double>();
    if (p.contains("rho_fresh")) prm.rho_fresh = p.at("rho_fresh").get<double>();
    if (p.contains("rho_brine")) prm.rho_brine = p.at("rho_brine").get<double>();
    if (p.contains("viscosity")) prm.viscosity = p.at("viscosity").get<double>();
    if (p.contains("kozeny_scale"))
      prm.kozeny_scale = p.at("kozeny_scale").get<double>();
    if (p.contains("gravity_y")) prm.gravity_y = p.at("gravity_y").get<double>();
    if (p.contains("recharge_base"))
      prm.recharge_base = p.at("recharge_base").get<double>();
    if (p.contains("fw_threshold"))
      prm.fw_threshold = p.at("fw_threshold").get<double>();
  }
  if (j.contains("solver")) {
    const ordered_json& s = j.at("solver");
    reject_unknown(s, {"newton_abs_tol", "newton_max_iter", "backtrack_factor",
                       "max_backtracks", "linear_rel_tol", "linear_max_iter",
                       "mg_pre_sweeps", "mg_post_sweeps", "upwind_weight",
                       "max_steps", "use_multigrid", "check_max_principle",
                       "max_principle_slack", "record_step_log"},
                   "config.solver");
    auto& sc = cfg.solver;
    if (s.contains("newton_abs_tol"))
      sc.newton_abs_tol = s.at("newton_abs_tol").get<double>();
    if (s.contains("newton_max_iter"))
      sc.newton_max_iter = s.at("newton_max_iter").get<int>();
    if (s.contains("backtrack_factor"))
      sc.backtrack_factor = s.at("backtrack_factor").get<double>();
    if (s.contains("max_backtracks"))
      sc.max_backtracks = s.at("max_backtracks").get<int>();
    if (s.contains("linear_rel_tol"))
      sc.linear_rel_tol = s.at("linear_rel_tol").get<double>();
    if (s.contains("linear_max_iter"))
      sc.linear_max_iter = s.at("linear_max_iter").get<int>();
    if (s.contains("mg_pre_sweeps"))
      sc.mg_pre_sweeps = s.at("mg_pre_sweeps").get<int>();
    if (s.contains("mg_post_sweeps"))
      sc.mg_post_sweeps = s.at("mg_post_sweeps").get<int>();
    if (s.contains("upwind_weight"))
      sc.upwind_weight = s.at("upwind_weight").get<double>();
    if (s.contains("max_steps")) sc.max_steps = s.at("max_steps").get<long>();
    if (s.contains("use_multigrid"))
      sc.use_multigrid = s.at("use_multigrid").get<bool>();
    if (s.contains("check_max_principle"))
      sc.check_max_principle = s.at("check_max_principle").get<bool>();
    if (s.contains("max_principle_slack"))
      sc.max_principle_slack = s.at("max_principle_slack").get<double>();
    if (s.contains("record_step_log"))
      sc.record_step_log = s.at("record_step_log").get<bool>();
  }
  validate_config(cfg);
  return cfg;
}

void write_plan(const fs::path& file, const StudyPlan& plan) {
  ordered_json j;
  j["schema"] = "henry-plan-v1";
  j["run_id"] = plan.run_id;
  j["qoi"] = plan.qoi;
  j["sampling"] = plan.sampling;
  j["seed"] = plan.seed;
  j["eps"] = plan.eps;
  j["E0"] = plan.E0;
  j["calibration_time"] = plan.calibration_time;
  ordered_json r;
  r["alpha"] = plan.rates.alpha;
  r["zeta1"] = plan.rates.zeta1;
  r["beta"] = plan.rates.beta;
  r["zeta2"] = plan.rates.zeta2;
  r["gamma"] = plan.rates.gamma;
  j["rates"] = std::move(r);
  j["L"] = plan.L;
  j["bias_limited"] = plan.bias_limited;
  j["m"] = plan.m;
  j["predicted_cost"] = plan.predicted_cost;
  j["predicted_mc_cost"] = plan.predicted_mc_cost;
  j["planning_variance"] = plan.planning_variance;
  j["planning_cost"] = plan.planning_cost;
  io::write_text(file, j.dump(1) + "\n");
}

StudyPlan read_plan(const fs::path& file) {
  ordered_json j = ordered_json::parse(io::read_text(file));
  if (j.at("schema").get<std::string>() != "henry-plan-v1")
    throw std::runtime_error("unknown plan schema in " + file.string());
  StudyPlan p;
  p.run_id = j.at("run_id").get<std::string>();
  p.qoi = j.at("qoi").get<std::string>();
  p.sampling = j.at("sampling").get<std::string>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.eps = j.at("eps").get<double>();
  p.E0 = j.at("E0").get<double>();
  p.calibration_time = j.at("calibration_time").get<double>();
  p.rates.alpha = j.at("rates").at("alpha").get<double>();
  p.rates.zeta1 = j.at("rates").at("zeta1").get<double>();
  p.rates.beta = j.at("rates").at("beta").get<double>();
  p.rates.zeta2 = j.at("rates").at("zeta2").get<double>();
  p.rates.gamma = j.at("rates").at("gamma").get<double>();
  p.L = j.at("L").get<int>();
  p.bias_limited = j.at("bias_limited").get<bool>();
  p.m = j.at("m").get<std::vector<long>>();
  p.predicted_cost = j.at("predicted_cost").get<double>();
  p.predicted_mc_cost = j.at("predicted_mc_cost").get<double>();
  p.planning_variance = j.at("planning_variance").get<std::vector<double>>();
  p.planning_cost = j.at("planning_cost").get<std::vector<double>>();
  return p;
}

namespace {

// Writes VTK snapshots at a fixed set of steps (plus the initial state).
class SnapshotObserver final : public StepObserver {
 public:
  SnapshotObserver(fs::path dir, std::string prefix, std::vector<long> steps)
      : dir_(std::move(dir)), prefix_(std::move(prefix)),
        steps_(std::move(steps)) {}

  void on_start(const FlowSolver& solver, const State& s) override {
    write(solver, s);
  }
  void on_step(const FlowSolver& solver, const State& s, int step) override {
    if (std::find(steps_.begin(), steps_.end(), static_cast<long>(step)) !=
        steps_.end())
      write(solver, s);
  }

 private:
  void write(const FlowSolver& solver, const State& s) {
    const auto q = solver.darcy_velocity(s);
    const auto phi = solver.porosity_vertex();
    const auto perm = solver.permeability_vertex();
    const fs::path file =
        dir_ / (prefix_ + "_t" + io::fmt(s.t) + ".vtk");
    io::write_vtk_fields(file, solver.grid(),
                         "density-driven flow snapshot at t=" + io::fmt(s.t),
                         {{"c", s.c}, {"p", s.p}, {"porosity", phi},
                          {"permeability", perm}},
                         {{"q", q}});
  }

  fs::path dir_;
  std::string prefix_;
  std::vector<long> steps_;
};

}  // namespace

RunResult solve_one(const StudyConfig& cfg, int level,
                    std::optional<RandomInput> xi, long sample_index) {
  validate_config(cfg);
  if (level < 0 || level > cfg.l_max)
    throw std::invalid_argument("solve: level outside [0, l_max]");
  const fs::path dir = cfg.out_dir / "solve";
  fs::create_directories(dir);
  echo_config(cfg, dir);

  GridHierarchy gh(level);
  const RandomInput input =
      xi ? *xi
         : (cfg.sampling == "halton"
                ? halton_point(sample_index)
                : draw_uniform(cfg.seed, level, sample_index));

  FlowSolver solver(gh, level, cfg.params, input, cfg.solver);
  QoiRecorder recorder(solver.grid(), cfg.params);
  long nsteps = solver.time_grid().steps;
  if (cfg.solver.max_steps > 0 && cfg.solver.max_steps < nsteps)
    nsteps = cfg.solver.max_steps;
  std::vector<long> snaps;
  for (int f = 1; f <= 4; ++f) {
    const long s = nsteps * f / 4;
    if (s >= 1 && (snaps.empty() || snaps.back() != s)) snaps.push_back(s);
  }
  SnapshotObserver snapshots(dir, "L" + std::to_string(level), snaps);
  RunResult res = solver.run({&recorder, &snapshots});

  std::vector<io::QoiCsvRow> rows;
  for (const auto& series : recorder.series())
    for (size_t k = 0; k < series.t.size(); ++k)
      rows.push_back({cfg.run_id, level, sample_index, series.qoi,
                      series.t[k], series.v[k]});
  io::write_qoi_series(dir / "qoi_series.csv", rows);

  ordered_json j;
  j["schema"] = "henry-solve-v1";
  j["run_id"] = cfg.run_id;
  j["level"] = level;
  j["xi"] = {input.xi1, input.xi2, input.xi3};
  j["status"] = to_string(res.status);
  j["message"] = res.message;
  j["steps"] = res.metrics.steps;
  j["newton_iters"] = res.metrics.newton_iters;
  j["linear_iters"] = res.metrics.linear_iters;
  j["substeps"] = res.metrics.substeps;
  j["clamp_count"] = res.metrics.clamp_count;
  j["work_units"] = res.metrics.work_units();
  j["wall_seconds"] = res.metrics.wall_seconds;
  j["cmin"] = res.metrics.cmin;
  j["cmax"] = res.metrics.cmax;
  j["max_mass_balance_error"] = res.metrics.max_mass_balance_error;
  io::write_text(dir / "metrics.json", j.dump(1) + "\n");
  return res;
}

std::vector<LevelStats> pilot_study(const StudyConfig& cfg) {
  validate_config(cfg);
  const fs::path dir = cfg.out_dir / "pilot";
  const fs::path samples = dir / "samples";
  fs::create_directories(samples);
  echo_config(cfg, dir);

  const int top = static_cast<int>(cfg.pilot_m.size()) - 1;
  GridHierarchy gh(std::max(top, 1));
  const std::string run_id = cfg.run_id + "-pilot";
  const auto jobs =
      plan_jobs(cfg.pilot_m, run_id, cfg.seed, cfg.sampling, samples, gh);
  ExecutorConfig ecfg;
  ecfg.sample_dir = samples;
  ecfg.workers = cfg.workers;
  ecfg.solver = cfg.solver;
  run_batch(gh, cfg.params, ecfg, jobs);

  const auto records = load_records(samples, run_id, cfg.pilot_m, cfg.sampling);
  long failed = 0;
  auto stats = accumulate_records(gh, records, cfg.qoi, top, &failed);
  io::write_level_stats(dir / "level_stats.csv", stats);

  const RateFit rates = fit_rates(stats, cfg.calibration_time);
  const double E0 = time_averaged_mean(stats[0]);
  ordered_json j;
  j["schema"] = "henry-rates-v1";
  j["qoi"] = cfg.qoi;
  j["calibration_time"] = cfg.calibration_time;
  j["E0"] = E0;
  j["alpha"] = rates.alpha;
  j["zeta1"] = rates.zeta1;
  j["beta"] = rates.beta;
  j["zeta2"] = rates.zeta2;
  j["gamma"] = rates.gamma;
  j["weak_residual"] = rates.weak_residual;
  j["strong_residual"] = rates.strong_residual;
  j["cost_residual"] = rates.cost_residual;
  j["notes"] = rates.notes;
  j["failed_samples"] = failed;
  io::write_text(dir / "rates.json", j.dump(1) + "\n");
  write_decay_plot(dir / "decay.svg", stats, rates, cfg.calibration_time);
  return stats;
}

StudyPlan make_plan(const StudyConfig& cfg, double eps,
                    const std::vector<LevelStats>& pilot_stats) {
  if (!(eps > 0.0)) throw std::invalid_argument("make_plan: eps must be > 0");
  if (pilot_stats.empty())
    throw std::invalid_argument("make_plan: pilot statistics are empty");
  const RateFit rates = fit_rates(pilot_stats, cfg.calibration_time);
  const double E0 = time_averaged_mean(pilot_stats[0]);

  StudyPlan plan;
  plan.run_id = cfg.run_id + "-eps" + eps_tag(eps);
  plan.qoi = cfg.qoi;
  plan.sampling = cfg.sampling;
  plan.seed = cfg.seed;
  plan.eps = eps;
  plan.E0 = E0;
  plan.calibration_time = cfg.calibration_time;
  plan.rates = rates;
  const int unclamped =
      choose_num_levels(eps, rates, E0, kMaxLevel, cfg.geometric_tail);
  plan.L = std::min(unclamped, cfg.l_max);
  plan.bias_limited = unclamped > cfg.l_max;

  std::vector<double> v_meas, s_meas;
  for (const auto& s : pilot_stats) {
    double vv = 0.0, cc = 0.0;
    values_at_calibration(s, cfg.calibration_time, nullptr, &vv, &cc);
    v_meas.push_back(vv);
    s_meas.push_back(cc);
  }
  std::vector<double> v = extend_variances(v_meas, rates, plan.L);
  std::vector<double> s = extend_costs(s_meas, rates, plan.L);
  v.resize(plan.L + 1);
  s.resize(plan.L + 1);
  const Allocation alloc = allocate_samples(eps, v, s, E0);
  plan.m = alloc.m;
  plan.predicted_cost = alloc.predicted_cost;
  plan.predicted_mc_cost =
      2.0 / (eps * eps) * s[plan.L] * v[0] / (E0 * E0);
  plan.planning_variance = std::move(v);
  plan.planning_cost = std::move(s);
  return plan;
}

StudyPlan plan_from_pilot_dir(const StudyConfig& cfg, double eps) {
  const fs::path stats_file = cfg.out_dir / "pilot" / "level_stats.csv";
  if (!fs::exists(stats_file))
    throw std::runtime_error(
        "no pilot statistics at " + stats_file.string() +
        "; run the pilot subcommand first");
  return make_plan(cfg, eps, io::read_level_stats(stats_file));
}

MlmcResult execute_plan(const StudyConfig& cfg, const StudyPlan& plan) {
  validate_config(cfg);
  if (plan.m.empty() || plan.L + 1 != static_cast<int>(plan.m.size()))
    throw std::invalid_argument("execute_plan: malformed plan");
  if (plan.L > cfg.l_max)
    throw std::invalid_argument("execute_plan: plan exceeds l_max");
  const fs::path dir = cfg.out_dir / ("run-" + eps_tag(plan.eps));
  const fs::path samples = dir / "samples";
  fs::create_directories(samples);
  echo_config(cfg, dir);
  write_plan(dir / "plan.json", plan);

  GridHierarchy gh(std::max(plan.L, 1));
  const auto jobs =
      plan_jobs(plan.m, plan.run_id, plan.seed, plan.sampling, samples, gh);
  ExecutorConfig ecfg;
  ecfg.sample_dir = samples;
  ecfg.workers = cfg.workers;
  ecfg.solver = cfg.solver;
  run_batch(gh, cfg.params, ecfg, jobs);

  const auto records = load_records(samples, plan.run_id, plan.m, plan.sampling);
  long failed = 0;
  auto stats = accumulate_records(gh, records, plan.qoi, plan.L, &failed);
  io::write_level_stats(dir / "level_stats.csv", stats);
  MlmcResult result = estimate(stats);

  double realized_wall = 0.0;
  for (const auto& s : stats)
    realized_wall += static_cast<double>(s.m) * s.wall_mean;
  const size_t kc = nearest_index(result.t, plan.calibration_time);
  ordered_json j;
  j["schema"] = "henry-result-v1";
  j["run_id"] = plan.run_id;
  j["qoi"] = plan.qoi;
  j["eps"] = plan.eps;
  j["E0"] = plan.E0;
  j["L"] = plan.L;
  j["m_planned"] = plan.m;
  ordered_json mreal = ordered_json::array();
  for (const auto& s : stats) mreal.push_back(s.m);
  j["m_realized"] = std::move(mreal);
  j["failed_samples"] = failed;
  j["realized_cost_work_units"] = result.realized_cost;
  j["realized_wall_seconds"] = realized_wall;
  j["estimate_at_calibration"] = result.estimate[kc];
  if (!result.variance.empty()) {
    j["stderr_at_calibration"] = std::sqrt(result.variance[kc]);
    j["variance_budget"] =
        0.5 * plan.eps * plan.eps * plan.E0 * plan.E0;
  }
  j["t"] = result.t;
  j["estimate"] = result.estimate;
  j["variance"] = result.variance;
  io::write_text(dir / "result.json", j.dump(1) + "\n");
  return result;
}

CostReport compare_study(const StudyConfig& cfg,
                         const std::vector<LevelStats>& pilot_stats) {
  validate_config(cfg);
  const fs::path dir = cfg.out_dir / "compare";
  fs::create_directories(dir);
  echo_config(cfg, dir);

  const RateFit rates = fit_rates(pilot_stats, cfg.calibration_time);
  const double E0 = time_averaged_mean(pilot_stats[0]);
  std::vector<double> v_meas, s_meas;
  for (const auto& s : pilot_stats) {
    double vv = 0.0, cc = 0.0;
    values_at_calibration(s, cfg.calibration_time, nullptr, &vv, &cc);
    v_meas.push_back(vv);
    s_meas.push_back(cc);
  }
  CostReport rep =
      compare_costs(cfg.eps_list, rates, v_meas, s_meas, E0, cfg.l_max);

  std::string csv;
  csv += "# schema=henry-cost-table-v1\n";
  csv += "# regime=" + rep.regime + "\n";
  csv += "# mlmc_exponent=" + io::fmt(rep.mlmc_exponent) + "\n";
  csv += "# mc_exponent=" + io::fmt(rep.mc_exponent) + "\n";
  csv += "# theorem_applicable=" +
         std::string(rep.theorem_applicable ? "true" : "false") + "\n";
  csv += "eps,L,cost_mlmc,cost_mc,ratio,m\n";
  for (const auto& row : rep.rows) {
    csv += io::fmt(row.eps);
    csv += ',';
    csv += std::to_string(row.L);
    csv += ',';
    csv += io::fmt(row.cost_mlmc);
    csv += ',';
    csv += io::fmt(row.cost_mc);
    csv += ',';
    csv += io::fmt(row.ratio);
    csv += ',';
    for (size_t i = 0; i < row.m.size(); ++i) {
      if (i) csv += '|';
      csv += std::to_string(row.m[i]);
    }
    csv += '\n';
  }
  io::write_text(dir / "cost_table.csv", csv);
  write_cost_plot(dir / "cost.svg", rep);
  return rep;
}

QmcSummary qmc_study(const StudyConfig& cfg) {
  validate_config(cfg);
  if (cfg.qmc_n < 2)
    throw std::invalid_argument("qmc: need at least two samples for variance");
  const fs::path dir = cfg.out_dir / "qmc";
  const fs::path samples = dir / "samples";
  fs::create_directories(samples);
  echo_config(cfg, dir);

  const int level = cfg.qmc_level;
  GridHierarchy gh(std::max(level, 1));
  const StructuredGrid& g = gh.grid(level);
  const TimeGrid& tg = gh.time_grid(level);
  size_t steps = static_cast<size_t>(tg.steps);
  if (cfg.solver.max_steps > 0 && static_cast<size_t>(cfg.solver.max_steps) < steps)
    steps = static_cast<size_t>(cfg.solver.max_steps);
  const std::string run_id = cfg.run_id + "-qmc";

  VectorWelford field(static_cast<size_t>(g.num_vertices()));
  VectorWelford points(static_cast<size_t>(kNumSubdomains) * steps);
  std::vector<std::vector<double>> qs_all, qfw_all;
  std::vector<double> point_buf(static_cast<size_t>(kNumSubdomains) * steps);
  long failed = 0;

  for (long i = 1; i <= cfg.qmc_n; ++i) {
    const RandomInput xi = halton_point(i);
    SampleRecord rec;
    rec.run_id = run_id;
    rec.level = level;
    rec.index = i;
    rec.seed = cfg.seed;
    rec.sampling = "halton";
    rec.kind = JobKind::single;
    rec.xi = xi;

    FlowSolver solver(gh, level, cfg.params, xi, cfg.solver);
    QoiRecorder recorder(solver.grid(), cfg.params);
    RunResult res = solver.run({&recorder});
    rec.fine.level = level;
    rec.fine.status = to_string(res.status);
    rec.fine.message = res.message;
    rec.fine.metrics = res.metrics;
    rec.fine.metrics.step_log.clear();
    if (res.status == RunStatus::ok) {
      rec.status = "ok";
      const auto& series = recorder.series();
      qs_all.push_back(series[0].v);
      qfw_all.push_back(series[1].v);
      for (int p = 0; p < kNumSubdomains; ++p)
        for (size_t k = 0; k < steps; ++k)
          point_buf[static_cast<size_t>(p) * steps + k] =
              series[static_cast<size_t>(p) + 2].v[k];
      points.add(point_buf);
      field.add(res.state.c);
    } else {
      rec.status = "failed";
      rec.error = res.message;
      ++failed;
    }
    rec.fine.series = recorder.take();
    save_record(samples, rec);
  }
  if (field.count() < 2)
    throw std::runtime_error("qmc: fewer than two successful samples");

  const auto c_mean = field.mean();
  const auto c_var = field.variance();
  io::write_vtk_fields(dir / "c_stats.vtk", g,
                       "mean and variance of c(T) over " +
                           std::to_string(field.count()) + " samples",
                       {{"c_mean", c_mean}, {"c_variance", c_var}});

  std::string pcsv;
  pcsv += "# schema=henry-point-series-v1\n";
  pcsv += "qoi,t,mean,variance\n";
  const auto p_mean = points.mean();
  const auto p_var = points.variance();
  for (int p = 0; p < kNumSubdomains; ++p)
    for (size_t k = 0; k < steps; ++k) {
      pcsv += "Q" + std::to_string(p + 1);
      pcsv += ',';
      pcsv += io::fmt(static_cast<double>(k + 1) * tg.tau);
      pcsv += ',';
      pcsv += io::fmt(p_mean[static_cast<size_t>(p) * steps + k]);
      pcsv += ',';
      pcsv += io::fmt(p_var[static_cast<size_t>(p) * steps + k]);
      pcsv += '\n';
    }
  io::write_text(dir / "point_series.csv", pcsv);

  const std::vector<double> qs_levels = {0.025, 0.25, 0.5, 0.75, 0.975};
  auto write_fan = [&](const std::string& name,
                       const std::vector<std::vector<double>>& all) {
    std::string csv;
    csv += "# schema=henry-quantiles-v1\n";
    csv += "t,q025,q25,q50,q75,q975\n";
    std::vector<io::PlotSeries> fan(qs_levels.size());
    std::vector<double> col(all.size());
    for (size_t q = 0; q < qs_levels.size(); ++q) {
      fan[q].label = "q" + io::fmt(qs_levels[q]);
      fan[q].color = (q == 2) ? "#d62728" : "#1f77b4";
      fan[q].dashed = (q != 2);
      fan[q].markers = false;
    }
    for (size_t k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k + 1) * tg.tau;
      csv += io::fmt(t);
      for (size_t q = 0; q < qs_levels.size(); ++q) {
        for (size_t i = 0; i < all.size(); ++i) col[i] = all[i][k];
        const double qv = quantile(col, qs_levels[q]);
        csv += ',';
        csv += io::fmt(qv);
        fan[q].x.push_back(t);
        fan[q].y.push_back(qv);
      }
      csv += '\n';
    }
    io::write_text(dir / ("quantiles_" + name + ".csv"), csv);
    io::write_svg_plot(dir / ("quantiles_" + name + ".svg"),
                       name + " quantile fan", "t [s]", name, fan);
  };
  write_fan("QS", qs_all);
  write_fan("QFW", qfw_all);

  QmcSummary summary;
  summary.n = field.count();
  summary.level = level;
  size_t peak = 0;
  for (size_t v = 1; v < c_var.size(); ++v)
    if (c_var[v] > c_var[peak]) peak = v;
  const int pi = static_cast<int>(peak) % g.nvx();
  const int pj = static_cast<int>(peak) / g.nvx();
  summary.variance_peak_x = g.x(pi);
  summary.variance_peak_y = g.y(pj);
  summary.variance_peak = c_var[peak];

  ordered_json j;
  j["schema"] = "henry-qmc-summary-v1";
  j["n"] = summary.n;
  j["failed"] = failed;
  j["level"] = level;
  j["variance_peak"] = summary.variance_peak;
  j["variance_peak_x"] = summary.variance_peak_x;
  j["variance_peak_y"] = summary.variance_peak_y;
  io::write_text(dir / "summary.json", j.dump(1) + "\n");
  return summary;
}

std::string write_report(const StudyConfig& cfg) {
  validate_config(cfg);
  const fs::path dir = cfg.out_dir / "report";
  fs::create_directories(dir);
  std::string text;
  text += "artifact report\n";
  text += "===============\n";

  const fs::path pilot_csv = cfg.out_dir / "pilot" / "level_stats.csv";
  if (fs::exists(pilot_csv)) {
    const auto stats = io::read_level_stats(pilot_csv);
    const RateFit rates = fit_rates(stats, cfg.calibration_time);
    const double E0 = time_averaged_mean(stats[0]);
    text += "pilot: " + std::to_string(stats.size()) + " levels, E0=" +
            io::fmt(E0) + ", alpha=" + io::fmt(rates.alpha) + ", beta=" +
            io::fmt(rates.beta) + ", gamma=" + io::fmt(rates.gamma) + "\n";
    write_decay_plot(dir / "decay.svg", stats, rates, cfg.calibration_time);
    const CostReport rep = compare_costs(cfg.eps_list, rates,
                                         [&] {
                                           std::vector<double> v;
                                           for (const auto& s : stats) {
                                             double vv = 0.0;
                                             values_at_calibration(
                                                 s, cfg.calibration_time,
                                                 nullptr, &vv, nullptr);
                                             v.push_back(vv);
                                           }
                                           return v;
                                         }(),
                                         [&] {
                                           std::vector<double> c;
                                           for (const auto& s : stats)
                                             c.push_back(s.cost_mean);
                                           return c;
                                         }(),
                                         E0, cfg.l_max);
    write_cost_plot(dir / "cost.svg", rep);
    text += "cost regime: " + rep.regime +
            ", predicted MLMC exponent " + io::fmt(rep.mlmc_exponent) +
            ", MC exponent " + io::fmt(rep.mc_exponent) + "\n";
  } else {
    text += "pilot: no statistics found\n";
  }

  for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
    if (!entry.is_directory()) continue;
    const fs::path result = entry.path() / "result.json";
    if (!fs::exists(result)) continue;
    const ordered_json j = ordered_json::parse(io::read_text(result));
    text += "run " + j.at("run_id").get<std::string>() + ": eps=" +
            io::fmt(j.at("eps").get<double>()) + ", estimate(tc)=" +
            io::fmt(j.at("estimate_at_calibration").get<double>()) +
            ", work=" +
            io::fmt(j.at("realized_cost_work_units").get<double>()) + "\n";
  }
  io::write_text(dir / "report.txt", text);
  return text;
}

}  // namespace henry
