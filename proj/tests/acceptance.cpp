// End-to-end acceptance checks for the variable-density flow and multilevel
// Monte Carlo toolkit. Each numbered check prints one PASS/FAIL line with the
// measured values; the exit code is the number of failures. The heavy checks
// (convergence order, shared-sample telescoping, the pilot batch) run full
// trajectories and dominate the runtime.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "henry/executor.hpp"
#include "henry/grid.hpp"
#include "henry/io.hpp"
#include "henry/mlmc.hpp"
#include "henry/params.hpp"
#include "henry/qoi.hpp"
#include "henry/random_inputs.hpp"
#include "henry/solver.hpp"
#include "henry/study.hpp"
#include "henry/transfer.hpp"

using namespace henry;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::chrono::steady_clock::time_point g_t0;

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t)
      .count();
}

void report(int num, bool ok, const std::string& what) {
  std::printf("%s %2d  %s\n", ok ? "PASS" : "FAIL", num, what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "henry_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string num(double v) { return io::fmt(v); }

size_t qoi_index(const std::string& name) {
  const auto& names = standard_qoi_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw std::logic_error("unknown qoi " + name);
}

// Shared full trajectories at xi = 0 on levels 0..2 plus their Q9 series;
// computed once and reused by the convergence, mass-balance and QoI-bound
// checks.
struct SharedRuns {
  GridHierarchy gh{2};
  HenryParameters prm;
  std::vector<RunResult> runs;               // index = level
  std::vector<std::vector<double>> q9;       // Q9 series per level
};

SharedRuns compute_shared_runs() {
  SharedRuns sh;
  const SolverConfig cfg;
  for (int l = 0; l <= 2; ++l) {
    QoiRecorder rec(sh.gh.grid(l), sh.prm);
    sh.runs.push_back(time_march(sh.gh, l, sh.prm, RandomInput{}, cfg, {&rec}));
    sh.q9.push_back(rec.series()[qoi_index("Q9")].v);
  }
  return sh;
}

// ---------------------------------------------------------------------------
// 1. Kozeny-Carman closure at the reference porosity.
void check_permeability() {
  const HenryParameters prm;
  const double k = permeability(prm, 0.35);
  const double ref = 1.020408e-9;
  const double rel = std::abs(k - ref) / ref;
  report(1, rel <= 1e-4,
         "kozeny-carman permeability(0.35) = " + num(k) +
             " within 1e-4 of " + num(ref) + " (rel " + num(rel) + ")");
}

// 2. Vertex counts of the nested grids.
void check_grid_counts() {
  const GridHierarchy gh(3);
  const std::array<int, 4> expect = {153, 2145, 33153, 525825};
  bool ok = true;
  std::ostringstream got;
  for (int l = 0; l <= 3; ++l) {
    const int nv = gh.grid(l).num_vertices();
    ok = ok && nv == expect[static_cast<size_t>(l)];
    got << (l ? " " : "") << nv;
  }
  report(2, ok, "grid vertex counts {" + got.str() + "} match {153 2145 33153 525825}");
}

// 3. First-order spatial convergence of c(T) at xi = 0: control-volume L2
// errors against the level-2 reference shrink by a factor in [2.5, 6] per
// level.
void check_convergence(const SharedRuns& sh) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (const auto& r : sh.runs) ok = ok && r.status == RunStatus::ok;
  if (!ok) {
    report(3, false, "spatial convergence: a reference run failed");
    return;
  }
  const StructuredGrid& g0 = sh.gh.grid(0);
  const StructuredGrid& g1 = sh.gh.grid(1);
  const StructuredGrid& g2 = sh.gh.grid(2);
  std::vector<double> c0on1(static_cast<size_t>(g1.num_vertices()));
  std::vector<double> c0on2(static_cast<size_t>(g2.num_vertices()));
  std::vector<double> c1on2(c0on2.size());
  prolong(g0, g1, sh.runs[0].state.c, c0on1);
  prolong(g1, g2, c0on1, c0on2);
  prolong(g1, g2, sh.runs[1].state.c, c1on2);
  auto err = [&](const std::vector<double>& c) {
    std::vector<double> d(c.size());
    for (size_t i = 0; i < c.size(); ++i) d[i] = c[i] - sh.runs[2].state.c[i];
    return std::sqrt(cv_inner(g2, d, d));
  };
  const double e0 = err(c0on2);
  const double e1 = err(c1on2);
  const double ratio = e0 / e1;
  report(3, ratio >= 2.5 && ratio <= 6.0,
         "c(T) error vs level-2 reference: e0 = " + num(e0) + ", e1 = " +
             num(e1) + ", ratio " + num(ratio) + " in [2.5, 6] (" +
             num(seconds_since(t0)) + " s for shared runs excluded)");
}

// 4. Grid-independent preconditioning: linear iterations of the very first
// Newton step on levels 1 and 2 differ by at most 2x.
void check_multigrid() {
  const auto t0 = std::chrono::steady_clock::now();
  const GridHierarchy gh(2);
  const HenryParameters prm;
  SolverConfig cfg;
  cfg.max_steps = 1;
  const long i1 =
      time_march(gh, 1, prm, RandomInput{}, cfg).metrics.first_linear_iters;
  const long i2 =
      time_march(gh, 2, prm, RandomInput{}, cfg).metrics.first_linear_iters;
  const double ratio = static_cast<double>(std::max(i1, i2)) /
                       static_cast<double>(std::max(std::min(i1, i2), 1l));
  report(4, i1 >= 1 && i2 >= 1 && ratio <= 2.0,
         "first-step linear iterations level 1 vs 2: " + std::to_string(i1) +
             " vs " + std::to_string(i2) + ", ratio " + num(ratio) +
             " <= 2 (" + num(seconds_since(t0)) + " s)");
}

// 5. Discrete mass balance on a full level-1 trajectory stays within 10x the
// Newton tolerance at every step.
void check_mass_balance(const SharedRuns& sh) {
  const RunResult& r = sh.runs[1];
  const double bound = 10.0 * SolverConfig{}.newton_abs_tol;
  report(5,
         r.status == RunStatus::ok && r.metrics.max_mass_balance_error <= bound,
         "level-1 per-step mass balance max " +
             num(r.metrics.max_mass_balance_error) + " <= " + num(bound));
}

// 6. Analytic Jacobian-vector products against central finite differences on
// random states.
State random_state(const StructuredGrid& g, const HenryParameters& prm,
                   unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uc(0.0, 1.0);
  std::uniform_real_distribution<double> up(-100.0, 100.0);
  State x;
  x.level = g.level;
  x.c.resize(static_cast<size_t>(g.num_vertices()));
  x.p.resize(x.c.size());
  for (int j = 0; j < g.nvy(); ++j)
    for (int i = 0; i < g.nvx(); ++i) {
      const size_t v = static_cast<size_t>(g.vid(i, j));
      x.c[v] = uc(rng);
      x.p[v] = prm.fresh_pressure(g.y(j)) + up(rng);
    }
  return x;
}

double jacobian_fd_error(FlowSolver& solver, const State& x, double dt,
                         unsigned seed) {
  const size_t n = 2 * x.c.size();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(n);
  for (size_t v = 0; v < x.c.size(); ++v) {
    w[2 * v] = u(rng);
    w[2 * v + 1] = 1.0e4 * u(rng);  // pressure-scale direction entries
  }
  const auto& jac = solver.jacobian(x, dt);
  std::vector<double> jw(n);
  jac.matvec(w, jw);
  const double h = 1e-6;
  State xp = x, xm = x;
  for (size_t v = 0; v < x.c.size(); ++v) {
    xp.c[v] += h * w[2 * v];
    xp.p[v] += h * w[2 * v + 1];
    xm.c[v] -= h * w[2 * v];
    xm.p[v] -= h * w[2 * v + 1];
  }
  std::vector<double> rp(n), rm(n);
  solver.residual(xp, x, dt, dt, rp);
  solver.residual(xm, x, dt, dt, rm);
  double numer = 0.0, denom = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double fd = (rp[i] - rm[i]) / (2.0 * h);
    numer += (fd - jw[i]) * (fd - jw[i]);
    denom += jw[i] * jw[i];
  }
  return std::sqrt(numer / denom);
}

void check_jacobian() {
  const auto t0 = std::chrono::steady_clock::now();
  const GridHierarchy gh(0);
  const HenryParameters prm;
  FlowSolver solver(gh, 0, prm, draw_uniform(11, 0, 4));
  const double dt = gh.time_grid(0).tau;
  double worst = 0.0;
  for (unsigned k = 0; k < 20; ++k) {
    const State x = random_state(gh.grid(0), prm, 5000 + k);
    worst = std::max(worst, jacobian_fd_error(solver, x, dt, 6000 + k));
  }
  report(6, worst < 1e-6,
         "jacobian vs central differences on 20 random level-0 states: worst "
         "rel error " + num(worst) + " < 1e-6 (" +
             num(seconds_since(t0)) + " s)");
}

// 7. Shared-sample telescoping: with the same 8 inputs on levels 0..2, the
// summed level-difference means reproduce the fine-level sample mean.
void check_telescoping() {
  const auto t0 = std::chrono::steady_clock::now();
  const GridHierarchy gh(2);
  const HenryParameters prm;
  ExecutorConfig ecfg;
  ecfg.sample_dir = fresh_dir("telescoping");
  ecfg.workers = 1;
  std::array<RandomInput, 8> xis;
  for (long i = 0; i < 8; ++i) xis[static_cast<size_t>(i)] = halton_point(i + 1);
  std::vector<Job> jobs;
  for (int l = 2; l >= 0; --l)
    for (long i = 0; i < 8; ++i) {
      Job j;
      j.run_id = "tele";
      j.level = l;
      j.index = i;
      j.seed = 1;
      j.kind = l == 0 ? JobKind::single : JobKind::pair;
      j.xi_override = xis[static_cast<size_t>(i)];
      jobs.push_back(std::move(j));
    }
  const BatchResult batch = run_batch(gh, prm, ecfg, jobs);
  if (batch.failed != 0) {
    report(7, false, "telescoping: " + std::to_string(batch.failed) +
                         " of 24 shared-sample solves failed");
    return;
  }
  long failed = 0;
  const auto stats = accumulate_records(gh, batch.records, "Q9", 2, &failed);
  double tele = 0.0;
  for (const auto& s : stats) tele += s.mean_diff.back();
  double fine_sum = 0.0;
  long fine_n = 0;
  for (const auto& rec : batch.records)
    if (rec.level == 2) {
      fine_sum += rec.fine.series[qoi_index("Q9")].v.back();
      ++fine_n;
    }
  const double fine_mean = fine_sum / static_cast<double>(fine_n);
  const double rel = std::abs(tele - fine_mean) / std::abs(fine_mean);
  report(7, failed == 0 && fine_n == 8 && rel <= 1e-12,
         "telescoped Q9(T) mean " + num(tele) + " vs fine-level mean " +
             num(fine_mean) + ", rel diff " + num(rel) + " <= 1e-12 (" +
             num(seconds_since(t0)) + " s)");
}

// 8. Sample-allocation optimality on instances built backwards from small
// integer targets (the continuous optimum is a cost lower bound, so the
// rounded formula must land within 10% of the exhaustive integer optimum).
struct Exhaustive {
  const std::vector<double>* v = nullptr;
  const std::vector<double>* s = nullptr;
  double budget = 0.0;
  double best = 0.0;
  std::vector<long> best_m, cur;

  void search(size_t l, double used, double cost) {
    const size_t L = v->size() - 1;
    if (l == L) {
      const double room = budget - used;
      if (room <= 0.0) return;
      long m = static_cast<long>(std::ceil((*v)[l] / room - 1e-12));
      if (m < 1) m = 1;
      while ((*v)[l] / static_cast<double>(m) > room) ++m;
      const double total = cost + static_cast<double>(m) * (*s)[l];
      if (total < best) {
        best = total;
        cur[l] = m;
        best_m = cur;
      }
      return;
    }
    for (long m = 1;; ++m) {
      const double c = cost + static_cast<double>(m) * (*s)[l];
      if (c >= best) break;
      const double u = used + (*v)[l] / static_cast<double>(m);
      if (u < budget) {
        cur[l] = m;
        search(l + 1, u, c);
      }
    }
  }
};

void check_allocation() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(424242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_ratio = 0.0;
  bool ok = true;
  for (int inst = 0; inst < 50; ++inst) {
    const int L = 1 + static_cast<int>(u(rng) * 2.001);
    const size_t n = static_cast<size_t>(L) + 1;
    std::vector<long> target(n);
    std::vector<double> s(n), v(n);
    for (size_t l = 0; l < n; ++l) {
      target[l] = 1 + static_cast<long>(u(rng) * 40.0);
      s[l] = std::pow(4.0, 2.0 * static_cast<double>(l)) * (0.5 + u(rng));
    }
    const double eps = 0.02 + 0.28 * u(rng);
    const double e0 = 0.5 + 4.5 * u(rng);
    double us = 0.0;
    for (size_t l = 0; l < n; ++l)
      us += static_cast<double>(target[l]) * s[l];
    const double scale = (eps * e0) * (eps * e0) / (2.0 * us) * (1.0 - 1e-9);
    for (size_t l = 0; l < n; ++l)
      v[l] = static_cast<double>(target[l] * target[l]) * s[l] * scale;

    const Allocation a = allocate_samples(eps, v, s, e0);
    const double budget = 0.5 * eps * eps * e0 * e0;
    double used = 0.0, cost = 0.0;
    for (size_t l = 0; l < n; ++l) {
      used += v[l] / static_cast<double>(a.m[l]);
      cost += static_cast<double>(a.m[l]) * s[l];
    }
    Exhaustive e;
    e.v = &v;
    e.s = &s;
    e.budget = budget;
    e.best = cost * (1.0 + 1e-9);
    e.cur.assign(n, 1);
    e.search(0, 0.0, 0.0);
    const std::vector<long> best = e.best_m.empty() ? a.m : e.best_m;
    double best_cost = 0.0;
    for (size_t l = 0; l < n; ++l)
      best_cost += static_cast<double>(best[l]) * s[l];
    const double ratio = cost / best_cost;
    worst_ratio = std::max(worst_ratio, ratio);
    ok = ok && used <= budget * (1.0 + 1e-12) && ratio <= 1.10;
  }
  report(8, ok,
         "allocation on 50 integer-optimum instances: worst cost ratio " +
             num(worst_ratio) + " <= 1.10, variance budget met (" +
             num(seconds_since(t0)) + " s)");
}

// 9. Rate fits recover exact power laws.
void check_rate_fit() {
  struct Case {
    double alpha, zeta1, beta, zeta2;
  };
  bool ok = true;
  double worst = 0.0;
  for (const Case cs : {Case{0.9, 3.25, 1.7, 4.8}, Case{1.82, 1.95, 2.5, -0.67}}) {
    std::vector<double> mean, var, cost;
    for (int l = 0; l <= 3; ++l) {
      mean.push_back(std::pow(4.0, cs.zeta1 - cs.alpha * l));
      var.push_back(std::pow(4.0, cs.zeta2 - cs.beta * l));
      cost.push_back(std::pow(4.0, 3.0 * l));
    }
    const RateFit fit = fit_rates(mean, var, cost);
    const std::array<double, 4> got = {fit.alpha, fit.zeta1, fit.beta,
                                       fit.zeta2};
    const std::array<double, 4> want = {cs.alpha, cs.zeta1, cs.beta, cs.zeta2};
    for (size_t i = 0; i < 4; ++i) {
      const double err =
          std::abs(got[i] - want[i]) / std::max(1.0, std::abs(want[i]));
      worst = std::max(worst, err);
      ok = ok && err <= 1e-10;
    }
  }
  report(9, ok,
         "rate fit recovers (0.9, 3.25, 1.7, 4.8) and (1.82, 1.95, 2.5, "
         "-0.67): worst error " + num(worst) + " <= 1e-10");
}

// 10. Level choice and cost exponents for the reference rates and scale.
void check_level_choice() {
  RateFit rates;
  rates.alpha = 0.9;
  rates.zeta1 = 3.25;
  rates.beta = 1.7;
  rates.zeta2 = 4.8;
  rates.gamma = 1.0;
  const double E0 = 150.0;
  const std::array<double, 4> eps = {0.1, 0.05, 0.01, 0.007};
  const std::array<int, 4> want = {2, 3, 4, 4};
  bool ok = true;
  std::ostringstream got;
  for (size_t i = 0; i < eps.size(); ++i) {
    const int L = choose_num_levels(eps[i], rates, E0, 5);
    ok = ok && L == want[i];
    got << (i ? " " : "") << L;
  }
  std::vector<double> v, s;
  for (int l = 0; l <= 4; ++l) {
    v.push_back(std::pow(4.0, 4.8 - 1.7 * l));
    s.push_back(std::pow(4.0, 3.0 * l));
  }
  const CostReport rep = compare_costs(eps, rates, v, s, E0, 5);
  ok = ok && std::abs(rep.mlmc_exponent - 3.44) <= 0.005 &&
       std::abs(rep.mc_exponent - 5.33) <= 0.005;
  report(10, ok,
         "L for eps {0.1 0.05 0.01 0.007} = {" + got.str() +
             "} (want {2 3 4 4}); cost exponents " + num(rep.mlmc_exponent) +
             " / " + num(rep.mc_exponent) + " match 3.44 / 5.33");
}

// 11. Measured decay on the desk pilot: the variance of the level
// differences shrinks with level and the fitted rates bracket the reference
// values.
void check_pilot() {
  const auto t0 = std::chrono::steady_clock::now();
  StudyConfig cfg;
  cfg.out_dir = fresh_dir("pilot");
  const auto stats = pilot_study(cfg);
  const RateFit fit = fit_rates(stats, cfg.calibration_time);
  auto var_at = [&](const LevelStats& s) {
    size_t best = 0;
    for (size_t k = 1; k < s.t.size(); ++k)
      if (std::abs(s.t[k] - cfg.calibration_time) <
          std::abs(s.t[best] - cfg.calibration_time))
        best = k;
    return s.variance[best];
  };
  const double v1 = var_at(stats[1]);
  const double v2 = var_at(stats[2]);
  const bool ok = v1 > v2 && fit.beta >= 1.0 && fit.beta <= 3.0 &&
                  fit.alpha >= 0.5 && fit.alpha <= 2.5;
  report(11, ok,
         "pilot m={32,8,4} for Q9 at t=640: V1 " + num(v1) + " > V2 " +
             num(v2) + ", beta " + num(fit.beta) + " in [1,3], alpha " +
             num(fit.alpha) + " in [0.5,2.5] (" + num(seconds_since(t0)) +
             " s)");
}

// 12. QoI anchor values and the bound on the observed subdomain salt mass,
// scanned over every state of the shared trajectories.
void check_qoi_values(const SharedRuns& sh) {
  const StructuredGrid g = build_grid(1);
  const HenryParameters prm;
  const std::vector<double> zeros(static_cast<size_t>(g.num_vertices()), 0.0);
  const std::vector<double> ones(zeros.size(), 1.0);
  const double qfw = freshwater_area(g, prm, zeros);
  const double qs = salt_mass(g, prm, ones);
  double q9max = 0.0;
  for (const auto& series : sh.q9)
    for (double v : series) q9max = std::max(q9max, std::abs(v));
  const bool ok = std::abs(qfw - 2.0) <= 1e-12 &&
                  std::abs(qs - 2049.98) <= 1e-12 * 2049.98 && q9max <= 43.05;
  report(12, ok,
         "QFW(c=0) = " + num(qfw) + ", QS(c=1) = " + num(qs) +
             ", max |Q9| over " +
             std::to_string(sh.q9[0].size() + sh.q9[1].size() +
                            sh.q9[2].size()) +
             " states " + num(q9max) + " <= 43.05");
}

// 13. Determinism across worker counts and through interruption: the
// accumulated level statistics are byte-identical.
void check_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const GridHierarchy gh(1);
  const HenryParameters prm;
  const std::vector<long> m = {6, 3};

  auto run_full = [&](const fs::path& dir, int workers,
                      long stop_after) -> std::string {
    ExecutorConfig ecfg;
    ecfg.sample_dir = dir;
    ecfg.workers = workers;
    ecfg.stop_after_records = stop_after;
    auto jobs = plan_jobs(m, "det", 7, "pseudo", dir, gh);
    run_batch(gh, prm, ecfg, jobs);
    if (stop_after > 0) {
      // Resume: re-plan (completed work is skipped) and finish the batch.
      ecfg.stop_after_records = 0;
      jobs = plan_jobs(m, "det", 7, "pseudo", dir, gh);
      run_batch(gh, prm, ecfg, jobs);
    }
    const auto records = load_records(dir, "det", m, "pseudo");
    const auto stats = accumulate_records(gh, records, "Q9", 1);
    io::write_level_stats(dir / "level_stats.csv", stats);
    return io::read_text(dir / "level_stats.csv");
  };

  const std::string one = run_full(fresh_dir("det_w1"), 1, 0);
  const std::string eight = run_full(fresh_dir("det_w8"), 8, 0);
  const std::string resumed = run_full(fresh_dir("det_resume"), 2, 4);
  const bool ok = !one.empty() && one == eight && one == resumed;
  report(13, ok,
         std::string("level statistics byte-identical for 1 vs 8 workers (") +
             (one == eight ? "yes" : "no") + ") and after interrupt+resume (" +
             (one == resumed ? "yes" : "no") + ") (" +
             num(seconds_since(t0)) + " s)");
}

}  // namespace

int main() {
  g_t0 = std::chrono::steady_clock::now();
  std::printf("acceptance checks\n");
  std::fflush(stdout);

  check_permeability();
  check_grid_counts();

  const auto t_shared = std::chrono::steady_clock::now();
  const SharedRuns sh = compute_shared_runs();
  std::printf("      (shared xi=0 trajectories on levels 0-2: %s s)\n",
              num(seconds_since(t_shared)).c_str());
  std::fflush(stdout);

  check_convergence(sh);
  check_multigrid();
  check_mass_balance(sh);
  check_jacobian();
  check_telescoping();
  check_allocation();
  check_rate_fit();
  check_level_choice();
  check_pilot();
  check_qoi_values(sh);
  check_determinism();

  std::printf("%d of 13 checks failed (total %s s)\n", g_failures,
              num(seconds_since(g_t0)).c_str());
  return g_failures == 0 ? 0 : 1;
}
