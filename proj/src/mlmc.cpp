#include "henry/mlmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace henry {

namespace {

const double kInvLog4 = 1.0 / std::log(4.0);

double log4(double x) { return std::log(x) * kInvLog4; }

struct LineFit {
  double intercept = 0.0, slope = 0.0, residual = 0.0;
};

// Ordinary least squares y ~ intercept + slope * x.
LineFit ols(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size();
  if (n < 2) throw std::invalid_argument("ols: need at least two points");
  double sx = 0.0, sy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double r2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    r2 += e * e;
  }
  f.residual = std::sqrt(r2);
  return f;
}

}  // namespace

void Welford::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double Welford::variance() const {
  if (n_ < 2) throw std::logic_error("Welford: variance needs two samples");
  return m2_ / static_cast<double>(n_ - 1);
}

void VectorWelford::add(std::span<const double> x) {
  if (x.size() != mean_.size())
    throw std::invalid_argument("VectorWelford: sample size mismatch");
  ++n_;
  // Same update as the scalar Welford, slot by slot, so the two agree
  // bitwise on identical streams.
  const double n = static_cast<double>(n_);
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean_[i];
    mean_[i] += d / n;
    m2_[i] += d * (x[i] - mean_[i]);
  }
}

std::vector<double> VectorWelford::variance() const {
  if (n_ < 2)
    throw std::logic_error("VectorWelford: variance needs two samples");
  std::vector<double> v(m2_.size());
  const double inv = 1.0 / static_cast<double>(n_ - 1);
  for (size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] * inv;
  return v;
}

LevelAccumulator::LevelAccumulator(int level, std::vector<double> times)
    : level_(level), t_(std::move(times)), acc_(t_.size()), diff_(t_.size()) {
  if (level < 0) throw std::invalid_argument("LevelAccumulator: bad level");
  if (t_.empty()) throw std::invalid_argument("LevelAccumulator: empty grid");
}

void LevelAccumulator::add_pair(std::span<const double> fine,
                                std::span<const double> coarse, double cost,
                                double wall) {
  const size_t n = t_.size();
  if (level_ == 0) {
    if (!coarse.empty())
      throw std::invalid_argument("add_pair: level 0 has no coarse partner");
    if (fine.size() != n)
      throw std::invalid_argument("add_pair: series length mismatch");
    for (size_t k = 0; k < n; ++k) diff_[k] = fine[k];
  } else {
    if (coarse.size() != n || fine.size() != 4 * n)
      throw std::invalid_argument("add_pair: series length mismatch");
    for (size_t k = 0; k < n; ++k) diff_[k] = fine[4 * k + 3] - coarse[k];
  }
  acc_.add(diff_);
  cost_.add(cost);
  wall_.add(wall);
}

LevelStats LevelAccumulator::stats() const {
  LevelStats s;
  s.level = level_;
  s.m = acc_.count();
  s.t = t_;
  s.mean_diff = acc_.mean();
  if (acc_.variance_available()) s.variance = acc_.variance();
  if (cost_.count() > 0) {
    s.cost_mean = cost_.mean();
    s.wall_mean = wall_.mean();
  }
  return s;
}

RateFit fit_rates(std::span<const double> abs_mean, std::span<const double> var,
                  std::span<const double> cost) {
  const size_t n = abs_mean.size();
  if (var.size() != n || cost.size() != n)
    throw std::invalid_argument("fit_rates: array length mismatch");
  if (n < 3)
    throw std::invalid_argument(
        "fit_rates: need levels 0..2 or deeper for the difference fits");

  RateFit f;
  std::vector<double> xs, ys;
  for (size_t l = 1; l < n; ++l) {
    if (abs_mean[l] > 0.0) {
      xs.push_back(static_cast<double>(l));
      ys.push_back(log4(abs_mean[l]));
      f.weak_levels.push_back(static_cast<int>(l));
    } else {
      f.notes.push_back("weak fit skipped level " + std::to_string(l) +
                        ": nonpositive mean difference");
    }
  }
  if (xs.size() < 2)
    throw std::invalid_argument("fit_rates: too few usable mean differences");
  LineFit weak = ols(xs, ys);
  f.zeta1 = weak.intercept;
  f.alpha = -weak.slope;
  f.weak_residual = weak.residual;

  xs.clear();
  ys.clear();
  for (size_t l = 1; l < n; ++l) {
    if (var[l] > 0.0) {
      xs.push_back(static_cast<double>(l));
      ys.push_back(log4(var[l]));
      f.strong_levels.push_back(static_cast<int>(l));
    } else {
      f.notes.push_back("strong fit skipped level " + std::to_string(l) +
                        ": nonpositive variance");
    }
  }
  if (xs.size() < 2)
    throw std::invalid_argument("fit_rates: too few usable variances");
  LineFit strong = ols(xs, ys);
  f.zeta2 = strong.intercept;
  f.beta = -strong.slope;
  f.strong_residual = strong.residual;

  xs.clear();
  ys.clear();
  for (size_t l = 0; l < n; ++l) {
    if (cost[l] > 0.0) {
      xs.push_back(static_cast<double>(l));
      ys.push_back(log4(cost[l]));
    } else {
      f.notes.push_back("cost fit skipped level " + std::to_string(l) +
                        ": nonpositive cost");
    }
  }
  if (xs.size() < 2)
    throw std::invalid_argument("fit_rates: too few usable costs");
  LineFit costfit = ols(xs, ys);
  f.gamma = costfit.slope / kCostDimension;
  f.cost_residual = costfit.residual;
  return f;
}

RateFit fit_rates(const std::vector<LevelStats>& stats,
                  double calibration_time) {
  std::vector<double> am(stats.size()), vr(stats.size()), cs(stats.size());
  for (size_t l = 0; l < stats.size(); ++l) {
    const LevelStats& s = stats[l];
    if (s.t.empty()) throw std::invalid_argument("fit_rates: empty level");
    size_t k = 0;
    for (size_t i = 1; i < s.t.size(); ++i)
      if (std::abs(s.t[i] - calibration_time) <
          std::abs(s.t[k] - calibration_time))
        k = i;
    am[l] = std::abs(s.mean_diff[k]);
    vr[l] = s.variance_available() ? s.variance[k] : 0.0;
    cs[l] = s.cost_mean;
  }
  return fit_rates(am, vr, cs);
}

double time_averaged_mean(const LevelStats& level0) {
  if (level0.level != 0 || level0.mean_diff.empty())
    throw std::invalid_argument("time_averaged_mean: need level-0 stats");
  double s = 0.0;
  for (double v : level0.mean_diff) s += std::abs(v);
  return s / static_cast<double>(level0.mean_diff.size());
}

int choose_num_levels(double eps, const RateFit& rates, double E0, int l_max,
                      bool geometric_tail) {
  if (!(eps > 0.0) || !(E0 > 0.0))
    throw std::invalid_argument("choose_num_levels: eps and E0 must be > 0");
  if (!(rates.alpha > 0.0))
    throw std::invalid_argument("choose_num_levels: alpha must be > 0");
  if (l_max < 0)
    throw std::invalid_argument("choose_num_levels: l_max must be >= 0");
  double c1 = std::pow(4.0, rates.zeta1);
  if (geometric_tail) c1 /= std::pow(4.0, rates.alpha) - 1.0;
  const double arg = eps * E0 / (std::sqrt(2.0) * c1);
  const double l_real = -log4(arg) / rates.alpha;
  long l = static_cast<long>(std::ceil(l_real));
  if (l < 0) l = 0;
  if (l > l_max) l = l_max;
  return static_cast<int>(l);
}

Allocation allocate_samples(double eps, std::span<const double> variance,
                            std::span<const double> cost, double E0) {
  const size_t n = variance.size();
  if (n == 0 || cost.size() != n)
    throw std::invalid_argument("allocate_samples: array length mismatch");
  if (!(eps > 0.0) || !(E0 > 0.0))
    throw std::invalid_argument("allocate_samples: eps and E0 must be > 0");
  for (size_t l = 0; l < n; ++l) {
    if (variance[l] < 0.0)
      throw std::invalid_argument("allocate_samples: negative variance");
    if (!(cost[l] > 0.0))
      throw std::invalid_argument("allocate_samples: costs must be positive");
  }

  Allocation a;
  a.ideal.assign(n, 0.0);
  a.m.assign(n, 1);
  double total = 0.0;
  for (size_t l = 0; l < n; ++l) total += std::sqrt(variance[l] * cost[l]);
  if (total == 0.0) {
    a.degenerate = true;
    for (size_t l = 0; l < n; ++l) a.rounded_cost += cost[l];
    return a;
  }
  const double fac = 2.0 / (eps * eps * E0 * E0);
  a.predicted_cost = fac * total * total;
  for (size_t l = 0; l < n; ++l) {
    a.ideal[l] = fac * std::sqrt(variance[l] / cost[l]) * total;
    a.m[l] = std::max(1L, static_cast<long>(std::ceil(a.ideal[l])));
    a.rounded_cost += static_cast<double>(a.m[l]) * cost[l];
  }
  return a;
}

namespace {

// Repeatedly keep every 4th entry until the series lands on `target` points.
std::vector<double> align_series(std::vector<double> v, size_t target) {
  while (v.size() > target) {
    if (v.size() % 4 != 0)
      throw std::invalid_argument("estimate: time grids are not nested");
    std::vector<double> w(v.size() / 4);
    for (size_t k = 0; k < w.size(); ++k) w[k] = v[4 * k + 3];
    v = std::move(w);
  }
  if (v.size() != target)
    throw std::invalid_argument("estimate: time grids are not nested");
  return v;
}

}  // namespace

MlmcResult estimate(const std::vector<LevelStats>& stats) {
  if (stats.empty()) throw std::invalid_argument("estimate: no levels");
  for (size_t l = 0; l < stats.size(); ++l) {
    if (stats[l].level != static_cast<int>(l))
      throw std::invalid_argument("estimate: levels must be 0..L in order");
    if (stats[l].m < 1)
      throw std::invalid_argument("estimate: level " + std::to_string(l) +
                                  " has no samples");
    if (stats[l].mean_diff.size() != stats[l].t.size())
      throw std::invalid_argument("estimate: malformed level statistics");
  }

  MlmcResult r;
  r.levels = stats;
  r.t = stats[0].t;
  const size_t n = r.t.size();
  r.estimate.assign(n, 0.0);
  bool have_var = true;
  for (const auto& s : stats) have_var = have_var && s.variance_available();
  if (have_var) r.variance.assign(n, 0.0);
  for (const auto& s : stats) {
    const std::vector<double> md = align_series(s.mean_diff, n);
    for (size_t k = 0; k < n; ++k) r.estimate[k] += md[k];
    if (have_var) {
      const std::vector<double> vv = align_series(s.variance, n);
      const double inv_m = 1.0 / static_cast<double>(s.m);
      for (size_t k = 0; k < n; ++k) r.variance[k] += vv[k] * inv_m;
    }
    r.realized_cost += static_cast<double>(s.m) * s.cost_mean;
  }
  return r;
}

std::vector<double> extend_variances(std::span<const double> variance,
                                     const RateFit& rates, int L) {
  std::vector<double> out(variance.begin(), variance.end());
  for (int l = static_cast<int>(out.size()); l <= L; ++l)
    out.push_back(std::pow(4.0, rates.zeta2 - rates.beta * l));
  return out;
}

std::vector<double> extend_costs(std::span<const double> cost,
                                 const RateFit& rates, int L) {
  if (cost.empty()) throw std::invalid_argument("extend_costs: empty input");
  std::vector<double> out(cost.begin(), cost.end());
  const double step = std::pow(4.0, kCostDimension * rates.gamma);
  for (int l = static_cast<int>(out.size()); l <= L; ++l)
    out.push_back(out.back() * step);
  return out;
}

CostReport compare_costs(std::span<const double> eps_list,
                         const RateFit& rates,
                         std::span<const double> variance,
                         std::span<const double> cost, double E0, int l_max) {
  if (variance.empty() || cost.size() != variance.size())
    throw std::invalid_argument("compare_costs: array length mismatch");
  CostReport rep;
  rep.dgamma = kCostDimension * rates.gamma;
  const double tol = 1e-9;
  if (rates.beta > rep.dgamma + tol) {
    rep.regime = "beta > dim*gamma";
    rep.mlmc_exponent = 2.0;
  } else if (rates.beta < rep.dgamma - tol) {
    rep.regime = "beta < dim*gamma";
    rep.mlmc_exponent = 2.0 + (rep.dgamma - rates.beta) / rates.alpha;
  } else {
    rep.regime = "beta = dim*gamma (log factor)";
    rep.mlmc_exponent = 2.0;
  }
  rep.mc_exponent = 2.0 + rep.dgamma / rates.alpha;
  rep.theorem_applicable =
      rates.alpha >= 0.5 * std::min(rates.beta, rep.dgamma) - tol;

  for (double eps : eps_list) {
    CostRow row;
    row.eps = eps;
    row.L = choose_num_levels(eps, rates, E0, l_max);
    std::vector<double> v = extend_variances(variance, rates, row.L);
    std::vector<double> s = extend_costs(cost, rates, row.L);
    v.resize(row.L + 1);
    s.resize(row.L + 1);
    Allocation a = allocate_samples(eps, v, s, E0);
    row.m = a.m;
    row.cost_mlmc = a.predicted_cost;
    row.cost_mc = 2.0 / (eps * eps) * s[row.L] * variance[0] / (E0 * E0);
    row.ratio = row.cost_mc / row.cost_mlmc;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0) || !(q <= 1.0))
    throw std::invalid_argument("quantile: q must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace henry
