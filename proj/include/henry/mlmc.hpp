#pragma once
// Multilevel Monte Carlo engine: streaming statistics of coupled level
// differences, weak/strong/cost rate fits in log-base-4 space, choice of the
// finest level from a bias proxy, Lagrange-optimal sample counts under the
// half-tolerance variance budget, estimator assembly, and the cost comparison
// against single-level Monte Carlo. Tolerances are relative: a target eps is
// scaled by E0, the time-averaged magnitude of the coarsest-level mean.

#include <span>
#include <string>
#include <vector>

namespace henry {

// Streaming mean/variance (Welford update: single pass, shift stable).
class Welford {
 public:
  void add(double x);
  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;  // unbiased (n-1); requires count() >= 2
  bool variance_available() const { return n_ >= 2; }

 private:
  long n_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

// Welford accumulator over fixed-length vectors (one slot per time point or
// per mesh vertex).
class VectorWelford {
 public:
  explicit VectorWelford(size_t n = 0) : mean_(n, 0.0), m2_(n, 0.0) {}
  void add(std::span<const double> x);
  long count() const { return n_; }
  size_t size() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  std::vector<double> variance() const;  // unbiased; requires count() >= 2
  bool variance_available() const { return n_ >= 2; }

 private:
  long n_ = 0;
  std::vector<double> mean_, m2_;
};

// Per-level statistics of the difference g_l - g_{l-1} (g_{-1} == 0), on the
// time grid shared by the pair, i.e. the grid of level max(l-1, 0).
struct LevelStats {
  int level = 0;
  long m = 0;                    // coupled samples accumulated
  std::vector<double> t;         // retained time points
  std::vector<double> mean_diff; // per time point
  std::vector<double> variance;  // per time point; empty when m < 2
  double cost_mean = 0.0;        // mean work units per coupled sample
  double wall_mean = 0.0;        // mean wall seconds per coupled sample
  bool variance_available() const { return m >= 2; }
};

// Streams coupled pairs into a LevelStats. Fine series live on the level's
// own time grid (values at tau, 2 tau, ..., T); the coarse partner, when the
// level is positive, has a quarter of the entries and is subtracted after
// aligning the fine series onto its grid.
class LevelAccumulator {
 public:
  LevelAccumulator(int level, std::vector<double> times);
  void add_pair(std::span<const double> fine, std::span<const double> coarse,
                double cost, double wall);
  long count() const { return acc_.count(); }
  LevelStats stats() const;

 private:
  int level_;
  std::vector<double> t_;
  VectorWelford acc_;
  Welford cost_, wall_;
  std::vector<double> diff_;
};

// Decay-rate fits: log4 |E[g_l - g_{l-1}]| ~ zeta1 - alpha*l and
// log4 Var[g_l - g_{l-1}] ~ zeta2 - beta*l on difference levels l >= 1;
// log4 s_l ~ const + dim*gamma*l on all levels with dim = 3 (two space
// dimensions plus time refining together).
inline constexpr double kCostDimension = 3.0;

struct RateFit {
  double alpha = 0.0, zeta1 = 0.0;
  double beta = 0.0, zeta2 = 0.0;
  double gamma = 0.0;
  double weak_residual = 0.0, strong_residual = 0.0, cost_residual = 0.0;
  std::vector<int> weak_levels, strong_levels;  // levels that entered each fit
  std::vector<std::string> notes;               // levels dropped from the fits
};

// Raw-array fit: index = level, weak/strong use entries 1.., cost uses all.
RateFit fit_rates(std::span<const double> abs_mean, std::span<const double> var,
                  std::span<const double> cost);
// Fit at the time point nearest to calibration_time in each level's grid.
RateFit fit_rates(const std::vector<LevelStats>& stats, double calibration_time);

// Time-averaged magnitude of the coarsest-level mean, the scale that turns
// the relative tolerance into an absolute one.
double time_averaged_mean(const LevelStats& level0);

// Finest level from the bias proxy c1 * 4^{-alpha*L} <= eps*E0/sqrt(2) with
// c1 = 4^{zeta1}, clamped to [0, l_max]. With geometric_tail, the remaining
// tail sum replaces the single next difference (divides c1 by 4^alpha - 1).
int choose_num_levels(double eps, const RateFit& rates, double E0, int l_max,
                      bool geometric_tail = false);

struct Allocation {
  std::vector<double> ideal;  // pre-rounding optimum
  std::vector<long> m;        // ceil of ideal, floored at 1
  double predicted_cost = 0.0;  // (2/(eps*E0)^2) * (sum_l sqrt(V_l s_l))^2
  double rounded_cost = 0.0;    // sum_l m_l s_l
  bool degenerate = false;      // all-zero variances: one sample per level
};

// Lagrange-optimal counts m_l = (2/(eps*E0)^2) sqrt(V_l/s_l) sum_i
// sqrt(V_i s_i), the cheapest allocation with sum_l V_l/m_l <= (eps*E0)^2/2.
Allocation allocate_samples(double eps, std::span<const double> variance,
                            std::span<const double> cost, double E0);

struct MlmcResult {
  std::vector<double> t;          // coarsest time grid
  std::vector<double> estimate;   // sum of level mean differences
  std::vector<double> variance;   // sum_l V_l(t)/m_l
  double realized_cost = 0.0;     // sum_l m_l * cost_mean_l
  std::vector<LevelStats> levels;
};

// Telescoping sum of stats[0..L]; every level is aligned down to the
// coarsest time grid before summing.
MlmcResult estimate(const std::vector<LevelStats>& stats);

// Model-extended arrays for planning past the pilot depth: variances follow
// the strong fit, costs the dim*gamma cost fit anchored at the last entry.
std::vector<double> extend_variances(std::span<const double> variance,
                                     const RateFit& rates, int L);
std::vector<double> extend_costs(std::span<const double> cost,
                                 const RateFit& rates, int L);

struct CostRow {
  double eps = 0.0;
  int L = 0;
  std::vector<long> m;
  double cost_mlmc = 0.0;
  double cost_mc = 0.0;  // 2 eps^-2 s_L Var[g_0] / E0^2
  double ratio = 0.0;    // cost_mc / cost_mlmc
};

struct CostReport {
  std::vector<CostRow> rows;
  std::string regime;       // "beta > dim*gamma" etc.
  double mlmc_exponent = 0.0;  // predicted eps exponent of the MLMC cost
  double mc_exponent = 0.0;    // 2 + dim*gamma/alpha
  double dgamma = 0.0;         // dim * gamma
  bool theorem_applicable = false;  // alpha >= min(beta, dim*gamma)/2
};

CostReport compare_costs(std::span<const double> eps_list, const RateFit& rates,
                         std::span<const double> variance,
                         std::span<const double> cost, double E0, int l_max);

// Empirical quantile by linear interpolation of order statistics at position
// q*(n-1); values need not be pre-sorted.
double quantile(std::vector<double> values, double q);

}  // namespace henry
