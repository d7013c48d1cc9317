#pragma once
// Scalar quantities of interest over a concentration field: total dissolved
// salt mass, freshwater area, and salt mass inside 15 fixed observation boxes.
// All are control-volume quadratures, so the whole-domain salt integral equals
// the exact integral of the bilinear interpolant of c*rho(c).

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "henry/grid.hpp"
#include "henry/params.hpp"

namespace henry {

inline constexpr int kNumSubdomains = 15;
inline constexpr double kSubdomainHalfWidth = 0.1;

// Centers ordered bottom row to top row, left to right; index is 1-based in
// qoi names (Q1..Q15). The bottom-row boxes reach below y=-1 and are clipped
// to the domain when integrating.
const std::array<std::pair<double, double>, kNumSubdomains>& subdomain_centers();

// Total dissolved salt mass per unit depth: sum_v c_v rho(c_v) |CV_v| [kg/m].
double salt_mass(const StructuredGrid& g, const HenryParameters& prm,
                 std::span<const double> c);

// Area where water still counts as fresh: sum of |CV_v| with
// c_v <= fw_threshold (inclusive) [m^2].
double freshwater_area(const StructuredGrid& g, const HenryParameters& prm,
                       std::span<const double> c);

// Per-vertex overlap areas of CV_v with one observation box;
// only nonzero entries are stored.
struct SubdomainWeights {
  int point = 0;  // 1-based
  std::vector<std::pair<int, double>> w;
  double total_area = 0.0;
};
SubdomainWeights subdomain_weights(const StructuredGrid& g, int point);

// Salt mass inside observation box `point` (1-based).
double subdomain_salt_mass(const StructuredGrid& g, const HenryParameters& prm,
                           std::span<const double> c, int point);
double subdomain_salt_mass(const SubdomainWeights& w,
                           const HenryParameters& prm,
                           std::span<const double> c);

// One QoI sampled along a level's time grid.
struct QoiSeries {
  std::string qoi;
  int level = 0;
  std::vector<double> t;
  std::vector<double> v;
};

// Keep every 4th entry so the result lives on the next-coarser time grid.
// Requires a series recorded at steps tau, 2 tau, ..., with size divisible
// by 4 and level >= 1.
QoiSeries align_to_coarse(const QoiSeries& fine);

// "QS", "QFW", "Q1".."Q15".
const std::vector<std::string>& standard_qoi_names();
bool is_qoi_name(const std::string& name);

// Convenience single evaluation by name (builds box weights on the fly).
double eval_qoi(const std::string& name, const StructuredGrid& g,
                const HenryParameters& prm, std::span<const double> c);

}  // namespace henry
