#include "henry/qoi.hpp"

#include <algorithm>
#include <stdexcept>

namespace henry {

const std::array<std::pair<double, double>, kNumSubdomains>&
subdomain_centers() {
  static const std::array<std::pair<double, double>, kNumSubdomains> centers = {{
      {0.90, -0.95}, {1.15, -0.95}, {1.40, -0.95}, {1.65, -0.95}, {1.90, -0.95},
      {0.90, -0.75}, {1.15, -0.75}, {1.40, -0.75}, {1.65, -0.75}, {1.90, -0.75},
      {0.90, -0.50}, {1.15, -0.50}, {1.40, -0.50}, {1.65, -0.50}, {1.90, -0.50},
  }};
  return centers;
}

static void check_field(const StructuredGrid& g, std::span<const double> c,
                        const char* who) {
  if (c.size() != static_cast<size_t>(g.num_vertices()))
    throw std::invalid_argument(std::string(who) + ": field size mismatch");
}

double salt_mass(const StructuredGrid& g, const HenryParameters& prm,
                 std::span<const double> c) {
  check_field(g, c, "salt_mass");
  double s = 0.0;
  for (int j = 0; j < g.nvy(); ++j)
    for (int i = 0; i < g.nvx(); ++i) {
      const double cv = c[g.vid(i, j)];
      s += cv * prm.density(cv) * g.cv_area(i, j);
    }
  return s;
}

double freshwater_area(const StructuredGrid& g, const HenryParameters& prm,
                       std::span<const double> c) {
  check_field(g, c, "freshwater_area");
  double s = 0.0;
  for (int j = 0; j < g.nvy(); ++j)
    for (int i = 0; i < g.nvx(); ++i)
      if (c[g.vid(i, j)] <= prm.fw_threshold) s += g.cv_area(i, j);
  return s;
}

SubdomainWeights subdomain_weights(const StructuredGrid& g, int point) {
  if (point < 1 || point > kNumSubdomains)
    throw std::invalid_argument("subdomain_weights: point must be in [1,15]");
  const auto [cx, cy] = subdomain_centers()[point - 1];
  const double xlo = std::max(cx - kSubdomainHalfWidth, kDomainXMin);
  const double xhi = std::min(cx + kSubdomainHalfWidth, kDomainXMax);
  const double ylo = std::max(cy - kSubdomainHalfWidth, kDomainYMin);
  const double yhi = std::min(cy + kSubdomainHalfWidth, kDomainYMax);

  SubdomainWeights out;
  out.point = point;
  const int ilo = std::max(0, static_cast<int>((xlo - 0.5 * g.hx) / g.hx));
  const int jlo =
      std::max(0, static_cast<int>((ylo - kDomainYMin - 0.5 * g.hy) / g.hy));
  for (int j = jlo; j < g.nvy(); ++j) {
    if (g.cv_ylo(j) >= yhi) break;
    const double oy =
        std::min(g.cv_yhi(j), yhi) - std::max(g.cv_ylo(j), ylo);
    if (oy <= 0.0) continue;
    for (int i = ilo; i < g.nvx(); ++i) {
      if (g.cv_xlo(i) >= xhi) break;
      const double ox =
          std::min(g.cv_xhi(i), xhi) - std::max(g.cv_xlo(i), xlo);
      if (ox <= 0.0) continue;
      out.w.emplace_back(g.vid(i, j), ox * oy);
      out.total_area += ox * oy;
    }
  }
  return out;
}

double subdomain_salt_mass(const SubdomainWeights& w,
                           const HenryParameters& prm,
                           std::span<const double> c) {
  double s = 0.0;
  for (const auto& [v, a] : w.w) {
    const double cv = c[v];
    s += cv * prm.density(cv) * a;
  }
  return s;
}

double subdomain_salt_mass(const StructuredGrid& g, const HenryParameters& prm,
                           std::span<const double> c, int point) {
  check_field(g, c, "subdomain_salt_mass");
  return subdomain_salt_mass(subdomain_weights(g, point), prm, c);
}

QoiSeries align_to_coarse(const QoiSeries& fine) {
  if (fine.level < 1)
    throw std::invalid_argument("align_to_coarse: level must be >= 1");
  if (fine.t.size() != fine.v.size() || fine.t.size() % kRefine != 0)
    throw std::invalid_argument(
        "align_to_coarse: series length must be a multiple of 4");
  QoiSeries c;
  c.qoi = fine.qoi;
  c.level = fine.level - 1;
  c.t.reserve(fine.t.size() / kRefine);
  c.v.reserve(fine.t.size() / kRefine);
  for (size_t k = kRefine - 1; k < fine.t.size(); k += kRefine) {
    c.t.push_back(fine.t[k]);
    c.v.push_back(fine.v[k]);
  }
  return c;
}

const std::vector<std::string>& standard_qoi_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"QS", "QFW"};
    for (int i = 1; i <= kNumSubdomains; ++i) n.push_back("Q" + std::to_string(i));
    return n;
  }();
  return names;
}

bool is_qoi_name(const std::string& name) {
  const auto& n = standard_qoi_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

double eval_qoi(const std::string& name, const StructuredGrid& g,
                const HenryParameters& prm, std::span<const double> c) {
  if (name == "QS") return salt_mass(g, prm, c);
  if (name == "QFW") return freshwater_area(g, prm, c);
  if (name.size() > 1 && name[0] == 'Q') {
    const int p = std::atoi(name.c_str() + 1);
    if (p >= 1 && p <= kNumSubdomains)
      return subdomain_salt_mass(g, prm, c, p);
  }
  throw std::invalid_argument("eval_qoi: unknown qoi name '" + name + "'");
}

}  // namespace henry
