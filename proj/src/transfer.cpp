#include "henry/transfer.hpp"

#include <cstring>
#include <vector>

namespace henry {

namespace {

void check_pair(const StructuredGrid& coarse, const StructuredGrid& fine,
                size_t nc, size_t nf, const char* who) {
  if (fine.level != coarse.level + 1)
    throw std::invalid_argument(std::string(who) +
                                ": grids must be consecutive levels");
  if (nc != static_cast<size_t>(coarse.num_vertices()) ||
      nf != static_cast<size_t>(fine.num_vertices()))
    throw std::invalid_argument(std::string(who) + ": vector size mismatch");
}

}  // namespace

void prolong_strided(const StructuredGrid& coarse, const StructuredGrid& fine,
                     const double* uc, double* uf, int stride, int offset) {
  const int nvxc = coarse.nvx();
  const int nvxf = fine.nvx();
  for (int J = 0; J < fine.nvy(); ++J) {
    const int cj = J >> 2, b = J & 3;
    const double fy = 0.25 * b, gy = 1.0 - fy;
    for (int I = 0; I < nvxf; ++I) {
      const int ci = I >> 2, a = I & 3;
      const double fx = 0.25 * a, gx = 1.0 - fx;
      const double* base = uc + (cj * nvxc + ci) * stride + offset;
      double v = gx * gy * base[0];
      if (a) v += fx * gy * base[stride];
      if (b) v += gx * fy * base[nvxc * stride];
      if (a && b) v += fx * fy * base[(nvxc + 1) * stride];
      uf[(J * nvxf + I) * stride + offset] = v;
    }
  }
}

void restrict_additive_strided(const StructuredGrid& fine,
                               const StructuredGrid& coarse, const double* uf,
                               double* uc, int stride, int offset) {
  const int nvxc = coarse.nvx();
  const int nvxf = fine.nvx();
  for (int j = 0; j < coarse.nvy(); ++j)
    for (int i = 0; i < nvxc; ++i) uc[(j * nvxc + i) * stride + offset] = 0.0;
  for (int J = 0; J < fine.nvy(); ++J) {
    const int cj = J >> 2, b = J & 3;
    const double fy = 0.25 * b, gy = 1.0 - fy;
    for (int I = 0; I < nvxf; ++I) {
      const int ci = I >> 2, a = I & 3;
      const double fx = 0.25 * a, gx = 1.0 - fx;
      const double v = uf[(J * nvxf + I) * stride + offset];
      double* base = uc + (cj * nvxc + ci) * stride + offset;
      base[0] += gx * gy * v;
      if (a) base[stride] += fx * gy * v;
      if (b) base[nvxc * stride] += gx * fy * v;
      if (a && b) base[(nvxc + 1) * stride] += fx * fy * v;
    }
  }
}

void prolong(const StructuredGrid& coarse, const StructuredGrid& fine,
             std::span<const double> uc, std::span<double> uf) {
  check_pair(coarse, fine, uc.size(), uf.size(), "prolong");
  prolong_strided(coarse, fine, uc.data(), uf.data(), 1, 0);
}

void restrict_additive(const StructuredGrid& fine, const StructuredGrid& coarse,
                       std::span<const double> uf, std::span<double> uc) {
  check_pair(coarse, fine, uc.size(), uf.size(), "restrict_additive");
  restrict_additive_strided(fine, coarse, uf.data(), uc.data(), 1, 0);
}

void restrict_field(const StructuredGrid& fine, const StructuredGrid& coarse,
                    std::span<const double> uf, std::span<double> uc) {
  check_pair(coarse, fine, uc.size(), uf.size(), "restrict_field");
  std::vector<double> weighted(uf.size());
  for (int J = 0; J < fine.nvy(); ++J)
    for (int I = 0; I < fine.nvx(); ++I) {
      const int v = J * fine.nvx() + I;
      weighted[v] = uf[v] * fine.cv_area(I, J);
    }
  restrict_additive_strided(fine, coarse, weighted.data(), uc.data(), 1, 0);
  for (int j = 0; j < coarse.nvy(); ++j)
    for (int i = 0; i < coarse.nvx(); ++i) {
      const int v = j * coarse.nvx() + i;
      uc[v] /= coarse.cv_area(i, j);
    }
}

double cv_inner(const StructuredGrid& g, std::span<const double> a,
                std::span<const double> b) {
  if (a.size() != static_cast<size_t>(g.num_vertices()) || a.size() != b.size())
    throw std::invalid_argument("cv_inner: vector size mismatch");
  double s = 0.0;
  for (int j = 0; j < g.nvy(); ++j)
    for (int i = 0; i < g.nvx(); ++i) {
      const int v = j * g.nvx() + i;
      s += a[v] * b[v] * g.cv_area(i, j);
    }
  return s;
}

}  // namespace henry
