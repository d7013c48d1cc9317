#pragma once
// Grid transfer operators between consecutive levels (refinement ratio 4 per
// axis). prolong is bilinear interpolation on the coarse elements.
// restrict_field is its exact adjoint in the control-volume inner products,
//   <restrict(u), v>_CV,coarse = sigma * <u, prolong(v)>_CV,fine,  sigma = 1,
// and reproduces coarse constants. restrict_additive is the plain transpose
// (sums fine contributions), which conserves totals of extensive quantities
// and is the residual transfer used by the multigrid cycle.

#include <span>

#include "henry/grid.hpp"

namespace henry {

inline constexpr double kRestrictAdjointSigma = 1.0;

void prolong(const StructuredGrid& coarse, const StructuredGrid& fine,
             std::span<const double> uc, std::span<double> uf);

void restrict_additive(const StructuredGrid& fine, const StructuredGrid& coarse,
                       std::span<const double> uf, std::span<double> uc);

void restrict_field(const StructuredGrid& fine, const StructuredGrid& coarse,
                    std::span<const double> uf, std::span<double> uc);

// Control-volume-weighted inner product sum_v a_v b_v |CV_v|.
double cv_inner(const StructuredGrid& g, std::span<const double> a,
                std::span<const double> b);

// Strided variants used on interleaved multi-field vectors: element v lives at
// index v * stride + offset. Plain (contiguous) spans are stride 1, offset 0.
void prolong_strided(const StructuredGrid& coarse, const StructuredGrid& fine,
                     const double* uc, double* uf, int stride, int offset);
void restrict_additive_strided(const StructuredGrid& fine,
                               const StructuredGrid& coarse, const double* uf,
                               double* uc, int stride, int offset);

}  // namespace henry
