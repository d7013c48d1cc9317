#pragma once
// Random model inputs: three i.i.d. U[-1,1) parameters per sample driving the
// porosity field (xi1, xi2) and the recharge amplitude (xi3). Two generators:
// a keyed counter generator addressed by (seed, level, index) so any sample
// can be reproduced in isolation on any platform, and a Halton sequence in
// bases (2,3,5) for quasi-Monte Carlo studies.

#include <cstdint>

#include "henry/params.hpp"

namespace henry {

struct RandomInput {
  double xi1 = 0.0;
  double xi2 = 0.0;
  double xi3 = 0.0;
};

// Counter generator: splitmix64 finalizer chained over (seed, level, index)
// plus a component tag, mapped to [-1,1). Stateless; fixed for reproducibility
// of stored sample records.
RandomInput draw_uniform(uint64_t seed, int level, long index);

// Radical inverse of index in the given base, in [0,1). Index 0 maps to 0.
double radical_inverse(int base, long index);

// Halton point in [-1,1)^3, bases (2,3,5).
RandomInput halton_point(long index);

// Spatially varying porosity: a layered base (denser lens below y = -0.8), a
// smooth trend and a high-frequency texture, clamped to [0.01, 0.99]. Each
// clamp event increments *clamp_count when given.
double porosity(const HenryParameters& prm, double x, double y,
                const RandomInput& xi, long* clamp_count = nullptr);

// Kozeny-Carman permeability K(phi) = kappa * phi^3 / (1 - phi^2).
double permeability(const HenryParameters& prm, double phi);

// Signed recharge mass flux at the left boundary with respect to the outward
// normal; negative values are inflow. Periodic with period 80 s.
double recharge(const HenryParameters& prm, double t, double xi3);

}  // namespace henry
