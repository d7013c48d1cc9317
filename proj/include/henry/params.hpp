#pragma once
// Physical constants of the saltwater-intrusion test problem. SI units
// throughout (m, s, kg, Pa); concentrations are salt mass fractions in [0,1].

#include <cmath>
#include <stdexcept>

namespace henry {

struct HenryParameters {
  double porosity_ref = 0.35;          // reference porosity
  double diffusion = 18.8571e-6;       // molecular diffusion D [m^2/s]
  double permeability_ref = 1.020408e-9;  // K at reference porosity [m^2]
  double rho_fresh = 1000.0;           // pure-water density [kg/m^3]
  double rho_brine = 1024.99;          // seawater density at c=1 [kg/m^3]
  double viscosity = 1.0e-3;           // dynamic viscosity [kg/(m s)]
  double kozeny_scale = 2.088415e-8;   // Kozeny-Carman prefactor [m^2]
  double gravity_y = -9.8;             // gravity (0, gravity_y) [m/s^2]
  double recharge_base = 6.6e-2;       // recharge magnitude [kg/(m^2 s)]
  double fw_threshold = 0.012178;      // c at or below this counts as fresh water

  // Linear equation of state rho(c).
  double density(double c) const {
    return rho_fresh + (rho_brine - rho_fresh) * c;
  }
  double drho_dc() const { return rho_brine - rho_fresh; }

  // Hydrostatic seawater column with p = 0 at the surface y = 0; positive
  // below the surface so that grad p = rho1 * g holds exactly.
  double sea_pressure(double y) const { return rho_brine * gravity_y * y; }
  double fresh_pressure(double y) const { return rho_fresh * gravity_y * y; }
};

}  // namespace henry
