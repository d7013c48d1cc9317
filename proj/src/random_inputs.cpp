#include "henry/random_inputs.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace henry {

namespace {

inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline double to_unit(uint64_t h) {  // [0,1) with 53 random bits
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

RandomInput draw_uniform(uint64_t seed, int level, long index) {
  if (level < 0) throw std::invalid_argument("draw_uniform: level < 0");
  if (index < 0) throw std::invalid_argument("draw_uniform: index < 0");
  uint64_t k = mix64(seed);
  k = mix64(k ^ (static_cast<uint64_t>(level) + 1));
  k = mix64(k ^ (static_cast<uint64_t>(index) + 1));
  RandomInput xi;
  xi.xi1 = 2.0 * to_unit(mix64(k ^ 1)) - 1.0;
  xi.xi2 = 2.0 * to_unit(mix64(k ^ 2)) - 1.0;
  xi.xi3 = 2.0 * to_unit(mix64(k ^ 3)) - 1.0;
  return xi;
}

double radical_inverse(int base, long index) {
  if (base < 2) throw std::invalid_argument("radical_inverse: base < 2");
  if (index < 0) throw std::invalid_argument("radical_inverse: index < 0");
  double f = 1.0 / base, r = 0.0;
  for (long n = index; n > 0; n /= base) {
    r += (n % base) * f;
    f /= base;
  }
  return r;
}

RandomInput halton_point(long index) {
  RandomInput xi;
  xi.xi1 = 2.0 * radical_inverse(2, index) - 1.0;
  xi.xi2 = 2.0 * radical_inverse(3, index) - 1.0;
  xi.xi3 = 2.0 * radical_inverse(5, index) - 1.0;
  return xi;
}

double porosity(const HenryParameters& prm, double x, double y,
                const RandomInput& xi, long* clamp_count) {
  constexpr double pi = std::numbers::pi;
  const double c0 = (y < -0.8) ? 1.2 * (1.0 + 0.2 * xi.xi1) : 1.0;
  const double c1 =
      1.0 + 0.15 * (xi.xi2 * std::cos(pi * x / 2.0) -
                    xi.xi2 * std::sin(2.0 * pi * y) +
                    xi.xi1 * std::cos(2.0 * pi * x));
  const double c2 = 1.0 + 0.2 * (xi.xi1 * std::sin(64.0 * pi * x) +
                                 xi.xi2 * std::sin(32.0 * pi * y));
  double phi = prm.porosity_ref * c0 * c1 * c2;
  if (phi < 0.01) {
    phi = 0.01;
    if (clamp_count) ++*clamp_count;
  } else if (phi > 0.99) {
    phi = 0.99;
    if (clamp_count) ++*clamp_count;
  }
  return phi;
}

double permeability(const HenryParameters& prm, double phi) {
  if (!(phi > 0.0 && phi < 1.0))
    throw std::invalid_argument("permeability: porosity must be in (0,1)");
  return prm.kozeny_scale * phi * phi * phi / (1.0 - phi * phi);
}

double recharge(const HenryParameters& prm, double t, double xi3) {
  constexpr double pi = std::numbers::pi;
  return -prm.recharge_base * (1.0 + 0.5 * xi3) * (1.0 + std::sin(pi * t / 40.0));
}

}  // namespace henry
