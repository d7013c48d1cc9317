#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "henry/grid.hpp"
#include "henry/random_inputs.hpp"

using namespace henry;

namespace {

// Independent oracle: reverse the base-b digit string of the index and read
// it as a fraction, using exact rational accumulation.
double radical_inverse_oracle(int base, long index) {
  std::vector<int> digits;
  for (long n = index; n > 0; n /= base) digits.push_back(static_cast<int>(n % base));
  double num = 0.0, den = 1.0;
  for (int d : digits) {
    num = num * base + d;
    den *= base;
  }
  return num / den;
}

}  // namespace

TEST_CASE("radical inverse matches digit-reversal oracle") {
  for (int base : {2, 3, 5}) {
    for (long i = 0; i <= 200; ++i)
      CHECK(radical_inverse(base, i) ==
            doctest::Approx(radical_inverse_oracle(base, i)).epsilon(1e-15));
  }
  CHECK(radical_inverse(2, 1) == 0.5);
  CHECK(radical_inverse(2, 2) == 0.25);
  CHECK(radical_inverse(2, 3) == 0.75);
  CHECK(radical_inverse(3, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-16));
  CHECK_THROWS(radical_inverse(1, 0));
  CHECK_THROWS(radical_inverse(2, -1));
}

TEST_CASE("first Halton points take their known values") {
  const RandomInput h0 = halton_point(0);
  CHECK(h0.xi1 == -1.0);
  CHECK(h0.xi2 == -1.0);
  CHECK(h0.xi3 == -1.0);
  const RandomInput h1 = halton_point(1);
  CHECK(h1.xi1 == 0.0);
  CHECK(h1.xi2 == doctest::Approx(-1.0 / 3.0).epsilon(1e-16));
  CHECK(h1.xi3 == doctest::Approx(-0.6).epsilon(1e-16));
  CHECK(halton_point(2).xi1 == -0.5);
}

TEST_CASE("counter generator is reproducible and component order free") {
  const RandomInput a = draw_uniform(97531, 2, 17);
  const RandomInput b = draw_uniform(97531, 2, 17);
  CHECK(a.xi1 == b.xi1);
  CHECK(a.xi2 == b.xi2);
  CHECK(a.xi3 == b.xi3);
  // Different coordinates of the key give different draws.
  CHECK(draw_uniform(97531, 2, 18).xi1 != a.xi1);
  CHECK(draw_uniform(97531, 1, 17).xi1 != a.xi1);
  CHECK(draw_uniform(97532, 2, 17).xi1 != a.xi1);
  CHECK_THROWS(draw_uniform(1, -1, 0));
  CHECK_THROWS(draw_uniform(1, 0, -1));
}

TEST_CASE("draws fill [-1,1) with the right mean") {
  const long n = 4096;
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    const RandomInput xi = draw_uniform(123, 0, i);
    for (double v : {xi.xi1, xi.xi2, xi.xi3}) {
      CHECK(v >= -1.0);
      CHECK(v < 1.0);
      sum += v;
    }
  }
  // Mean of 3n U[-1,1) draws: sd = 1/sqrt(3*(3n)); allow 4 sd.
  const double sd = 1.0 / std::sqrt(3.0 * 3.0 * n);
  CHECK(std::abs(sum / (3.0 * n)) < 4.0 * sd);
}

TEST_CASE("porosity stays in (0,1) and counts clamps") {
  const HenryParameters prm;
  const StructuredGrid g = build_grid(1);
  for (const RandomInput xi :
       {RandomInput{0, 0, 0}, RandomInput{1, 1, 1}, RandomInput{-1, -1, -1},
        RandomInput{0.99, -0.99, 0.5}}) {
    long clamps = 0;
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i <= g.nx; ++i) {
        const double phi = porosity(prm, g.x(i), g.y(j), xi, &clamps);
        CHECK(phi >= 0.01);
        CHECK(phi <= 0.99);
      }
    CHECK(clamps >= 0);
  }
  // The unperturbed medium never needs clamping.
  long clamps = 0;
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i)
      porosity(prm, g.x(i), g.y(j), RandomInput{0, 0, 0}, &clamps);
  CHECK(clamps == 0);
}

TEST_CASE("porosity is layered: denser lens below y = -0.8") {
  const HenryParameters prm;
  const RandomInput xi{0.5, 0.0, 0.0};
  // With xi2 = 0 the only y dependence above the lens is the texture term,
  // so compare the same x at mirrored texture phases.
  const double below = porosity(prm, 0.25, -0.9, xi);
  const double above = porosity(prm, 0.25, -0.5, xi);
  CHECK(below > above);
}

TEST_CASE("permeability closure hits the reference point") {
  const HenryParameters prm;
  const double k = permeability(prm, prm.porosity_ref);
  CHECK(std::abs(k - prm.permeability_ref) <= 1e-4 * prm.permeability_ref);
  // Monotone in porosity on (0,1).
  CHECK(permeability(prm, 0.5) > permeability(prm, 0.3));
  CHECK_THROWS(permeability(prm, 0.0));
  CHECK_THROWS(permeability(prm, 1.0));
}

TEST_CASE("recharge is an inflow, 80 s periodic, amplitude-modulated") {
  const HenryParameters prm;
  for (double t : {0.0, 13.0, 40.0, 77.5}) {
    for (double xi3 : {-1.0, 0.0, 1.0}) {
      const double r = recharge(prm, t, xi3);
      CHECK(r <= 0.0);  // negative w.r.t. the outward normal = inflow
      CHECK(recharge(prm, t + 80.0, xi3) == doctest::Approx(r).epsilon(1e-12));
    }
    // Larger xi3 means stronger inflow at every instant.
    CHECK(recharge(prm, t, 1.0) <= recharge(prm, t, -1.0));
  }
  CHECK(recharge(prm, 0.0, 0.0) == doctest::Approx(-prm.recharge_base));
}
