#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "henry/grid.hpp"
#include "henry/transfer.hpp"

using namespace henry;

namespace {

std::vector<double> random_field(const StructuredGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(static_cast<size_t>(g.num_vertices()));
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("prolongation reproduces bilinear functions exactly") {
  const StructuredGrid gc = build_grid(0);
  const StructuredGrid gf = build_grid(1);
  // A bilinear function is its own interpolant on every coarse element.
  auto f = [](double x, double y) { return 0.7 - 1.3 * x + 2.1 * y + 0.9 * x * y; };
  std::vector<double> uc(static_cast<size_t>(gc.num_vertices()));
  for (int j = 0; j <= gc.ny; ++j)
    for (int i = 0; i <= gc.nx; ++i)
      uc[static_cast<size_t>(gc.vid(i, j))] = f(gc.x(i), gc.y(j));
  std::vector<double> uf(static_cast<size_t>(gf.num_vertices()));
  prolong(gc, gf, uc, uf);
  for (int j = 0; j <= gf.ny; ++j)
    for (int i = 0; i <= gf.nx; ++i)
      CHECK(uf[static_cast<size_t>(gf.vid(i, j))] ==
            doctest::Approx(f(gf.x(i), gf.y(j))).epsilon(1e-13));
}

TEST_CASE("field restriction is the control-volume adjoint of prolongation") {
  for (int lc = 0; lc <= 1; ++lc) {
    const StructuredGrid gc = build_grid(lc);
    const StructuredGrid gf = build_grid(lc + 1);
    const auto uf = random_field(gf, 11u + static_cast<unsigned>(lc));
    const auto vc = random_field(gc, 23u + static_cast<unsigned>(lc));
    std::vector<double> ruf(static_cast<size_t>(gc.num_vertices()));
    restrict_field(gf, gc, uf, ruf);
    std::vector<double> pvc(static_cast<size_t>(gf.num_vertices()));
    prolong(gc, gf, vc, pvc);
    const double lhs = cv_inner(gc, ruf, vc);
    const double rhs = kRestrictAdjointSigma * cv_inner(gf, uf, pvc);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("field restriction reproduces constants") {
  const StructuredGrid gc = build_grid(0);
  const StructuredGrid gf = build_grid(1);
  std::vector<double> uf(static_cast<size_t>(gf.num_vertices()), 3.25);
  std::vector<double> uc(static_cast<size_t>(gc.num_vertices()));
  restrict_field(gf, gc, uf, uc);
  for (double v : uc) CHECK(v == doctest::Approx(3.25).epsilon(1e-14));
}

TEST_CASE("additive restriction conserves totals") {
  const StructuredGrid gc = build_grid(1);
  const StructuredGrid gf = build_grid(2);
  const auto uf = random_field(gf, 5u);
  std::vector<double> uc(static_cast<size_t>(gc.num_vertices()));
  restrict_additive(gf, gc, uf, uc);
  double sf = 0.0, sc = 0.0;
  for (double v : uf) sf += v;
  for (double v : uc) sc += v;
  CHECK(sf == doctest::Approx(sc).epsilon(1e-12));
}

TEST_CASE("strided transfers match the contiguous ones on interleaved data") {
  const StructuredGrid gc = build_grid(0);
  const StructuredGrid gf = build_grid(1);
  const auto a = random_field(gc, 7u);
  const auto b = random_field(gc, 9u);
  std::vector<double> inter(2 * a.size());
  for (size_t v = 0; v < a.size(); ++v) {
    inter[2 * v] = a[v];
    inter[2 * v + 1] = b[v];
  }
  std::vector<double> fa(static_cast<size_t>(gf.num_vertices()));
  std::vector<double> fb(fa.size());
  prolong(gc, gf, a, fa);
  prolong(gc, gf, b, fb);
  std::vector<double> finter(2 * fa.size(), -7.0);
  prolong_strided(gc, gf, inter.data(), finter.data(), 2, 0);
  prolong_strided(gc, gf, inter.data(), finter.data(), 2, 1);
  for (size_t v = 0; v < fa.size(); ++v) {
    CHECK(finter[2 * v] == fa[v]);
    CHECK(finter[2 * v + 1] == fb[v]);
  }

  const auto rf = random_field(gf, 13u);
  const auto rg = random_field(gf, 17u);
  std::vector<double> rinter(2 * rf.size());
  for (size_t v = 0; v < rf.size(); ++v) {
    rinter[2 * v] = rf[v];
    rinter[2 * v + 1] = rg[v];
  }
  std::vector<double> ca(static_cast<size_t>(gc.num_vertices()));
  std::vector<double> cb(ca.size());
  restrict_additive(gf, gc, rf, ca);
  restrict_additive(gf, gc, rg, cb);
  std::vector<double> cinter(2 * ca.size(), -7.0);
  restrict_additive_strided(gf, gc, rinter.data(), cinter.data(), 2, 0);
  restrict_additive_strided(gf, gc, rinter.data(), cinter.data(), 2, 1);
  for (size_t v = 0; v < ca.size(); ++v) {
    CHECK(cinter[2 * v] == ca[v]);
    CHECK(cinter[2 * v + 1] == cb[v]);
  }
}

TEST_CASE("coarse vertices coincide with every 4th fine vertex") {
  const StructuredGrid gc = build_grid(1);
  const StructuredGrid gf = build_grid(2);
  for (int j = 0; j <= gc.ny; ++j)
    for (int i = 0; i <= gc.nx; ++i) {
      CHECK(gc.x(i) == gf.x(4 * i));
      CHECK(gc.y(j) == gf.y(4 * j));
    }
}
