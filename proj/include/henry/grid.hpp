#pragma once
// Nested structured grids on the rectangular aquifer [0,2] x [-1,0] and the
// matching time grids. Level l refines both axes by 4, so mesh widths stay
// exact powers of two and coarse vertices coincide bitwise with fine ones.

#include <stdexcept>
#include <vector>

namespace henry {

inline constexpr double kDomainXMin = 0.0;
inline constexpr double kDomainXMax = 2.0;
inline constexpr double kDomainYMin = -1.0;
inline constexpr double kDomainYMax = 0.0;
inline constexpr double kDomainArea = 2.0;

inline constexpr int kBaseNx = 16;      // level-0 elements in x
inline constexpr int kBaseNy = 8;       // level-0 elements in y
inline constexpr int kBaseSteps = 94;   // level-0 time steps
inline constexpr double kHorizon = 6016.0;  // simulated time [s]
inline constexpr int kRefine = 4;       // refinement ratio per axis and in time
inline constexpr int kMaxLevel = 5;     // vertex ids stay within 32-bit int

struct StructuredGrid {
  int level = 0;
  int nx = kBaseNx;   // element count in x
  int ny = kBaseNy;   // element count in y
  double hx = 0.0;
  double hy = 0.0;

  int nvx() const { return nx + 1; }
  int nvy() const { return ny + 1; }
  int num_vertices() const { return nvx() * nvy(); }
  int vid(int i, int j) const { return j * nvx() + i; }

  double x(int i) const { return i * hx; }
  double y(int j) const { return kDomainYMin + j * hy; }

  bool on_left(int i) const { return i == 0; }
  bool on_right(int i) const { return i == nx; }
  bool on_bottom(int j) const { return j == 0; }
  bool on_top(int j) const { return j == ny; }

  // Extent of the dual (control volume) cell of vertex i along one axis;
  // boundary vertices own half cells.
  double wx(int i) const { return (i == 0 || i == nx) ? 0.5 * hx : hx; }
  double wy(int j) const { return (j == 0 || j == ny) ? 0.5 * hy : hy; }
  double cv_area(int i, int j) const { return wx(i) * wy(j); }

  // Control-volume bounds, clipped to the domain.
  double cv_xlo(int i) const { return x(i) - (i > 0 ? 0.5 * hx : 0.0); }
  double cv_xhi(int i) const { return x(i) + (i < nx ? 0.5 * hx : 0.0); }
  double cv_ylo(int j) const { return y(j) - (j > 0 ? 0.5 * hy : 0.0); }
  double cv_yhi(int j) const { return y(j) + (j < ny ? 0.5 * hy : 0.0); }
};

struct TimeGrid {
  int level = 0;
  int steps = kBaseSteps;
  double tau = 0.0;  // kHorizon / steps
};

StructuredGrid build_grid(int level);
TimeGrid build_time_grid(int level);

// Grids and time grids for levels 0..max_level, built once and shared.
class GridHierarchy {
 public:
  explicit GridHierarchy(int max_level);
  int max_level() const { return static_cast<int>(grids_.size()) - 1; }
  const StructuredGrid& grid(int level) const;
  const TimeGrid& time_grid(int level) const;

 private:
  std::vector<StructuredGrid> grids_;
  std::vector<TimeGrid> time_grids_;
};

}  // namespace henry
