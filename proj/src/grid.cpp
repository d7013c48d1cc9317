#include "henry/grid.hpp"

namespace henry {

StructuredGrid build_grid(int level) {
  if (level < 0 || level > kMaxLevel)
    throw std::invalid_argument("build_grid: level must be in [0, " +
                                std::to_string(kMaxLevel) + "], got " +
                                std::to_string(level));
  StructuredGrid g;
  g.level = level;
  g.nx = kBaseNx;
  g.ny = kBaseNy;
  for (int l = 0; l < level; ++l) {
    g.nx *= kRefine;
    g.ny *= kRefine;
  }
  g.hx = (kDomainXMax - kDomainXMin) / g.nx;
  g.hy = (kDomainYMax - kDomainYMin) / g.ny;
  return g;
}

TimeGrid build_time_grid(int level) {
  if (level < 0 || level > kMaxLevel)
    throw std::invalid_argument("build_time_grid: level must be in [0, " +
                                std::to_string(kMaxLevel) + "], got " +
                                std::to_string(level));
  TimeGrid t;
  t.level = level;
  t.steps = kBaseSteps;
  for (int l = 0; l < level; ++l) t.steps *= kRefine;
  t.tau = kHorizon / t.steps;
  return t;
}

GridHierarchy::GridHierarchy(int max_level) {
  if (max_level < 0 || max_level > kMaxLevel)
    throw std::invalid_argument("GridHierarchy: max_level must be in [0, " +
                                std::to_string(kMaxLevel) + "]");
  for (int l = 0; l <= max_level; ++l) {
    grids_.push_back(build_grid(l));
    time_grids_.push_back(build_time_grid(l));
  }
}

const StructuredGrid& GridHierarchy::grid(int level) const {
  if (level < 0 || level > max_level())
    throw std::invalid_argument("GridHierarchy::grid: level out of range");
  return grids_[level];
}

const TimeGrid& GridHierarchy::time_grid(int level) const {
  if (level < 0 || level > max_level())
    throw std::invalid_argument("GridHierarchy::time_grid: level out of range");
  return time_grids_[level];
}

}  // namespace henry
