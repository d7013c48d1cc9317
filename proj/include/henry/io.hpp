#pragma once
// Artifact writers: CSV tables with schema headers, legacy-ASCII VTK field
// snapshots, and small self-contained SVG plots. All floating-point output
// goes through the shortest round-trip formatter so files are byte-stable
// across runs and worker counts.

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "henry/grid.hpp"
#include "henry/mlmc.hpp"

namespace henry::io {

// Shortest decimal string that parses back to exactly v.
std::string fmt(double v);

void write_text(const std::filesystem::path& file, const std::string& content);
std::string read_text(const std::filesystem::path& file);

// level_stats.csv: one row per (level, time point).
// Columns: level,t,mean_diff,variance,m,cost; variance is "nan" when fewer
// than two samples back it. cost is the mean work units per coupled sample.
void write_level_stats(const std::filesystem::path& file,
                       const std::vector<LevelStats>& stats);
std::vector<LevelStats> read_level_stats(const std::filesystem::path& file);

struct QoiCsvRow {
  std::string run_id;
  int level = 0;
  long sample = 0;
  std::string qoi;
  double t = 0.0;
  double v = 0.0;
};
void write_qoi_series(const std::filesystem::path& file,
                      std::span<const QoiCsvRow> rows);

// Legacy ASCII VTK structured-points snapshot of vertex fields. Scalars are
// one value per vertex; vector fields carry two interleaved components per
// vertex and are padded with a zero z component.
using NamedField = std::pair<std::string, std::span<const double>>;
void write_vtk_fields(const std::filesystem::path& file,
                      const StructuredGrid& g, const std::string& title,
                      const std::vector<NamedField>& scalars,
                      const std::vector<NamedField>& vectors = {});

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool markers = true;
};

// Minimal line plot (linear axes; callers pass log-transformed data when a
// log scale is wanted and say so in the axis label).
void write_svg_plot(const std::filesystem::path& file, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series);

}  // namespace henry::io
