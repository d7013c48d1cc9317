#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "henry/grid.hpp"
#include "henry/io.hpp"
#include "henry/mlmc.hpp"

using namespace henry;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "henry_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("fmt emits shortest round-trip decimal forms") {
  CHECK(io::fmt(0.1) == "0.1");
  CHECK(io::fmt(1504.0) == "1504");
  CHECK(io::fmt(-2.5e-11) == "-2.5e-11");
  CHECK(io::fmt(0.0) == "0");
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double x = u(rng) * std::pow(10.0, (k % 61) - 30);
    CHECK(std::stod(io::fmt(x)) == x);
  }
}

TEST_CASE("text files round trip") {
  const fs::path dir = fresh_dir("text");
  io::write_text(dir / "a.txt", "line\nline2\n");
  CHECK(io::read_text(dir / "a.txt") == "line\nline2\n");
  CHECK_THROWS(io::read_text(dir / "missing.txt"));
}

TEST_CASE("level statistics tables round trip losslessly") {
  const fs::path dir = fresh_dir("stats");
  std::vector<LevelStats> stats(2);
  stats[0].level = 0;
  stats[0].m = 3;
  stats[0].t = {64.0, 128.0};
  stats[0].mean_diff = {150.123456789012345, -0.25};
  stats[0].variance = {1e-17, 2.0 / 3.0};
  stats[0].cost_mean = 129897.0;
  stats[0].wall_mean = 0.5;
  stats[1].level = 1;
  stats[1].m = 1;  // variance unavailable
  stats[1].t = {64.0, 128.0};
  stats[1].mean_diff = {0.5, 0.75};
  stats[1].cost_mean = 1.5e6;

  const fs::path file = dir / "level_stats.csv";
  io::write_level_stats(file, stats);
  const auto back = io::read_level_stats(file);
  REQUIRE(back.size() == 2);
  CHECK(back[0].level == 0);
  CHECK(back[0].m == 3);
  CHECK(back[0].t == stats[0].t);
  CHECK(back[0].mean_diff[0] == stats[0].mean_diff[0]);
  CHECK(back[0].variance[0] == stats[0].variance[0]);
  CHECK(back[0].variance[1] == stats[0].variance[1]);
  CHECK(back[0].cost_mean == stats[0].cost_mean);
  CHECK(back[1].variance.empty());
  CHECK(back[1].m == 1);

  // The header names the schema so foreign files are rejected loudly.
  const std::string text = io::read_text(file);
  CHECK(text.find("# schema=henry-level-stats-v1") == 0);
  io::write_text(dir / "bad.csv", "# schema=other\nlevel,t\n");
  CHECK_THROWS(io::read_level_stats(dir / "bad.csv"));
}

TEST_CASE("qoi series tables carry one row per sample point") {
  const fs::path dir = fresh_dir("qoi_csv");
  std::vector<io::QoiCsvRow> rows;
  rows.push_back({"r1", 0, 0, "QS", 64.0, 1.25});
  rows.push_back({"r1", 0, 0, "QS", 128.0, 2.5});
  const fs::path file = dir / "qoi_series.csv";
  io::write_qoi_series(file, rows);
  std::istringstream in(io::read_text(file));
  std::string line;
  std::getline(in, line);
  CHECK(line == "# schema=henry-qoi-series-v1");
  std::getline(in, line);
  CHECK(line == "run_id,level,sample_idx,qoi,t,value");
  std::getline(in, line);
  CHECK(line == "r1,0,0,QS,64,1.25");
  std::getline(in, line);
  CHECK(line == "r1,0,0,QS,128,2.5");
  CHECK(!std::getline(in, line));
}

TEST_CASE("vtk snapshots describe the structured grid") {
  const fs::path dir = fresh_dir("vtk");
  const StructuredGrid g = build_grid(0);
  std::vector<double> c(static_cast<size_t>(g.num_vertices()), 0.5);
  std::vector<double> q(2 * c.size(), 1.0);
  const fs::path file = dir / "snap.vtk";
  io::write_vtk_fields(file, g, "test snapshot", {{"c", c}}, {{"q", q}});
  const std::string text = io::read_text(file);
  CHECK(text.find("# vtk DataFile Version 3.0") == 0);
  CHECK(text.find("DATASET STRUCTURED_POINTS") != std::string::npos);
  CHECK(text.find("DIMENSIONS 17 9 1") != std::string::npos);
  CHECK(text.find("ORIGIN 0 -1 0") != std::string::npos);
  CHECK(text.find("SPACING 0.125 0.125 1") != std::string::npos);
  CHECK(text.find("POINT_DATA 153") != std::string::npos);
  CHECK(text.find("SCALARS c double 1") != std::string::npos);
  CHECK(text.find("VECTORS q double") != std::string::npos);
  // Vectors are padded with a zero z component.
  CHECK(text.find("1 1 0") != std::string::npos);
  // Field size mismatches are refused.
  CHECK_THROWS(io::write_vtk_fields(file, g, "bad", {{"c", q}}));
}

TEST_CASE("svg plots contain every series and its legend") {
  const fs::path dir = fresh_dir("svg");
  io::PlotSeries a, b;
  a.label = "measured";
  a.x = {0.0, 1.0, 2.0};
  a.y = {3.0, 1.0, -1.0};
  b.label = "fitted";
  b.x = {0.0, 2.0};
  b.y = {2.75, -0.9};
  b.dashed = true;
  b.markers = false;
  const fs::path file = dir / "plot.svg";
  io::write_svg_plot(file, "decay", "level", "log4 value", {a, b});
  const std::string text = io::read_text(file);
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.rfind("</svg>\n") != std::string::npos);
  CHECK(text.find("measured") != std::string::npos);
  CHECK(text.find("fitted") != std::string::npos);
  CHECK(text.find("decay") != std::string::npos);
  CHECK(text.find("stroke-dasharray") != std::string::npos);
  // One polyline per series plus axes.
  size_t count = 0;
  for (size_t pos = text.find("<polyline"); pos != std::string::npos;
       pos = text.find("<polyline", pos + 1))
    ++count;
  CHECK(count >= 2);
}
