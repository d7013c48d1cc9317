#include "henry/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace henry::io {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[36];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& file, const std::string& content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << content;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_level_stats(const fs::path& file,
                       const std::vector<LevelStats>& stats) {
  std::string out;
  out += "# schema=henry-level-stats-v1\n";
  out += "level,t,mean_diff,variance,m,cost\n";
  for (const auto& s : stats) {
    for (size_t k = 0; k < s.t.size(); ++k) {
      out += std::to_string(s.level);
      out += ',';
      out += fmt(s.t[k]);
      out += ',';
      out += fmt(s.mean_diff[k]);
      out += ',';
      out += s.variance_available() ? fmt(s.variance[k]) : "nan";
      out += ',';
      out += std::to_string(s.m);
      out += ',';
      out += fmt(s.cost_mean);
      out += '\n';
    }
  }
  write_text(file, out);
}

namespace {

double parse_double(const std::string& s, const fs::path& file) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("bad number '" + s + "' in " + file.string());
  return v;
}

}  // namespace

std::vector<LevelStats> read_level_stats(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != "# schema=henry-level-stats-v1")
    throw std::runtime_error("unrecognized level-stats schema in " +
                             file.string());
  std::map<int, LevelStats> by_level;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // column header
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      throw std::runtime_error("malformed row in " + file.string());
    const int level = std::stoi(cells[0]);
    LevelStats& s = by_level[level];
    s.level = level;
    s.t.push_back(parse_double(cells[1], file));
    s.mean_diff.push_back(parse_double(cells[2], file));
    const double var = parse_double(cells[3], file);
    if (!std::isnan(var)) s.variance.push_back(var);
    s.m = std::stol(cells[4]);
    s.cost_mean = parse_double(cells[5], file);
  }
  std::vector<LevelStats> out;
  for (auto& [level, s] : by_level) {
    if (!s.variance.empty() && s.variance.size() != s.t.size())
      throw std::runtime_error("inconsistent variance column in " +
                               file.string());
    out.push_back(std::move(s));
  }
  return out;
}

void write_qoi_series(const fs::path& file, std::span<const QoiCsvRow> rows) {
  std::string out;
  out += "# schema=henry-qoi-series-v1\n";
  out += "run_id,level,sample_idx,qoi,t,value\n";
  for (const auto& r : rows) {
    out += r.run_id;
    out += ',';
    out += std::to_string(r.level);
    out += ',';
    out += std::to_string(r.sample);
    out += ',';
    out += r.qoi;
    out += ',';
    out += fmt(r.t);
    out += ',';
    out += fmt(r.v);
    out += '\n';
  }
  write_text(file, out);
}

void write_vtk_fields(const fs::path& file, const StructuredGrid& g,
                      const std::string& title,
                      const std::vector<NamedField>& scalars,
                      const std::vector<NamedField>& vectors) {
  const size_t nv = static_cast<size_t>(g.num_vertices());
  for (const auto& [name, data] : scalars)
    if (data.size() != nv)
      throw std::invalid_argument("vtk field " + name + ": size mismatch");
  for (const auto& [name, data] : vectors)
    if (data.size() != 2 * nv)
      throw std::invalid_argument("vtk vector " + name + ": size mismatch");

  std::string out;
  out += "# vtk DataFile Version 3.0\n";
  out += title + "\n";
  out += "ASCII\n";
  out += "DATASET STRUCTURED_POINTS\n";
  out += "DIMENSIONS " + std::to_string(g.nvx()) + " " +
         std::to_string(g.nvy()) + " 1\n";
  out += "ORIGIN " + fmt(kDomainXMin) + " " + fmt(kDomainYMin) + " 0\n";
  out += "SPACING " + fmt(g.hx) + " " + fmt(g.hy) + " 1\n";
  out += "POINT_DATA " + std::to_string(nv) + "\n";
  for (const auto& [name, data] : scalars) {
    out += "SCALARS " + name + " double 1\n";
    out += "LOOKUP_TABLE default\n";
    for (double v : data) {
      out += fmt(v);
      out += '\n';
    }
  }
  for (const auto& [name, data] : vectors) {
    out += "VECTORS " + name + " double\n";
    for (size_t v = 0; v < nv; ++v) {
      out += fmt(data[2 * v]);
      out += ' ';
      out += fmt(data[2 * v + 1]);
      out += " 0\n";
    }
  }
  write_text(file, out);
}

namespace {

struct Mapper {
  double xmin, xmax, ymin, ymax;
  double px0, px1, py0, py1;  // pixel box (py0 is the top)
  double x(double v) const {
    return px0 + (v - xmin) / (xmax - xmin) * (px1 - px0);
  }
  double y(double v) const {
    return py1 - (v - ymin) / (ymax - ymin) * (py1 - py0);
  }
};

std::string tick_label(double v) {
  // Shorten rounded tick values; fmt() alone may carry binary noise.
  const double r = std::round(v * 1e6) / 1e6;
  return fmt(r == 0.0 ? 0.0 : r);
}

}  // namespace

void write_svg_plot(const fs::path& file, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series) {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool first = true;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      } else {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
    }
  if (xmax - xmin < 1e-12) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  Mapper m{xmin - xpad, xmax + xpad, ymin - ypad, ymax + ypad,
           70.0,        700.0,       40.0,        430.0};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" "
         "height=\"480\" viewBox=\"0 0 720 480\">\n";
  svg += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  svg += "<text x=\"360\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" +
         title + "</text>\n";
  // axes
  svg += "<line x1=\"70\" y1=\"430\" x2=\"700\" y2=\"430\" stroke=\"black\"/>\n";
  svg += "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"430\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = m.xmin + (m.xmax - m.xmin) * k / 4.0;
    const double fy = m.ymin + (m.ymax - m.ymin) * k / 4.0;
    svg += "<line x1=\"" + fmt(m.x(fx)) + "\" y1=\"430\" x2=\"" + fmt(m.x(fx)) +
           "\" y2=\"434\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(m.x(fx)) +
           "\" y=\"448\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           tick_label(fx) + "</text>\n";
    svg += "<line x1=\"66\" y1=\"" + fmt(m.y(fy)) + "\" x2=\"70\" y2=\"" +
           fmt(m.y(fy)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"62\" y=\"" + fmt(m.y(fy) + 4.0) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           tick_label(fy) + "</text>\n";
  }
  svg += "<text x=\"385\" y=\"472\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"13\">" +
         xlabel + "</text>\n";
  svg += "<text x=\"16\" y=\"235\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 16 235)\">" +
         ylabel + "</text>\n";

  double ly = 56.0;
  for (const auto& s : series) {
    std::string pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += fmt(m.x(s.x[i])) + "," + fmt(m.y(s.y[i])) + " ";
    }
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
           s.color + "\" stroke-width=\"1.5\"" +
           (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + "/>\n";
    if (s.markers)
      for (size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        svg += "<circle cx=\"" + fmt(m.x(s.x[i])) + "\" cy=\"" +
               fmt(m.y(s.y[i])) + "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
      }
    svg += "<line x1=\"560\" y1=\"" + fmt(ly - 4.0) + "\" x2=\"584\" y2=\"" +
           fmt(ly - 4.0) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
           (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + "/>\n";
    svg += "<text x=\"590\" y=\"" + fmt(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + s.label +
           "</text>\n";
    ly += 18.0;
  }
  svg += "</svg>\n";
  write_text(file, svg);
}

}  // namespace henry::io
