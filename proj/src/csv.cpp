#include "irlqg/csv.hpp"

#include "irlqg/simulator.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace irlqg {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_matrix_series(std::ostream& os, const TimeGrid& grid, const std::vector<Matrix>& series,
                         const std::string& prefix) {
  if (series.empty()) return;
  const auto rows = series.front().rows(), cols = series.front().cols();
  os << "t";
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) os << ',' << prefix << '_' << i << j;
  os << '\n';
  for (std::size_t k = 0; k < series.size(); ++k) {
    os << format_double(grid.node(static_cast<int>(k)));
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) os << ',' << format_double(series[k](i, j));
    os << '\n';
  }
}

void write_vector_series(std::ostream& os, const TimeGrid& grid, const std::vector<Vector>& series,
                         const std::string& prefix) {
  if (series.empty()) return;
  os << "t";
  for (Eigen::Index i = 0; i < series.front().size(); ++i) os << ',' << prefix << '_' << i;
  os << '\n';
  for (std::size_t k = 0; k < series.size(); ++k) {
    os << format_double(grid.node(static_cast<int>(k)));
    for (Eigen::Index i = 0; i < series[k].size(); ++i) os << ',' << format_double(series[k](i));
    os << '\n';
  }
}

void write_mean_path(std::ostream& os, const SimResult& sim) {
  if (sim.mean_x.empty()) return;
  const auto n = sim.mean_x.front().size(), m = sim.mean_u.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x_" << i;
  for (Eigen::Index i = 0; i < n; ++i) os << ",xhat_" << i;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_" << i;
  os << '\n';
  for (std::size_t k = 0; k < sim.mean_x.size(); ++k) {
    os << format_double(sim.grid.node(static_cast<int>(k)));
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_double(sim.mean_x[k](i));
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_double(sim.mean_xhat[k](i));
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << format_double(sim.mean_u[k](i));
    os << '\n';
  }
}

void write_summary(std::ostream& os, const std::vector<std::pair<std::string, double>>& rows) {
  os << "key,value\n";
  for (const auto& [k, v] : rows) os << k << ',' << format_double(v) << '\n';
}

std::vector<Vector> read_schedule(std::istream& is, const TimeGrid& grid, int m) {
  std::vector<Vector> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      const std::string c = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (!numeric) {
      if (out.empty()) continue;  // header
      throw ProblemError("schedule line " + std::to_string(lineno) + ": non-numeric value");
    }
    const auto cnt = static_cast<int>(vals.size());
    if (cnt != m && cnt != m + 1) {
      throw ProblemError("schedule line " + std::to_string(lineno) + ": expected " +
                         std::to_string(m) + " or " + std::to_string(m + 1) + " columns, got " +
                         std::to_string(cnt));
    }
    out.push_back(Eigen::Map<const Vector>(vals.data() + (cnt - m), m));
  }
  if (static_cast<int>(out.size()) != grid.size()) {
    throw ProblemError("schedule has " + std::to_string(out.size()) + " rows; grid has " +
                       std::to_string(grid.size()) + " nodes");
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace irlqg
