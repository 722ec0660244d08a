#pragma once

// CSV output with 17 significant digits, enough to round-trip doubles.

#include "irlqg/matrixkit.hpp"
#include "irlqg/problem.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace irlqg {

struct SimResult;

[[nodiscard]] std::string format_double(double v);

/// One row per node: t, then the row-major entries of M(t) named prefix_ij.
void write_matrix_series(std::ostream& os, const TimeGrid& grid, const std::vector<Matrix>& series,
                         const std::string& prefix);
/// One row per node: t, then prefix_i.
void write_vector_series(std::ostream& os, const TimeGrid& grid, const std::vector<Vector>& series,
                         const std::string& prefix);

/// Per-node means: t, x_i, xhat_i, u_i.
void write_mean_path(std::ostream& os, const SimResult& sim);

/// Two-column key,value table.
void write_summary(std::ostream& os, const std::vector<std::pair<std::string, double>>& rows);

/// Reads a control schedule: optional header, then rows of either m values
/// or t followed by m values. Row count must equal grid.size().
[[nodiscard]] std::vector<Vector> read_schedule(std::istream& is, const TimeGrid& grid, int m);

void write_file(const std::string& path, const std::string& content);

}  // namespace irlqg
