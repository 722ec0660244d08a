#pragma once

// Kalman-Bucy filter propagation on the grid (Euler-Maruyama):
//   xhat <- xhat + (A xhat + B u) h + L (dy - C xhat h)
// using the precomputed covariance/gain schedule from solve_filter_covariance.

#include "irlqg/riccati.hpp"

#include <vector>

namespace irlqg {

struct SimResult;

struct FilterState {
  double t = 0.0;
  Vector xhat;
  int node_index = 0;
};

[[nodiscard]] FilterState step_filter(const FilterState& state, const Vector& u, const Vector& dy,
                                      const Matrix& L, const ProblemSpec& spec, double h);

/// Compares the Monte Carlo estimation error x - xhat against the filter
/// covariance schedule.
struct ErrorCovarianceReport {
  std::vector<double> relative_deviation;  // ||Cov_hat - Phat|| / ||Phat|| per node
  double max_relative_deviation = 0.0;
  int worst_node = 0;
  double terminal_relative_deviation = 0.0;
  double max_bias_z = 0.0;           // max over nodes/components of |mean err| / SE
  double max_orthogonality_z = 0.0;  // max over nodes of |mean xhat'err| / SE
  double innovation_lag1 = 0.0;      // lag-1 autocorrelation of innovation increments
  double innovation_lag1_z = 0.0;
};

/// Nodes where ||Phat|| is below `floor` are compared in absolute terms.
[[nodiscard]] ErrorCovarianceReport error_covariance_check(const SimResult& sim,
                                                           const FilterCovarianceSolution& filter,
                                                           double floor = 1e-12);

}  // namespace irlqg
