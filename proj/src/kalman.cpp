#include "irlqg/kalman.hpp"

#include "irlqg/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace irlqg {

FilterState step_filter(const FilterState& state, const Vector& u, const Vector& dy, const Matrix& L,
                        const ProblemSpec& spec, double h) {
  const int k = state.node_index;
  const Matrix& A = spec.A.at_node(k);
  const Matrix& B = spec.B.at_node(k);
  const Matrix& C = spec.C.at_node(k);
  FilterState next;
  next.t = state.t + h;
  next.node_index = k + 1;
  next.xhat = state.xhat + h * (A * state.xhat + B * u) + L * (dy - h * (C * state.xhat));
  return next;
}

ErrorCovarianceReport error_covariance_check(const SimResult& sim,
                                             const FilterCovarianceSolution& filter,
                                             double floor) {
  const std::size_t nodes = std::min(sim.error_cov.size(), filter.Phat.size());
  if (nodes == 0) throw std::invalid_argument("error_covariance_check: no per-node statistics");
  ErrorCovarianceReport rep;
  rep.relative_deviation.reserve(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    const Matrix& Phat = filter.Phat[k];
    const double scale = Phat.norm();
    const double diff = (sim.error_cov[k] - Phat).norm();
    const double rel = scale < floor ? diff : diff / scale;
    rep.relative_deviation.push_back(rel);
    if (rel > rep.max_relative_deviation) {
      rep.max_relative_deviation = rel;
      rep.worst_node = static_cast<int>(k);
    }

    const Vector& mean = sim.error_mean[k];
    const Vector& se = sim.error_mean_se[k];
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      if (se(i) > 0.0) rep.max_bias_z = std::max(rep.max_bias_z, std::abs(mean(i)) / se(i));
    }
    const double ose = sim.orthogonality_se[k];
    if (ose > 0.0) {
      rep.max_orthogonality_z =
          std::max(rep.max_orthogonality_z, std::abs(sim.orthogonality_mean[k]) / ose);
    }
  }
  rep.terminal_relative_deviation = rep.relative_deviation.back();
  rep.innovation_lag1 = sim.innovation_lag1;
  rep.innovation_lag1_z =
      sim.innovation_lag1_se > 0.0 ? std::abs(sim.innovation_lag1) / sim.innovation_lag1_se : 0.0;
  return rep;
}

}  // namespace irlqg
