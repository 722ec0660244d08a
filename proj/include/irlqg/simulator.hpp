#pragma once

// Monte Carlo simulation of plant, output, filter and controller.
//
// Trial i draws x0 ~ N(x0_mean, sigma0) and the noise increments from a
// generator seeded by (seed, i) alone. Trials are grouped into fixed blocks
// whose partial sums are merged in block order, so results do not depend on
// the number of worker threads (IRLQG_THREADS caps it).

#include "irlqg/kalman.hpp"
#include "irlqg/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace irlqg {

struct Estimate {
  double value = 0.0;
  double se = 0.0;  // NaN when undefined (fewer than two trials)
};

struct SimConfig {
  int trials = 1000;
  std::uint64_t seed = 0;
  ControlPolicy controller;
  bool record_paths = false;
  std::optional<Matrix> p1_terminal;  // for the terminal-constraint residual
  int threads = 0;                    // 0: IRLQG_THREADS or hardware concurrency
};

struct TrialPath {
  std::vector<Vector> x, xhat, u;
};

struct SimResult {
  int trials = 0;
  std::uint64_t seed = 0;
  TimeGrid grid;

  Vector mean_terminal_state;   // estimate of E[x(T)]
  Vector terminal_state_se;     // per component
  Vector mean_terminal_estimate;  // estimate of E[xhat(T)]
  Estimate modified_cost;         // mean(x(T))' H mean(x(T)) + running cost
  Estimate classic_terminal_cost; // mean of x(T)' H x(T)
  Estimate running_cost;
  double terminal_constraint_residual = 0.0;  // ||P1(T) mean(xhat(T))||

  // Per-node ensemble statistics.
  std::vector<Vector> mean_x, mean_xhat, mean_u;
  std::vector<Vector> error_mean;
  std::vector<Vector> error_mean_se;
  std::vector<Matrix> error_cov;  // sample covariance of x - xhat
  std::vector<double> orthogonality_mean, orthogonality_se;  // xhat'(x - xhat)

  double innovation_lag1 = 0.0;
  double innovation_lag1_se = 0.0;

  std::vector<TrialPath> paths;  // when record_paths
};

/// Throws NumericalError if any trial produces a non-finite state.
[[nodiscard]] SimResult run_monte_carlo(const ProblemSpec& spec,
                                        const FilterCovarianceSolution& filter,
                                        const SimConfig& cfg);

/// Worker count: IRLQG_THREADS when set and positive, else hardware concurrency.
[[nodiscard]] int default_thread_count();

/// The scalar example dx = u dt + dw with x0 = 1 under u = -x0/T, scored with
/// the classic terminal cost E[x(T)^2] and with [E x(T)]^2.
struct DemoReport {
  double T = 1.0;
  int trials = 0;
  std::uint64_t seed = 0;
  Estimate classic;
  Estimate modified;
  Vector mean_terminal_state;

  [[nodiscard]] std::string table() const;
};

[[nodiscard]] DemoReport demo_intro(double T, int trials, std::uint64_t seed, int steps_per_unit = 1000);

}  // namespace irlqg
