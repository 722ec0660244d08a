#pragma once

// Fixed-step RK4 integration of the matrix ODEs on the problem grid:
//   control Riccati      0 = P' + A'P + PA + Q - P B R^+ B' P,      P(T) = H
//   irregular companion  0 = P1' + P1 A0 + A0' P1 + P1 D0 P1,       P1(T) given
//   filter covariance    Phat' = A Phat + Phat A' + DD' - Phat C'(GG')^{-1} C Phat
//   transition           d/ds P2(t0,s) = P2(t0,s) A0'(s),           P2(t0,t0) = I
// Symmetric flows are symmetrized after every step. A flow whose norm
// exceeds kEscapeNorm raises NumericalError ("finite escape").

#include "irlqg/problem.hpp"

#include <span>
#include <string>
#include <vector>

namespace irlqg {

struct DerivedOperators;

inline constexpr double kEscapeNorm = 1e12;

struct RiccatiSolution {
  TimeGrid grid;
  std::vector<Matrix> P;  // one per node; P.back() == H
  std::vector<std::string> warnings;
};

struct P1Solution {
  TimeGrid grid;
  std::vector<Matrix> P1;
  Matrix terminal_value;
  std::vector<double> coupling_residual_per_node;  // ||C0 + B0' P1||_F
  double coupling_residual = 0.0;                  // max over the grid
};

struct FilterCovarianceSolution {
  TimeGrid grid;
  std::vector<Matrix> Phat;  // error covariance per node
  std::vector<Matrix> L;     // Kalman gain Phat C' (GG')^{-1} per node
};

struct TransitionSolution {
  TimeGrid grid;
  std::vector<Matrix> P2;  // P2(t0, s_k)
};

struct Gramian {
  Matrix G1;
};

/// Right-hand side P' of the control Riccati equation, given S = B R^+ B'.
[[nodiscard]] Matrix riccati_derivative(const Matrix& P, const Matrix& A, const Matrix& Q,
                                        const Matrix& S);

[[nodiscard]] RiccatiSolution solve_P(const ProblemSpec& spec, double tol = kDefaultRankTol);

[[nodiscard]] P1Solution solve_P1(const ProblemSpec& spec, const DerivedOperators& ops,
                                  const Matrix& P1T);

[[nodiscard]] FilterCovarianceSolution solve_filter_covariance(const ProblemSpec& spec);

[[nodiscard]] TransitionSolution transition_P2(const DerivedOperators& ops, const TimeGrid& grid);

/// G1[t0, t_last] = int P2 C0' C0 P2' ds over nodes 0..last_node
/// (defaults to the full horizon).
[[nodiscard]] Gramian gramian_G1(const DerivedOperators& ops, const TransitionSolution& P2,
                                 const TimeGrid& grid, int last_node = -1);

/// Composite Simpson over equally spaced samples when the interval count is
/// even, composite trapezoid otherwise.
[[nodiscard]] double integrate_samples(std::span<const double> values, double h);
[[nodiscard]] Matrix integrate_samples(std::span<const Matrix> values, double h);

}  // namespace irlqg
