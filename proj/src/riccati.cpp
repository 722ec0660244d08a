#include "irlqg/riccati.hpp"

#include "irlqg/classifier.hpp"
#include "rk4.hpp"

namespace irlqg {

namespace {

/// Schedule value at a half-index (2k node, 2k+1 midpoint).
Matrix at_half(const MatrixSchedule& sched, int half) {
  return half % 2 == 0 ? sched.at_node(half / 2) : sched.at_mid(half / 2);
}

/// Precomputed per-half-index coefficients; constant schedules collapse to a
/// single entry.
struct HalfSamples {
  std::vector<Matrix> values;
  [[nodiscard]] const Matrix& operator[](int half) const {
    return values.size() == 1 ? values.front() : values[static_cast<std::size_t>(half)];
  }
};

template <class Fn>
HalfSamples sample_halves(int steps, bool constant, Fn&& fn) {
  HalfSamples out;
  const int count = constant ? 1 : 2 * steps + 1;
  out.values.reserve(static_cast<std::size_t>(count));
  for (int half = 0; half < count; ++half) out.values.push_back(fn(half));
  return out;
}

}  // namespace

Matrix riccati_derivative(const Matrix& P, const Matrix& A, const Matrix& Q, const Matrix& S) {
  return -(A.transpose() * P + P * A + Q - P * S * P);
}

RiccatiSolution solve_P(const ProblemSpec& spec, double tol) {
  const TimeGrid& grid = spec.grid;
  const int steps = grid.steps;
  const bool constant = spec.A.is_constant() && spec.B.is_constant() && spec.Q.is_constant() &&
                        spec.R.is_constant();

  RiccatiSolution sol;
  sol.grid = grid;

  const auto A = sample_halves(steps, constant, [&](int j) { return at_half(spec.A, j); });
  const auto Q = sample_halves(steps, constant, [&](int j) { return at_half(spec.Q, j); });
  const auto S = sample_halves(steps, constant, [&](int j) {
    const Matrix B = at_half(spec.B, j);
    return Matrix(B * pinv(at_half(spec.R, j), tol) * B.transpose());
  });

  if (!spec.R.is_constant()) {
    const int r0 = numerical_rank(spec.R.at_node(0), tol);
    for (int k = 1; k < grid.size(); ++k) {
      if (numerical_rank(spec.R.at_node(k), tol) != r0) {
        sol.warnings.push_back("rank of R changes along the grid at node " + std::to_string(k));
        break;
      }
    }
  }

  sol.P = detail::rk4_backward(
      spec.H, steps, grid.step(),
      [&](int half, const Matrix& P) { return riccati_derivative(P, A[half], Q[half], S[half]); },
      detail::symmetric_guard("control Riccati P", kEscapeNorm));
  sol.P.back() = spec.H;
  return sol;
}

P1Solution solve_P1(const ProblemSpec& spec, const DerivedOperators& ops, const Matrix& P1T) {
  const TimeGrid& grid = spec.grid;
  P1Solution sol;
  sol.grid = grid;
  sol.terminal_value = P1T;
  sol.P1 = detail::rk4_backward(
      P1T, grid.steps, grid.step(),
      [&](int half, const Matrix& X) {
        const Matrix& A0 = ops.A0_half(half);
        return Matrix(-(X * A0 + A0.transpose() * X + X * ops.D0_half(half) * X));
      },
      detail::symmetric_guard("irregular Riccati P1", kEscapeNorm));
  sol.P1.back() = P1T;

  sol.coupling_residual_per_node.reserve(sol.P1.size());
  for (std::size_t k = 0; k < sol.P1.size(); ++k) {
    const double r = (ops.C0[k] + ops.B0[k].transpose() * sol.P1[k]).norm();
    sol.coupling_residual_per_node.push_back(r);
    sol.coupling_residual = std::max(sol.coupling_residual, r);
  }
  return sol;
}

FilterCovarianceSolution solve_filter_covariance(const ProblemSpec& spec) {
  const TimeGrid& grid = spec.grid;
  const int steps = grid.steps;
  const bool constant = spec.A.is_constant() && spec.C.is_constant() && spec.D.is_constant() &&
                        spec.G.is_constant();

  const auto A = sample_halves(steps, constant, [&](int j) { return at_half(spec.A, j); });
  const auto DDt = sample_halves(steps, constant, [&](int j) {
    const Matrix D = at_half(spec.D, j);
    return Matrix(D * D.transpose());
  });
  // C' (GG')^{-1} C and C' (GG')^{-1}
  const auto CtW = sample_halves(steps, constant, [&](int j) {
    const Matrix G = at_half(spec.G, j);
    const Matrix C = at_half(spec.C, j);
    return Matrix((G * G.transpose()).ldlt().solve(C).transpose());
  });
  const auto CtWC = sample_halves(steps, constant, [&](int j) {
    return Matrix(CtW[j] * at_half(spec.C, j));
  });

  FilterCovarianceSolution sol;
  sol.grid = grid;
  sol.Phat = detail::rk4_forward(
      spec.sigma0, steps, grid.step(),
      [&](int half, const Matrix& X) {
        return Matrix(A[half] * X + X * A[half].transpose() + DDt[half] - X * CtWC[half] * X);
      },
      detail::symmetric_guard("filter Riccati", kEscapeNorm));
  sol.L.reserve(sol.Phat.size());
  for (int k = 0; k < grid.size(); ++k) {
    sol.L.push_back(sol.Phat[static_cast<std::size_t>(k)] * CtW[2 * k]);
  }
  return sol;
}

TransitionSolution transition_P2(const DerivedOperators& ops, const TimeGrid& grid) {
  TransitionSolution sol;
  sol.grid = grid;
  const auto n = ops.A0.front().rows();
  sol.P2 = detail::rk4_forward(
      Matrix::Identity(n, n), grid.steps, grid.step(),
      [&](int half, const Matrix& X) { return Matrix(X * ops.A0_half(half).transpose()); },
      detail::escape_guard("transition P2", kEscapeNorm));
  return sol;
}

Gramian gramian_G1(const DerivedOperators& ops, const TransitionSolution& P2, const TimeGrid& grid,
                   int last_node) {
  if (last_node < 0) last_node = grid.steps;
  std::vector<Matrix> integrand;
  integrand.reserve(static_cast<std::size_t>(last_node) + 1);
  for (int k = 0; k <= last_node; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Matrix PC = P2.P2[i] * ops.C0[i].transpose();
    integrand.push_back(PC * PC.transpose());
  }
  return Gramian{symmetrize(integrate_samples(std::span<const Matrix>(integrand), grid.step()))};
}

namespace {

template <class T>
T integrate_impl(std::span<const T> v, double h, T zero) {
  const std::size_t intervals = v.empty() ? 0 : v.size() - 1;
  if (intervals == 0) return zero;
  T acc = zero;
  if (intervals % 2 == 0) {
    acc = v.front() + v.back();
    for (std::size_t k = 1; k < intervals; ++k) acc = acc + (k % 2 == 1 ? 4.0 : 2.0) * v[k];
    return (h / 3.0) * acc;
  }
  acc = 0.5 * (v.front() + v.back());
  for (std::size_t k = 1; k < intervals; ++k) acc = acc + v[k];
  return h * acc;
}

}  // namespace

double integrate_samples(std::span<const double> values, double h) {
  return integrate_impl<double>(values, h, 0.0);
}

Matrix integrate_samples(std::span<const Matrix> values, double h) {
  if (values.empty()) return Matrix();
  return integrate_impl<Matrix>(values, h,
                                Matrix::Zero(values.front().rows(), values.front().cols()));
}

}  // namespace irlqg
