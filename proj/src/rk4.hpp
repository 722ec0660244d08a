#pragma once

// Classical RK4 sweeps over a uniform grid. The right-hand side is sampled by
// half-index: 2k is node k, 2k+1 is the midpoint between nodes k and k+1.

#include "irlqg/matrixkit.hpp"

#include <string>
#include <vector>

namespace irlqg::detail {

template <class Rhs, class Post>
std::vector<Matrix> rk4_backward(const Matrix& terminal, int steps, double h, Rhs&& f,
                                 Post&& post) {
  std::vector<Matrix> out(static_cast<std::size_t>(steps) + 1);
  out.back() = terminal;
  for (int k = steps - 1; k >= 0; --k) {
    const Matrix& X = out[static_cast<std::size_t>(k) + 1];
    const Matrix k1 = f(2 * k + 2, X);
    const Matrix k2 = f(2 * k + 1, X - 0.5 * h * k1);
    const Matrix k3 = f(2 * k + 1, X - 0.5 * h * k2);
    const Matrix k4 = f(2 * k, X - h * k3);
    Matrix next = X - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    post(next, k);
    out[static_cast<std::size_t>(k)] = std::move(next);
  }
  return out;
}

template <class Rhs, class Post>
std::vector<Matrix> rk4_forward(const Matrix& initial, int steps, double h, Rhs&& f, Post&& post) {
  std::vector<Matrix> out(static_cast<std::size_t>(steps) + 1);
  out.front() = initial;
  for (int k = 0; k < steps; ++k) {
    const Matrix& X = out[static_cast<std::size_t>(k)];
    const Matrix k1 = f(2 * k, X);
    const Matrix k2 = f(2 * k + 1, X + 0.5 * h * k1);
    const Matrix k3 = f(2 * k + 1, X + 0.5 * h * k2);
    const Matrix k4 = f(2 * k + 2, X + h * k3);
    Matrix next = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    post(next, k + 1);
    out[static_cast<std::size_t>(k) + 1] = std::move(next);
  }
  return out;
}

/// Symmetrizes in place and raises NumericalError on finite escape.
inline auto symmetric_guard(const char* what, double escape) {
  return [what, escape](Matrix& X, int node) {
    X = symmetrize(X);
    if (!X.allFinite() || X.norm() > escape) {
      throw NumericalError(std::string(what) + ": finite escape near node " +
                           std::to_string(node));
    }
  };
}

inline auto escape_guard(const char* what, double escape) {
  return [what, escape](Matrix& X, int node) {
    if (!X.allFinite() || X.norm() > escape) {
      throw NumericalError(std::string(what) + ": finite escape near node " +
                           std::to_string(node));
    }
  };
}

}  // namespace irlqg::detail
