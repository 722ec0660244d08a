#pragma once

#include "irlqg/problem.hpp"

#include <random>

namespace irlqg::testing {

struct Scalars {
  double A = 0, B = 1, D = 1, C = 1, G = 1, Q = 0, R = 0, H = 1;
  double t0 = 0, T = 1;
  int steps = 1000;
  double x0 = 1, sigma0 = 0;
};

inline Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

inline ProblemSpec scalar_problem(const Scalars& s) {
  ProblemSpec p;
  p.n = p.m = p.s = 1;
  p.A = MatrixSchedule(m1(s.A));
  p.B = MatrixSchedule(m1(s.B));
  p.D = MatrixSchedule(m1(s.D));
  p.C = MatrixSchedule(m1(s.C));
  p.G = MatrixSchedule(m1(s.G));
  p.Q = MatrixSchedule(m1(s.Q));
  p.R = MatrixSchedule(m1(s.R));
  p.H = m1(s.H);
  p.grid = TimeGrid{s.t0, s.T, s.steps};
  p.x0_mean = Vector::Constant(1, s.x0);
  p.sigma0 = m1(s.sigma0);
  return p;
}

inline Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = nd(rng);
  return M;
}

/// Random PSD matrix of the given rank.
inline Matrix random_psd(std::mt19937_64& rng, int n, int rank) {
  const Matrix F = random_matrix(rng, n, rank);
  return F * F.transpose();
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Matrix random_orthogonal(std::mt19937_64& rng, int n) {
  return Eigen::HouseholderQR<Matrix>(random_matrix(rng, n, n)).householderQ();
}

/// Random matrix with singular values drawn from [lo, hi].
inline Matrix random_conditioned(std::mt19937_64& rng, int n, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Vector sv(n);
  for (int i = 0; i < n; ++i) sv(i) = ud(rng);
  return random_orthogonal(rng, n) * sv.asDiagonal() * random_orthogonal(rng, n).transpose();
}

/// Random PSD matrix of the given rank with nonzero eigenvalues in [lo, hi].
inline Matrix random_psd_conditioned(std::mt19937_64& rng, int n, int rank, double lo = 0.5,
                                     double hi = 2.0) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Vector ev = Vector::Zero(n);
  for (int i = 0; i < rank; ++i) ev(i) = ud(rng);
  const Matrix U = random_orthogonal(rng, n);
  return U * ev.asDiagonal() * U.transpose();
}

/// Random constant-coefficient problem with rank(R) = rank_r.
inline ProblemSpec random_problem(std::mt19937_64& rng, int n, int m, int s, int rank_r,
                                  int steps = 100, double T = 1.0) {
  ProblemSpec p;
  p.n = n;
  p.m = m;
  p.s = s;
  p.A = MatrixSchedule(Matrix(0.5 * random_matrix(rng, n, n)));
  p.B = MatrixSchedule(random_matrix(rng, n, m));
  p.D = MatrixSchedule(Matrix(0.5 * random_matrix(rng, n, n)));
  p.C = MatrixSchedule(random_matrix(rng, s, n));
  p.G = MatrixSchedule(random_conditioned(rng, s));
  p.Q = MatrixSchedule(Matrix(0.2 * random_psd(rng, n, n)));
  p.R = MatrixSchedule(random_psd_conditioned(rng, m, rank_r));
  p.H = 0.5 * random_psd(rng, n, n);
  p.grid = TimeGrid{0.0, T, steps};
  p.x0_mean = random_matrix(rng, n, 1);
  p.sigma0 = 0.1 * random_psd(rng, n, n);
  return p;
}

/// Smallest eigenvalue of the symmetric part.
inline double min_eig(const Matrix& M) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (M + M.transpose())).eigenvalues().minCoeff();
}

}  // namespace irlqg::testing
