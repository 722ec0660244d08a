#include "irlqg/matrixkit.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace irlqg {

void require_finite(const Matrix& M, std::string_view what) {
  if (!M.allFinite()) {
    throw MatrixError(std::string(what) + ": matrix has non-finite entries");
  }
}

double norm2(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

int numerical_rank(const Matrix& M, double tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  const double cutoff = tol * s(0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++r;
  }
  return r;
}

Matrix pinv(const Matrix& M, double tol) {
  Matrix out = Matrix::Zero(M.cols(), M.rows());
  if (M.size() == 0) return out;
  require_finite(M, "pinv");
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return out;
  const double cutoff = tol * s(0);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      out.noalias() += svd.matrixV().col(i) * (1.0 / s(i)) * svd.matrixU().col(i).transpose();
    }
  }
  return out;
}

double range_residual(const Matrix& X, const Matrix& Y, double tol) {
  if (X.rows() != Y.rows()) {
    throw MatrixError("range_residual: row counts differ");
  }
  if (X.size() == 0) return 0.0;
  const Matrix projected = Y * (pinv(Y, tol) * X);
  return (X - projected).norm();
}

bool range_included(const Matrix& X, const Matrix& Y, double tol) {
  return range_residual(X, Y, tol) <= tol * (1.0 + X.norm());
}

bool is_psd(const Matrix& M, double tol) {
  if (M.rows() != M.cols()) return false;
  if (M.size() == 0) return true;
  const double scale = std::max(1.0, M.norm());
  if ((M - M.transpose()).norm() > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(M), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol * scale;
}

void canonicalize_signs(Matrix& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index imax = 0;
    basis.col(j).cwiseAbs().maxCoeff(&imax);
    if (basis(imax, j) < 0.0) basis.col(j) *= -1.0;
  }
}

Matrix align_basis(const Matrix& basis, const Matrix& reference) {
  if (basis.cols() == 0 || basis.cols() != reference.cols()) return basis;
  // Orthogonal Procrustes: Q = polar factor of basis' * reference.
  const Matrix M = basis.transpose() * reference;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return basis * (svd.matrixU() * svd.matrixV().transpose());
}

RankFactorization rank_factorize_complement(const Matrix& R, double tol) {
  if (R.rows() != R.cols()) {
    throw MatrixError("rank_factorize_complement: R must be square");
  }
  require_finite(R, "R");
  if (!is_psd(R, std::max(tol, 1e-9))) {
    throw MatrixError("rank_factorize_complement: R is not symmetric positive semi-definite");
  }
  const auto m = static_cast<int>(R.rows());
  RankFactorization f;
  f.m0 = numerical_rank(R, tol);
  const int k = m - f.m0;

  const Matrix N = Matrix::Identity(m, m) - pinv(R, tol) * R;
  Matrix Q = Matrix::Identity(m, m);
  if (k > 0 && m > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(N);
    Q = qr.householderQ();
  }
  // First k columns of Q span Range(N) = Null(R); the rest span Range(R).
  Matrix null_basis = Q.leftCols(k);
  Matrix range_basis = Q.rightCols(f.m0);
  canonicalize_signs(null_basis);
  canonicalize_signs(range_basis);

  f.T0.resize(m, m);
  f.T0.topRows(f.m0) = range_basis.transpose();
  f.T0.bottomRows(k) = null_basis.transpose();
  f.upsilon = (f.T0 * N).bottomRows(k);
  f.G0 = null_basis;
  return f;
}

CongruenceDecomposition congruence_diag(const Matrix& P1, double tol) {
  if (P1.rows() != P1.cols()) {
    throw MatrixError("congruence_diag: P1 must be square");
  }
  const auto n = P1.rows();
  CongruenceDecomposition out;
  out.transform = Matrix::Identity(n, n);
  if (n == 0) return out;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(P1));
  const Vector& lambda = eig.eigenvalues();
  const double scale = lambda.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    out.phat_block.resize(0, 0);
    return out;
  }
  std::vector<Eigen::Index> nonzero;
  std::vector<Eigen::Index> zero;
  for (Eigen::Index i = 0; i < n; ++i) {
    (std::abs(lambda(i)) > tol * scale ? nonzero : zero).push_back(i);
  }
  // Eigenvalues come out ascending; put the nonzero ones in descending order
  // so a diagonal input keeps its original column order.
  std::reverse(nonzero.begin(), nonzero.end());
  std::reverse(zero.begin(), zero.end());

  out.rank = static_cast<int>(nonzero.size());
  Eigen::Index col = 0;
  for (auto i : nonzero) out.transform.col(col++) = eig.eigenvectors().col(i);
  for (auto i : zero) out.transform.col(col++) = eig.eigenvectors().col(i);
  canonicalize_signs(out.transform);

  const Matrix congruent = out.transform.transpose() * P1 * out.transform;
  out.phat_block = congruent.topLeftCorner(out.rank, out.rank);
  return out;
}

}  // namespace irlqg
