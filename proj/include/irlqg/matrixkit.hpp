#pragma once

// Tolerance-aware dense linear algebra used by every other part of irlqg.
//
// All rank decisions are relative: a singular value (or eigenvalue magnitude)
// counts as zero when it falls below tol * (largest one). Every routine takes
// the tolerance as an argument so callers can tune the regular/irregular
// dichotomy.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace irlqg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-10;

/// Raised when a matrix argument violates a structural precondition
/// (non-square, not symmetric PSD, non-finite entries).
class MatrixError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an integration or simulation produces unusable numbers
/// (finite escape of a Riccati flow, NaN in a simulated path).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws MatrixError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& M, std::string_view what);

[[nodiscard]] inline Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

/// Spectral norm (largest singular value). Zero for empty matrices.
[[nodiscard]] double norm2(const Matrix& M);

/// Numerical rank with singular values below tol * sigma_max treated as zero.
[[nodiscard]] int numerical_rank(const Matrix& M, double tol = kDefaultRankTol);

/// Moore-Penrose pseudoinverse via SVD. The zero matrix maps to the zero
/// matrix of transposed shape.
[[nodiscard]] Matrix pinv(const Matrix& M, double tol = kDefaultRankTol);

/// ||(I - Y Y^+) X||_F, the part of the columns of X outside Range(Y).
[[nodiscard]] double range_residual(const Matrix& X, const Matrix& Y, double tol = kDefaultRankTol);

/// True iff every column of X lies in Range(Y):
/// range_residual(X, Y) <= tol * (1 + ||X||).
[[nodiscard]] bool range_included(const Matrix& X, const Matrix& Y, double tol = kDefaultRankTol);

/// Smallest eigenvalue check for a symmetric matrix, scaled by max(1, ||M||).
[[nodiscard]] bool is_psd(const Matrix& M, double tol = 1e-9);

/// Orthogonal split of the input space of a singular PSD weight R.
///
/// T0 * (I - R^+ R) = [0; upsilon] with the zero block m0 rows tall, where
/// m0 = rank(R). T0 is orthogonal here, so T0^{-1} = T0' and its right block
/// G0 is an orthonormal basis of Null(R).
struct RankFactorization {
  int m0 = 0;
  Matrix T0;
  Matrix upsilon;  // (m - m0) x m, full row rank
  Matrix G0;       // m x (m - m0)

  [[nodiscard]] int complement() const { return static_cast<int>(G0.cols()); }
};

/// Builds T0 from a column-pivoted QR of I - R^+ R. Throws MatrixError if R
/// is not square symmetric PSD within tolerance.
[[nodiscard]] RankFactorization rank_factorize_complement(const Matrix& R,
                                                          double tol = kDefaultRankTol);

/// Orthogonal congruence T' P1 T = blockdiag(P_hat, 0) with P_hat (rank x rank)
/// invertible. Eigenvectors of nonzero eigenvalues come first, in the order
/// returned by the symmetric eigensolver; the zero matrix yields the identity.
struct CongruenceDecomposition {
  Matrix transform;
  Matrix phat_block;
  int rank = 0;
};

[[nodiscard]] CongruenceDecomposition congruence_diag(const Matrix& P1,
                                                      double tol = kDefaultRankTol);

/// Rotates the orthonormal columns of `basis` within their span so that they
/// are as close as possible (Frobenius) to `reference`. Used to keep bases
/// continuous along a time grid.
[[nodiscard]] Matrix align_basis(const Matrix& basis, const Matrix& reference);

/// Flips column signs so the largest-magnitude entry of each column is
/// positive. Makes orthonormal bases deterministic.
void canonicalize_signs(Matrix& basis);

}  // namespace irlqg
