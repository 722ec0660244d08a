#include "irlqg/matrixkit.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace irlqg;
using namespace irlqg::testing;

namespace {

Matrix diag2(double a, double b) {
  Matrix M = Matrix::Zero(2, 2);
  M(0, 0) = a;
  M(1, 1) = b;
  return M;
}

// Random matrix of prescribed rank.
Matrix random_rank(std::mt19937_64& rng, int r, int c, int rank) {
  return random_matrix(rng, r, rank) * random_matrix(rng, rank, c);
}

}  // namespace

TEST_CASE("pinv of simple matrices") {
  CHECK(pinv(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  CHECK(pinv(Matrix::Zero(2, 2)).isZero(0.0));
  CHECK((pinv(diag2(2, 0)) - diag2(0.5, 0)).norm() < 1e-15);
}

TEST_CASE("pinv rejects non-finite input") {
  Matrix M = Matrix::Identity(2, 2);
  M(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)pinv(M), MatrixError);
}

TEST_CASE("pinv satisfies the Penrose identities on random matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int r = uniform_int(rng, 1, 8), c = uniform_int(rng, 1, 8);
    const int k = uniform_int(rng, 0, std::min(r, c));
    const Matrix M = k == 0 ? Matrix::Zero(r, c) : random_rank(rng, r, c, k);
    const Matrix X = pinv(M);
    const double tol = 1e-8 * (1.0 + M.norm());
    CHECK((M * X * M - M).norm() <= tol);
    CHECK((X * M * X - X).norm() <= tol * (1.0 + X.norm()));
    CHECK((M * X - (M * X).transpose()).norm() <= tol);
    CHECK((X * M - (X * M).transpose()).norm() <= tol);
    // independent oracle: complete orthogonal decomposition
    const Matrix oracle = Eigen::CompleteOrthogonalDecomposition<Matrix>(M).pseudoInverse();
    CHECK((X - oracle).norm() <= 1e-6 * (1.0 + oracle.norm()));
    CHECK(numerical_rank(M) == k);
  }
}

TEST_CASE("range inclusion") {
  std::mt19937_64 rng(5);
  SUBCASE("invertible Y contains everything") {
    CHECK(range_included(random_matrix(rng, 3, 2), random_matrix(rng, 3, 3)));
  }
  SUBCASE("nonzero scalar outside the zero range") {
    CHECK_FALSE(range_included(Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 1)));
  }
  SUBCASE("zero in zero") { CHECK(range_included(Matrix::Zero(2, 1), Matrix::Zero(2, 2))); }
}

TEST_CASE("range inclusion agrees with a least-squares residual oracle") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = uniform_int(rng, 1, 6);
    const int ky = uniform_int(rng, 0, n);
    const Matrix Y = ky == 0 ? Matrix::Zero(n, n) : random_rank(rng, n, n, ky);
    // X either inside Range(Y) or generic
    const bool inside = uniform_int(rng, 0, 1) == 1;
    const int cx = uniform_int(rng, 1, 3);
    const Matrix X = inside ? Matrix(Y * random_matrix(rng, n, cx)) : random_matrix(rng, n, cx);
    // oracle: orthonormal basis of Range(Y) from a QR with column pivoting
    Eigen::ColPivHouseholderQR<Matrix> qr(Y);
    qr.setThreshold(1e-10);
    const Matrix Qfull = qr.householderQ();
    const Matrix basis = Qfull.leftCols(qr.rank());
    const double oracle = (X - basis * (basis.transpose() * X)).norm();
    const bool expected = oracle <= 1e-8 * (1.0 + X.norm());
    CHECK(range_included(X, Y, 1e-8) == expected);
    if (inside) CHECK(expected);
    if (!inside && ky < n) CHECK_FALSE(expected);
  }
}

TEST_CASE("rank factorization of the complement") {
  SUBCASE("R = 0 (scalar)") {
    const auto f = rank_factorize_complement(Matrix::Zero(1, 1));
    CHECK(f.m0 == 0);
    CHECK(std::abs(f.T0(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(f.upsilon(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(f.G0(0, 0)) == doctest::Approx(1.0));
    CHECK(f.T0(0, 0) == 1.0);  // canonical sign
  }
  SUBCASE("R = I") {
    const auto f = rank_factorize_complement(Matrix::Identity(3, 3));
    CHECK(f.m0 == 3);
    CHECK(f.upsilon.rows() == 0);
    CHECK(f.G0.cols() == 0);
  }
  SUBCASE("R = diag(1, 0)") {
    const auto f = rank_factorize_complement(diag2(1, 0));
    CHECK(f.m0 == 1);
    REQUIRE(f.upsilon.rows() == 1);
    CHECK(std::abs(f.upsilon(0, 0)) < 1e-14);
    CHECK(std::abs(f.upsilon(0, 1)) == doctest::Approx(1.0));
    CHECK((f.T0.cwiseAbs() - Matrix::Identity(2, 2)).norm() < 1e-14);
  }
  SUBCASE("indefinite R is rejected") {
    Matrix R(2, 2);
    R << 0, 1, 1, 0;
    CHECK_THROWS_AS((void)rank_factorize_complement(R), MatrixError);
  }
}

TEST_CASE("rank factorization reconstructs I - R^+R on random PSD R") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = uniform_int(rng, 1, 6);
    const int k = uniform_int(rng, 0, m);
    const Matrix R = k == 0 ? Matrix::Zero(m, m) : random_psd(rng, m, k);
    const auto f = rank_factorize_complement(R);
    CHECK(f.m0 == k);
    Matrix stacked = Matrix::Zero(m, m);
    stacked.bottomRows(m - k) = f.upsilon;
    const Matrix N = Matrix::Identity(m, m) - pinv(R) * R;
    CHECK((f.T0.inverse() * stacked - N).norm() <= 1e-8);
    CHECK((f.T0 * f.T0.transpose() - Matrix::Identity(m, m)).norm() <= 1e-10);
    CHECK((R * f.G0).norm() <= 1e-8 * (1.0 + R.norm()));
  }
}

TEST_CASE("congruence diagonalization") {
  SUBCASE("scalar -1") {
    const auto c = congruence_diag(Matrix::Constant(1, 1, -1.0));
    CHECK(c.rank == 1);
    CHECK(c.transform(0, 0) == doctest::Approx(1.0));
    CHECK(c.phat_block(0, 0) == doctest::Approx(-1.0));
  }
  SUBCASE("zero gives the identity") {
    const auto c = congruence_diag(Matrix::Zero(3, 3));
    CHECK(c.rank == 0);
    CHECK(c.transform.isIdentity());
  }
  SUBCASE("diag(2, 0)") {
    const auto c = congruence_diag(diag2(2, 0));
    CHECK(c.rank == 1);
    CHECK((c.transform - Matrix::Identity(2, 2)).norm() < 1e-14);
    CHECK(c.phat_block(0, 0) == doctest::Approx(2.0));
  }
}

TEST_CASE("congruence diagonalization on random symmetric matrices") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = uniform_int(rng, 1, 6);
    const int pos = uniform_int(rng, 0, n);
    const int neg = uniform_int(rng, 0, n - pos);
    Matrix P1 = Matrix::Zero(n, n);
    if (pos > 0) P1 += random_psd(rng, n, pos);
    if (neg > 0) P1 -= random_psd(rng, n, neg);
    const auto c = congruence_diag(P1);
    const int r = c.rank;
    Matrix expected = Matrix::Zero(n, n);
    expected.topLeftCorner(r, r) = c.phat_block;
    const Matrix got = c.transform.transpose() * P1 * c.transform;
    CHECK((got - expected).norm() <= 1e-8 * (1.0 + P1.norm()));
    // oracle rank from singular values
    Eigen::BDCSVD<Matrix> svd(P1);
    const auto& sv = svd.singularValues();
    int oracle = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) oracle += sv(i) > 1e-10 * sv(0) ? 1 : 0;
    CHECK(r == oracle);
    CHECK(r == pos + neg);
  }
}

TEST_CASE("basis alignment and sign canonicalization") {
  std::mt19937_64 rng(41);
  const Matrix Qm = Eigen::HouseholderQR<Matrix>(random_matrix(rng, 4, 4)).householderQ();
  const Matrix ref = Qm.leftCols(2);
  // rotate within the span
  const double a = 0.7;
  Matrix rot(2, 2);
  rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const Matrix rotated = ref * rot;
  CHECK((align_basis(rotated, ref) - ref).norm() < 1e-12);

  Matrix b = -ref;
  canonicalize_signs(b);
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    Eigen::Index i = 0;
    b.col(j).cwiseAbs().maxCoeff(&i);
    CHECK(b(i, j) > 0.0);
  }
}

TEST_CASE("PSD test and symmetrize") {
  CHECK(is_psd(diag2(1, 0)));
  CHECK_FALSE(is_psd(diag2(1, -1e-3)));
  Matrix M(2, 2);
  M << 1, 2, 0, 1;
  CHECK(symmetrize(M)(0, 1) == 1.0);
}
