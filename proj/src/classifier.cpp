#include "irlqg/classifier.hpp"

#include <sstream>

namespace irlqg {

int RegularityReport::irregular_nodes() const {
  int count = 0;
  for (bool r : regular) count += r ? 0 : 1;
  return count;
}

const Matrix& DerivedOperators::A0_half(int half) const {
  const auto k = static_cast<std::size_t>(half / 2);
  return half % 2 == 0 ? A0[k] : A0_mid[k];
}

const Matrix& DerivedOperators::D0_half(int half) const {
  const auto k = static_cast<std::size_t>(half / 2);
  return half % 2 == 0 ? D0[k] : D0_mid[k];
}

RegularityReport classify(const ProblemSpec& spec, const RiccatiSolution& P, double tol) {
  RegularityReport rep;
  const int N = spec.grid.size();
  rep.regular.resize(static_cast<std::size_t>(N));
  rep.rank_R.resize(static_cast<std::size_t>(N));
  rep.residual.resize(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Matrix& R = spec.R.at_node(k);
    const Matrix BtP = spec.B.at_node(k).transpose() * P.P[i];
    rep.rank_R[i] = numerical_rank(R, tol);
    rep.residual[i] = range_residual(BtP, R, tol);
    rep.regular[i] = range_included(BtP, R, tol);
    rep.worst_residual = std::max(rep.worst_residual, rep.residual[i]);
  }
  return rep;
}

DerivedOperators derive_operators(const ProblemSpec& spec, const RiccatiSolution& P, double tol) {
  const TimeGrid& grid = spec.grid;
  const int N = grid.size();
  const double h = grid.step();
  DerivedOperators ops;
  ops.grid = grid;
  ops.warnings = P.warnings;

  std::vector<int> bad_nodes;
  Matrix prev_null, prev_range;
  for (int k = 0; k < N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Matrix& A = spec.A.at_node(k);
    const Matrix& B = spec.B.at_node(k);
    const Matrix& R = spec.R.at_node(k);
    const Matrix Rp = pinv(R, tol);
    const Matrix S = B * Rp * B.transpose();

    RankFactorization f = rank_factorize_complement(R, tol);
    if (k == 0) {
      ops.m0 = f.m0;
    } else if (f.m0 != ops.m0) {
      bad_nodes.push_back(k);
      continue;
    }
    // Keep the complement bases continuous along the grid.
    const int kc = f.complement();
    Matrix null_basis = f.G0;
    Matrix range_basis = f.T0.topRows(f.m0).transpose();
    if (k > 0) {
      null_basis = align_basis(null_basis, prev_null);
      range_basis = align_basis(range_basis, prev_range);
    }
    prev_null = null_basis;
    prev_range = range_basis;
    f.T0.topRows(f.m0) = range_basis.transpose();
    f.T0.bottomRows(kc) = null_basis.transpose();
    const Matrix Nproj = Matrix::Identity(spec.m, spec.m) - Rp * R;
    f.upsilon = (f.T0 * Nproj).bottomRows(kc);
    // T0 is orthogonal by construction.
    const Matrix T0inv = f.T0.transpose();
    f.G0 = T0inv.rightCols(kc);

    const Matrix BN = B * Nproj * T0inv;
    const Matrix PBN = P.P[i] * BN;
    ops.A0.push_back(A - S * P.P[i]);
    ops.D0.push_back(-S);
    ops.B0.push_back(BN.rightCols(kc));
    ops.C0.push_back(PBN.rightCols(kc).transpose());
    ops.G0.push_back(f.G0);
    ops.B0_star.push_back(BN.leftCols(f.m0));
    ops.C0_star.push_back(PBN.leftCols(f.m0).transpose());
    ops.G0_star.push_back(T0inv.leftCols(f.m0));
    ops.factorization.push_back(std::move(f));
  }
  if (!bad_nodes.empty()) {
    std::ostringstream os;
    os << "rank of R is not constant along the grid (rank " << ops.m0
       << " at node 0); offending nodes:";
    for (std::size_t j = 0; j < bad_nodes.size() && j < 20; ++j) os << ' ' << bad_nodes[j];
    if (bad_nodes.size() > 20) os << " ...";
    throw ProblemError(os.str());
  }

  // Midpoint values; P at the midpoint from cubic Hermite interpolation
  // with slopes taken from the Riccati equation itself.
  ops.A0_mid.reserve(static_cast<std::size_t>(grid.steps));
  ops.D0_mid.reserve(static_cast<std::size_t>(grid.steps));
  auto slope = [&](int k) {
    const Matrix& B = spec.B.at_node(k);
    const Matrix S = B * pinv(spec.R.at_node(k), tol) * B.transpose();
    return riccati_derivative(P.P[static_cast<std::size_t>(k)], spec.A.at_node(k),
                              spec.Q.at_node(k), S);
  };
  Matrix slope_lo = slope(0);
  for (int k = 0; k < grid.steps; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Matrix slope_hi = slope(k + 1);
    const Matrix Pmid = symmetrize(0.5 * (P.P[i] + P.P[i + 1]) + (h / 8.0) * (slope_lo - slope_hi));
    const Matrix Bm = spec.B.at_mid(k);
    const Matrix Sm = Bm * pinv(spec.R.at_mid(k), tol) * Bm.transpose();
    ops.A0_mid.push_back(spec.A.at_mid(k) - Sm * Pmid);
    ops.D0_mid.push_back(-Sm);
    slope_lo = slope_hi;
  }
  return ops;
}

}  // namespace irlqg
