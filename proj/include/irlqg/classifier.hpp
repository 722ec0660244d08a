#pragma once

// Regular/irregular classification and the derived operator family used by
// the irregular synthesis:
//   A0 = A - B R^+ B' P            D0 = -B R^+ B'
//   [* C0'] = P B (I - R^+ R) T0^{-1}
//   [* B0 ] =   B (I - R^+ R) T0^{-1}
//   [* G0 ] =                 T0^{-1}
// where T0 comes from rank_factorize_complement(R).

#include "irlqg/riccati.hpp"

#include <vector>

namespace irlqg {

struct RegularityReport {
  std::vector<bool> regular;     // per node: Range(B'P) within Range(R)
  std::vector<int> rank_R;       // per node
  std::vector<double> residual;  // ||(I - R R^+) B'P||_F per node
  double worst_residual = 0.0;

  [[nodiscard]] int irregular_nodes() const;
  /// Horizon-wide verdict: irregular if any node is irregular.
  [[nodiscard]] bool irregular() const { return irregular_nodes() > 0; }
};

struct DerivedOperators {
  TimeGrid grid;
  int m0 = 0;  // rank of R
  std::vector<Matrix> A0, D0, C0, B0, G0;  // per node
  std::vector<Matrix> A0_mid, D0_mid;      // per step, at the midpoint
  std::vector<RankFactorization> factorization;
  // Left ("*") blocks of the column splits; unused by the synthesis.
  std::vector<Matrix> C0_star, B0_star, G0_star;
  std::vector<std::string> warnings;

  /// Width m - m0 of C0', B0 and G0.
  [[nodiscard]] int complement() const {
    return G0.empty() ? 0 : static_cast<int>(G0.front().cols());
  }
  /// A0 / D0 at half-index 2k (node) or 2k+1 (midpoint).
  [[nodiscard]] const Matrix& A0_half(int half) const;
  [[nodiscard]] const Matrix& D0_half(int half) const;
};

[[nodiscard]] RegularityReport classify(const ProblemSpec& spec, const RiccatiSolution& P,
                                        double tol = kDefaultRankTol);

/// Throws ProblemError listing the offending nodes if rank(R) is not constant
/// along the grid.
[[nodiscard]] DerivedOperators derive_operators(const ProblemSpec& spec,
                                                const RiccatiSolution& P,
                                                double tol = kDefaultRankTol);

}  // namespace irlqg
