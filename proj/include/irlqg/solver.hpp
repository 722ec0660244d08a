#pragma once

// Controller synthesis for irregular LQG problems.
//
// Irregular case: P1 solves the companion Riccati flow with a terminal value
// P1(T) chosen so that C0 + B0' P1 = 0 on the whole grid. The optimal control
// is
//   u(t) = -R^+ B' (P + P1) xhat + G0 u1,    t < T
//   u(T) = -R^+ B' H E[x(T)]                 (the free term in Null(R) set to 0)
// where u1 must steer the mean so that P1(T) E[xhat(T)] = 0. Two ways to
// build u1 are provided: an open-loop schedule through the Gramian G1, and a
// closed-loop gain K from the block condition on T1' P1 T1.

#include "irlqg/classifier.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace irlqg {

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double rank = kDefaultRankTol;  // pseudoinverse / rank decisions
  double coupling = 1e-6;              // max ||C0 + B0'P1|| relative to 1 + max ||C0||
  double range = 1e-8;            // Range(P1(t0)) within Range(G1)
  double closed_loop = 1e-6;      // relative residual of the gain equation
  int guard_steps = 10;           // closed-loop gain evaluated on [t0, T - guard_steps*h]
};

/// A control law on the grid: u_k = gains[k] * xhat + feedforward[k].
/// Either vector may be empty (treated as zero). Between hold_from and the
/// final node the control computed at hold_from is reused; at the final node
/// terminal_control, when set, replaces the law.
struct ControlPolicy {
  enum class Kind { open_loop, closed_loop, regular, custom };

  Kind kind = Kind::custom;
  std::vector<Matrix> gains;
  std::vector<Vector> feedforward;
  int hold_from = -1;
  std::optional<Vector> terminal_control;

  [[nodiscard]] bool holds_at(int k, int last_node) const {
    return hold_from >= 0 && k > hold_from && k < last_node;
  }
  /// Control at node k ignoring hold/terminal handling.
  [[nodiscard]] Vector law(int k, const Vector& xhat, int m) const;
};

[[nodiscard]] const char* to_string(ControlPolicy::Kind kind);

/// Deterministic mean path under a policy (forward Euler on the grid, the
/// drift of the Monte Carlo simulator).
struct MeanPath {
  TimeGrid grid;
  std::vector<Vector> xbar;
  std::vector<Vector> u;
};

[[nodiscard]] MeanPath propagate_mean(const ProblemSpec& spec, const ControlPolicy& policy);

[[nodiscard]] double coupling_threshold(const DerivedOperators& ops, const Tolerances& tol);
[[nodiscard]] bool coupling_holds(const P1Solution& p1, const DerivedOperators& ops,
                            const Tolerances& tol);

/// Returns spec.p1_terminal when present; otherwise the minimum-norm symmetric
/// least-squares solution X of C0(T) + B0(T)' X = 0, accepted only if the
/// resulting P1 flow keeps the coupling residual under tolerance on the whole grid.
[[nodiscard]] Matrix resolve_p1_terminal(const ProblemSpec& spec, const DerivedOperators& ops,
                                         const Tolerances& tol = {});

struct OpenLoopSolution {
  bool feasible = false;
  std::vector<Vector> u1;  // (m - m0) per node
  std::vector<Vector> u;   // m per node, along the mean path
  std::vector<Vector> xbar;
  double range_residual = 0.0;
  double terminal_residual = 0.0;  // ||P1(T) xbar(T)||
  double optimal_cost_deterministic = 0.0;
};

[[nodiscard]] OpenLoopSolution solve_open_loop(const ProblemSpec& spec, const RiccatiSolution& P,
                                               const DerivedOperators& ops,
                                               const P1Solution& p1,
                                               const TransitionSolution& p2, const Gramian& g1,
                                               const Tolerances& tol = {});

struct ClosedLoopSolution {
  bool solvable = false;
  std::vector<Matrix> K;      // (m - m0) x n, nodes 0..guard_node
  std::vector<Matrix> gains;  // full m x n feedback -R^+B'(P+P1) + G0 K
  std::vector<int> rank;      // rank of P1 per node
  std::vector<double> residual_per_node;
  double gain_residual = 0.0;  // max relative residual
  int guard_node = 0;
  double epsilon_guard = 0.0;
  Vector terminal_control;
  MeanPath mean;
  double terminal_residual = 0.0;  // ||P1(T) xbar(T)||
};

[[nodiscard]] ClosedLoopSolution solve_closed_loop(const ProblemSpec& spec,
                                                   const RiccatiSolution& P,
                                                   const DerivedOperators& ops,
                                                   const P1Solution& p1,
                                                   const Tolerances& tol = {});

struct RegularSolution {
  std::vector<Matrix> F;  // u = F xhat
};

[[nodiscard]] RegularSolution solve_regular(const ProblemSpec& spec, const RiccatiSolution& P,
                                            double tol = kDefaultRankTol);

struct SolvabilityVerdict {
  bool coupling_holds = false;
  double coupling_residual = 0.0;
  bool open_loop_feasible = false;
  double range_residual = 0.0;
  bool closed_loop_feasible = false;
  double gain_residual = 0.0;
  bool solvable = false;
  std::string failed_condition;  // empty when solvable
};

[[nodiscard]] SolvabilityVerdict check_solvability(const ProblemSpec& spec,
                                                   const RiccatiSolution& P,
                                                   const DerivedOperators& ops,
                                                   const P1Solution& p1,
                                                   const Tolerances& tol = {});

/// x0' (P(t0) + P1(t0)) x0 + int trace(Q Phat) dt. Pass a zero P1 for the
/// regular branch.
[[nodiscard]] double optimal_lqg_cost(const ProblemSpec& spec, const RiccatiSolution& P,
                                      const P1Solution& p1,
                                      const FilterCovarianceSolution& filter);

/// Residuals of the optimality system along a mean path with costate
/// p = (P + P1) xbar.
struct CostateCheck {
  std::vector<double> stationarity;  // ||R u + B' p|| per node
  std::vector<double> costate;       // ||p' + A'p + Q xbar|| per step (trapezoid)
  std::vector<double> state;         // ||xbar' - (A xbar + B u)|| per step
  std::vector<Matrix> q;             // (P + P1) L per node, when a filter is given
  double terminal = 0.0;             // ||p(T) - H xbar(T)||

  [[nodiscard]] static double max_of(const std::vector<double>& v);
  [[nodiscard]] static double rms_of(const std::vector<double>& v);
};

[[nodiscard]] CostateCheck fbde_residuals(const ProblemSpec& spec, const RiccatiSolution& P,
                                          const P1Solution& p1, const MeanPath& path,
                                          const FilterCovarianceSolution* filter = nullptr);

[[nodiscard]] P1Solution zero_p1(const ProblemSpec& spec);

// ---------------------------------------------------------------------------
// End-to-end synthesis

enum class SynthesisMode { open, closed, automatic };

struct SynthesisOptions {
  SynthesisMode mode = SynthesisMode::automatic;
  Tolerances tol;
  std::optional<Matrix> p1_terminal;  // overrides spec.p1_terminal
};

struct Synthesis {
  RiccatiSolution P;
  RegularityReport regularity;
  FilterCovarianceSolution filter;
  std::optional<DerivedOperators> ops;
  P1Solution p1;  // zero for the regular branch
  std::optional<TransitionSolution> p2;
  std::optional<Gramian> g1;
  std::optional<OpenLoopSolution> open_loop;
  std::optional<ClosedLoopSolution> closed_loop;
  std::optional<RegularSolution> regular;
  SolvabilityVerdict verdict;
  std::optional<ControlPolicy> policy;  // set when solvable
  double optimal_cost = 0.0;            // filtered optimum plus estimation-error term
  double deterministic_cost = 0.0;      // x0'(P + P1)(t0) x0
};

/// Runs classification and the matching synthesis branch. Numerical failures
/// propagate as NumericalError; an unsolvable problem is reported through
/// verdict.solvable == false rather than an exception.
[[nodiscard]] Synthesis synthesize(const ProblemSpec& spec, const SynthesisOptions& options = {});

[[nodiscard]] ControlPolicy open_loop_policy(const OpenLoopSolution& sol);
[[nodiscard]] ControlPolicy closed_loop_policy(const ClosedLoopSolution& sol);
[[nodiscard]] ControlPolicy regular_policy(const RegularSolution& sol);
[[nodiscard]] ControlPolicy custom_policy(std::vector<Vector> schedule);

}  // namespace irlqg
