#include "irlqg/solver.hpp"

#include <cmath>
#include <sstream>

namespace irlqg {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Matrix feedback_part(const ProblemSpec& spec, int k, const Matrix& PplusP1, double tol) {
  const Matrix& B = spec.B.at_node(k);
  return -pinv(spec.R.at_node(k), tol) * B.transpose() * PplusP1;
}

}  // namespace

// ---------------------------------------------------------------------------
// policies and mean paths

Vector ControlPolicy::law(int k, const Vector& xhat, int m) const {
  Vector u = Vector::Zero(m);
  const auto i = static_cast<std::size_t>(k);
  if (i < gains.size()) u.noalias() += gains[i] * xhat;
  if (i < feedforward.size()) u += feedforward[i];
  return u;
}

const char* to_string(ControlPolicy::Kind kind) {
  switch (kind) {
    case ControlPolicy::Kind::open_loop: return "open_loop";
    case ControlPolicy::Kind::closed_loop: return "closed_loop";
    case ControlPolicy::Kind::regular: return "regular";
    case ControlPolicy::Kind::custom: return "custom";
  }
  return "custom";
}

MeanPath propagate_mean(const ProblemSpec& spec, const ControlPolicy& policy) {
  const TimeGrid& grid = spec.grid;
  const int N = grid.steps;
  const double h = grid.step();
  MeanPath path;
  path.grid = grid;
  path.xbar.reserve(static_cast<std::size_t>(N) + 1);
  path.u.reserve(static_cast<std::size_t>(N) + 1);
  Vector x = spec.x0_mean;
  Vector held;
  for (int k = 0; k <= N; ++k) {
    Vector u;
    if (k == N && policy.terminal_control) {
      u = *policy.terminal_control;
    } else if (policy.holds_at(k, N)) {
      u = held;
    } else {
      u = policy.law(k, x, spec.m);
      if (k == policy.hold_from) held = u;
    }
    path.xbar.push_back(x);
    path.u.push_back(u);
    if (k < N) x = x + h * (spec.A.at_node(k) * x + spec.B.at_node(k) * u);
  }
  return path;
}

ControlPolicy open_loop_policy(const OpenLoopSolution& sol) {
  ControlPolicy p;
  p.kind = ControlPolicy::Kind::open_loop;
  p.feedforward = sol.u;
  return p;
}

ControlPolicy closed_loop_policy(const ClosedLoopSolution& sol) {
  ControlPolicy p;
  p.kind = ControlPolicy::Kind::closed_loop;
  p.gains = sol.gains;
  p.hold_from = sol.guard_node;
  p.terminal_control = sol.terminal_control;
  return p;
}

ControlPolicy regular_policy(const RegularSolution& sol) {
  ControlPolicy p;
  p.kind = ControlPolicy::Kind::regular;
  p.gains = sol.F;
  return p;
}

ControlPolicy custom_policy(std::vector<Vector> schedule) {
  ControlPolicy p;
  p.kind = ControlPolicy::Kind::custom;
  p.feedforward = std::move(schedule);
  return p;
}

// ---------------------------------------------------------------------------
// terminal value of P1

double coupling_threshold(const DerivedOperators& ops, const Tolerances& tol) {
  double c0 = 0.0;
  for (const auto& C : ops.C0) c0 = std::max(c0, C.norm());
  return tol.coupling * (1.0 + c0);
}

bool coupling_holds(const P1Solution& p1, const DerivedOperators& ops, const Tolerances& tol) {
  return p1.coupling_residual <= coupling_threshold(ops, tol);
}

Matrix resolve_p1_terminal(const ProblemSpec& spec, const DerivedOperators& ops,
                           const Tolerances& tol) {
  if (spec.p1_terminal) return *spec.p1_terminal;

  const auto n = spec.n;
  const Matrix& C0 = ops.C0.back();
  const Matrix B0t = ops.B0.back().transpose();
  const auto rows = C0.rows();
  // Unknowns: upper triangle of the symmetric X; equations: vec(C0 + B0' X) = 0.
  const Eigen::Index unknowns = n * (n + 1) / 2;
  Matrix M(rows * n, unknowns);
  Eigen::Index col = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      Matrix E = Matrix::Zero(n, n);
      E(a, b) = 1.0;
      E(b, a) = 1.0;
      const Matrix image = B0t * E;
      M.col(col++) = Eigen::Map<const Vector>(image.data(), image.size());
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(C0.data(), C0.size());
  Vector coeffs = Vector::Zero(unknowns);
  if (M.size() > 0) coeffs = Eigen::CompleteOrthogonalDecomposition<Matrix>(M).solve(rhs);

  Matrix X = Matrix::Zero(n, n);
  col = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      X(a, b) = coeffs(col);
      X(b, a) = coeffs(col);
      ++col;
    }
  }

  const P1Solution trial = solve_P1(spec, ops, X);
  if (!coupling_holds(trial, ops, tol)) {
    throw SolveError("P1 terminal value not found (least-squares candidate leaves residual " +
                     fmt_double(trial.coupling_residual) + "); supply p1_terminal");
  }
  return X;
}

// ---------------------------------------------------------------------------
// open loop

OpenLoopSolution solve_open_loop(const ProblemSpec& spec, const RiccatiSolution& P,
                                 const DerivedOperators& ops, const P1Solution& p1,
                                 const TransitionSolution& p2, const Gramian& g1,
                                 const Tolerances& tol) {
  const TimeGrid& grid = spec.grid;
  const int N = grid.steps;
  OpenLoopSolution sol;
  const Matrix& P1_0 = p1.P1.front();
  const Vector& x0 = spec.x0_mean;

  sol.range_residual = range_residual(P1_0, g1.G1, tol.range);
  sol.feasible = range_included(P1_0, g1.G1, tol.range);

  const Vector steer = pinv(g1.G1, tol.range) * (P1_0 * x0);
  sol.u1.reserve(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    sol.u1.push_back(ops.C0[i] * p2.P2[i].transpose() * steer);
  }

  ControlPolicy law;
  law.kind = ControlPolicy::Kind::open_loop;
  law.gains.reserve(static_cast<std::size_t>(N) + 1);
  law.feedforward.reserve(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    law.gains.push_back(feedback_part(spec, k, P.P[i] + p1.P1[i], tol.rank));
    law.feedforward.push_back(ops.G0[i] * sol.u1[i]);
  }
  MeanPath mean = propagate_mean(spec, law);
  // Deterministic control at t = T.
  mean.u.back() = feedback_part(spec, N, spec.H, tol.rank) * mean.xbar.back();

  sol.u = std::move(mean.u);
  sol.xbar = std::move(mean.xbar);
  sol.terminal_residual = (p1.P1.back() * sol.xbar.back()).norm();
  sol.optimal_cost_deterministic = x0.dot((P.P.front() + P1_0) * x0);
  return sol;
}

// ---------------------------------------------------------------------------
// closed loop

ClosedLoopSolution solve_closed_loop(const ProblemSpec& spec, const RiccatiSolution& P,
                                     const DerivedOperators& ops, const P1Solution& p1,
                                     const Tolerances& tol) {
  const TimeGrid& grid = spec.grid;
  const int N = grid.steps;
  const double h = grid.step();
  const auto n = spec.n;
  const int width = ops.complement();

  ClosedLoopSolution sol;
  sol.guard_node = std::max(0, N - std::max(1, tol.guard_steps));
  sol.epsilon_guard = grid.T - grid.node(sol.guard_node);

  // Orthogonal congruence frames, kept continuous in time by aligning each
  // block (range and null space of P1) to the previous node.
  const int last_frame = std::min(N, sol.guard_node + 1);
  std::vector<Matrix> frame(static_cast<std::size_t>(last_frame) + 1);
  std::vector<int> rank(static_cast<std::size_t>(last_frame) + 1);
  for (int k = 0; k <= last_frame; ++k) {
    const auto i = static_cast<std::size_t>(k);
    auto cd = congruence_diag(p1.P1[i], tol.rank);
    rank[i] = cd.rank;
    if (k > 0 && rank[i - 1] == cd.rank) {
      const int r = cd.rank;
      const Matrix& prev = frame[i - 1];
      cd.transform.leftCols(r) = align_basis(cd.transform.leftCols(r), prev.leftCols(r));
      cd.transform.rightCols(n - r) =
          align_basis(cd.transform.rightCols(n - r), prev.rightCols(n - r));
    }
    frame[i] = std::move(cd.transform);
  }
  auto frame_rate = [&](int k) -> Matrix {
    // d/dt of the frame, by differences over neighbours sharing its rank.
    const auto i = static_cast<std::size_t>(k);
    const bool lo = k > 0 && rank[i - 1] == rank[i];
    const bool hi = k < last_frame && rank[i + 1] == rank[i];
    if (lo && hi) return (frame[i + 1] - frame[i - 1]) / (2.0 * h);
    if (hi) return (frame[i + 1] - frame[i]) / h;
    if (lo) return (frame[i] - frame[i - 1]) / h;
    return Matrix::Zero(n, n);
  };

  sol.K.reserve(static_cast<std::size_t>(sol.guard_node) + 1);
  for (int k = 0; k <= sol.guard_node; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const int r = rank[i];
    Matrix K = Matrix::Zero(width, n);
    double residual = 0.0;
    if (r > 0) {
      const Matrix& T1 = frame[i];
      const Matrix T1t = T1.transpose();
      const Matrix rate = (frame_rate(k).transpose() * T1).topRows(r);
      const Matrix drift = (T1t * (ops.A0[i] + ops.D0[i] * p1.P1[i]) * T1).topRows(r);
      const Matrix B1 = (T1t * ops.B0[i]).topRows(r);
      Matrix target = Matrix::Zero(r, n);
      target.leftCols(r) = Matrix::Identity(r, r) / (grid.node(k) - grid.T);
      const Matrix rhs = target - rate - drift;
      K = pinv(B1, tol.rank) * rhs * T1t;
      residual = (B1 * K * T1 - rhs).norm() / (1.0 + rhs.norm());
    }
    sol.rank.push_back(r);
    sol.residual_per_node.push_back(residual);
    sol.gain_residual = std::max(sol.gain_residual, residual);
    sol.gains.push_back(feedback_part(spec, k, P.P[i] + p1.P1[i], tol.rank) + ops.G0[i] * K);
    sol.K.push_back(std::move(K));
  }
  sol.solvable = sol.gain_residual <= tol.closed_loop;

  ControlPolicy law = closed_loop_policy(sol);
  law.terminal_control.reset();
  sol.mean = propagate_mean(spec, law);
  sol.terminal_control = feedback_part(spec, N, spec.H, tol.rank) * sol.mean.xbar.back();
  sol.mean.u.back() = sol.terminal_control;
  sol.terminal_residual = (p1.P1.back() * sol.mean.xbar.back()).norm();
  return sol;
}

// ---------------------------------------------------------------------------
// regular branch, verdicts, costs

RegularSolution solve_regular(const ProblemSpec& spec, const RiccatiSolution& P, double tol) {
  RegularSolution sol;
  sol.F.reserve(P.P.size());
  for (int k = 0; k < spec.grid.size(); ++k) {
    sol.F.push_back(feedback_part(spec, k, P.P[static_cast<std::size_t>(k)], tol));
  }
  return sol;
}

SolvabilityVerdict check_solvability(const ProblemSpec& spec, const RiccatiSolution& P,
                                     const DerivedOperators& ops, const P1Solution& p1,
                                     const Tolerances& tol) {
  SolvabilityVerdict v;
  v.coupling_residual = p1.coupling_residual;
  v.coupling_holds = coupling_holds(p1, ops, tol);
  if (!v.coupling_holds) {
    v.failed_condition = "coupling condition C0 + B0'P1 = 0 violated (max residual " +
                         fmt_double(p1.coupling_residual) + ")";
    return v;
  }
  const auto p2 = transition_P2(ops, spec.grid);
  const auto g1 = gramian_G1(ops, p2, spec.grid);
  v.range_residual = range_residual(p1.P1.front(), g1.G1, tol.range);
  v.open_loop_feasible = range_included(p1.P1.front(), g1.G1, tol.range);
  const auto closed = solve_closed_loop(spec, P, ops, p1, tol);
  v.gain_residual = closed.gain_residual;
  v.closed_loop_feasible = closed.solvable;
  v.solvable = v.open_loop_feasible || v.closed_loop_feasible;
  if (!v.solvable) {
    v.failed_condition =
        "terminal constraint P1(T) E[x(T)] = 0 unreachable: Range(P1(t0)) not within Range(G1) "
        "(residual " + fmt_double(v.range_residual) + ") and closed-loop gain equation residual " +
        fmt_double(v.gain_residual);
  }
  return v;
}

double optimal_lqg_cost(const ProblemSpec& spec, const RiccatiSolution& P, const P1Solution& p1,
                        const FilterCovarianceSolution& filter) {
  const Vector& x0 = spec.x0_mean;
  const double filtered = x0.dot((P.P.front() + p1.P1.front()) * x0);
  std::vector<double> trace_terms;
  trace_terms.reserve(filter.Phat.size());
  for (int k = 0; k < spec.grid.size(); ++k) {
    trace_terms.push_back((spec.Q.at_node(k) * filter.Phat[static_cast<std::size_t>(k)]).trace());
  }
  return filtered + integrate_samples(std::span<const double>(trace_terms), spec.grid.step());
}

P1Solution zero_p1(const ProblemSpec& spec) {
  P1Solution sol;
  sol.grid = spec.grid;
  sol.terminal_value = Matrix::Zero(spec.n, spec.n);
  sol.P1.assign(static_cast<std::size_t>(spec.grid.size()), sol.terminal_value);
  sol.coupling_residual_per_node.assign(sol.P1.size(), 0.0);
  return sol;
}

double CostateCheck::max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

double CostateCheck::rms_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

CostateCheck fbde_residuals(const ProblemSpec& spec, const RiccatiSolution& P, const P1Solution& p1,
                            const MeanPath& path, const FilterCovarianceSolution* filter) {
  const int N = spec.grid.steps;
  const double h = spec.grid.step();
  CostateCheck out;
  std::vector<Vector> p;
  p.reserve(path.xbar.size());
  for (int k = 0; k <= N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    p.push_back((P.P[i] + p1.P1[i]) * path.xbar[i]);
    if (filter) out.q.push_back((P.P[i] + p1.P1[i]) * filter->L[i]);
  }
  for (int k = 0; k <= N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    // At t = T the costate is p(T) = H E[x(T)].
    const Vector pk = k == N ? Vector(spec.H * path.xbar[i]) : p[i];
    out.stationarity.push_back(
        (spec.R.at_node(k) * path.u[i] + spec.B.at_node(k).transpose() * pk).norm());
  }
  auto costate_drift = [&](int k) {
    const auto i = static_cast<std::size_t>(k);
    return Vector(spec.A.at_node(k).transpose() * p[i] + spec.Q.at_node(k) * path.xbar[i]);
  };
  for (int k = 0; k < N; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Vector dp = (p[i + 1] - p[i]) / h;
    out.costate.push_back((dp + 0.5 * (costate_drift(k) + costate_drift(k + 1))).norm());
    const Vector dx = (path.xbar[i + 1] - path.xbar[i]) / h;
    out.state.push_back(
        (dx - spec.A.at_node(k) * path.xbar[i] - spec.B.at_node(k) * path.u[i]).norm());
  }
  out.terminal = (p.back() - spec.H * path.xbar.back()).norm();
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

Synthesis synthesize(const ProblemSpec& spec, const SynthesisOptions& options) {
  const Tolerances& tol = options.tol;
  Synthesis out;
  out.P = solve_P(spec, tol.rank);
  out.regularity = classify(spec, out.P, tol.rank);
  out.filter = solve_filter_covariance(spec);
  out.p1 = zero_p1(spec);

  if (!out.regularity.irregular()) {
    out.regular = solve_regular(spec, out.P, tol.rank);
    out.verdict.coupling_holds = true;
    out.verdict.open_loop_feasible = true;
    out.verdict.closed_loop_feasible = true;
    out.verdict.solvable = true;
    out.policy = regular_policy(*out.regular);
  } else {
    out.ops = derive_operators(spec, out.P, tol.rank);
    const auto& ops = *out.ops;
    Matrix terminal;
    if (options.p1_terminal) {
      terminal = *options.p1_terminal;
    } else {
      try {
        terminal = resolve_p1_terminal(spec, ops, tol);
      } catch (const SolveError& e) {
        out.verdict.failed_condition = e.what();
        return out;
      }
    }
    out.p1 = solve_P1(spec, ops, terminal);
    auto& v = out.verdict;
    v.coupling_residual = out.p1.coupling_residual;
    v.coupling_holds = coupling_holds(out.p1, ops, tol);
    if (!v.coupling_holds) {
      v.failed_condition = "coupling condition C0 + B0'P1 = 0 violated (max residual " +
                           fmt_double(out.p1.coupling_residual) + ")";
      return out;
    }
    out.p2 = transition_P2(ops, spec.grid);
    out.g1 = gramian_G1(ops, *out.p2, spec.grid);
    out.open_loop = solve_open_loop(spec, out.P, ops, out.p1, *out.p2, *out.g1, tol);
    out.closed_loop = solve_closed_loop(spec, out.P, ops, out.p1, tol);
    v.range_residual = out.open_loop->range_residual;
    v.open_loop_feasible = out.open_loop->feasible;
    v.gain_residual = out.closed_loop->gain_residual;
    v.closed_loop_feasible = out.closed_loop->solvable;

    const bool want_open = options.mode == SynthesisMode::open;
    const bool want_closed = options.mode == SynthesisMode::closed;
    if (want_open) {
      v.solvable = v.open_loop_feasible;
      if (!v.solvable) {
        v.failed_condition = "open-loop range condition Range(P1(t0)) within Range(G1) fails "
                             "(residual " + fmt_double(v.range_residual) + ")";
      }
    } else if (want_closed) {
      v.solvable = v.closed_loop_feasible;
      if (!v.solvable) {
        v.failed_condition =
            "closed-loop gain equation not satisfiable with least-squares K (residual " +
            fmt_double(v.gain_residual) + ")";
      }
    } else {
      v.solvable = v.open_loop_feasible || v.closed_loop_feasible;
      if (!v.solvable) {
        v.failed_condition = "terminal constraint P1(T) E[x(T)] = 0 unreachable (range residual " +
                             fmt_double(v.range_residual) + ", gain residual " +
                             fmt_double(v.gain_residual) + ")";
      }
    }
    if (v.solvable) {
      if (want_open || (!want_closed && !v.closed_loop_feasible)) {
        out.policy = open_loop_policy(*out.open_loop);
      } else {
        out.policy = closed_loop_policy(*out.closed_loop);
      }
    }
  }

  const Vector& x0 = spec.x0_mean;
  out.deterministic_cost = x0.dot((out.P.P.front() + out.p1.P1.front()) * x0);
  out.optimal_cost = optimal_lqg_cost(spec, out.P, out.p1, out.filter);
  return out;
}

}  // namespace irlqg
