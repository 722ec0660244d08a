#include "irlqg/solver.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace irlqg;
using namespace irlqg::testing;

namespace {

struct Pipeline {
  ProblemSpec spec;
  RiccatiSolution P;
  DerivedOperators ops;
  P1Solution p1;
  TransitionSolution p2;
  Gramian g1;

  explicit Pipeline(ProblemSpec s, std::optional<Matrix> p1_terminal = std::nullopt)
      : spec(std::move(s)), P(solve_P(spec)), ops(derive_operators(spec, P)) {
    p1 = solve_P1(spec, ops, p1_terminal ? *p1_terminal : resolve_p1_terminal(spec, ops));
    p2 = transition_P2(ops, spec.grid);
    g1 = gramian_G1(ops, p2, spec.grid);
  }
};

Scalars intro(double T = 1.0, double x0 = 1.0, int steps = 1000) {
  Scalars s;
  s.T = T;
  s.x0 = x0;
  s.steps = steps;
  return s;
}

}  // namespace

TEST_CASE("terminal value of P1") {
  const ProblemSpec spec = scalar_problem(intro());
  const auto P = solve_P(spec);
  const auto ops = derive_operators(spec, P);
  CHECK(resolve_p1_terminal(spec, ops)(0, 0) == doctest::Approx(-1.0));

  ProblemSpec given = spec;
  given.p1_terminal = m1(-1.0);
  CHECK(resolve_p1_terminal(given, ops)(0, 0) == -1.0);

  // a candidate that cannot satisfy the coupling on the whole grid
  Scalars s = intro();
  s.A = 1.0;
  s.R = 0.0;
  s.H = 1.0;
  s.Q = 1.0;
  const ProblemSpec hard = scalar_problem(s);
  const auto Ph = solve_P(hard);
  const auto opsh = derive_operators(hard, Ph);
  CHECK_THROWS_AS((void)resolve_p1_terminal(hard, opsh), SolveError);
}

TEST_CASE("solvability verdicts") {
  SUBCASE("P1(T) = -1 is solvable") {
    Pipeline pl(scalar_problem(intro()), m1(-1.0));
    const auto v = check_solvability(pl.spec, pl.P, pl.ops, pl.p1);
    CHECK(v.solvable);
    CHECK(v.coupling_holds);
    CHECK(v.failed_condition.empty());
  }
  SUBCASE("P1(T) = 0 violates the coupling") {
    Pipeline pl(scalar_problem(intro()), m1(0.0));
    const auto v = check_solvability(pl.spec, pl.P, pl.ops, pl.p1);
    CHECK_FALSE(v.solvable);
    CHECK(v.coupling_residual == doctest::Approx(1.0));
    CHECK(v.failed_condition.find("coupling condition") != std::string::npos);
  }
  SUBCASE("C0 = 0 and P1 = 0 is solvable degenerately") {
    Scalars s = intro();
    s.H = 0;
    Pipeline pl(scalar_problem(s), m1(0.0));
    CHECK(check_solvability(pl.spec, pl.P, pl.ops, pl.p1).solvable);
  }
}

TEST_CASE("open-loop synthesis") {
  SUBCASE("T = 1, x0 = 1") {
    Pipeline pl(scalar_problem(intro()));
    const auto ol = solve_open_loop(pl.spec, pl.P, pl.ops, pl.p1, pl.p2, pl.g1);
    CHECK(ol.feasible);
    for (int k = 0; k < pl.spec.grid.steps; ++k) {
      CHECK(ol.u1[static_cast<std::size_t>(k)](0) == doctest::Approx(-1.0).epsilon(1e-12));
      CHECK(ol.u[static_cast<std::size_t>(k)](0) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    CHECK(std::abs(ol.optimal_cost_deterministic) < 1e-12);
    CHECK(std::abs(ol.xbar.back()(0)) < 1e-12);
    CHECK(std::abs(ol.u.back()(0)) < 1e-12);  // terminal branch: -R^+ B'H xbar(T)
  }
  SUBCASE("T = 2, x0 = 3") {
    Pipeline pl(scalar_problem(intro(2.0, 3.0, 500)));
    const auto ol = solve_open_loop(pl.spec, pl.P, pl.ops, pl.p1, pl.p2, pl.g1);
    for (int k = 0; k < pl.spec.grid.steps; k += 25) {
      CHECK(ol.u[static_cast<std::size_t>(k)](0) == doctest::Approx(-1.5).epsilon(1e-12));
    }
  }
  SUBCASE("P1(t0) = 0 reduces to the feedback part") {
    Scalars s = intro();
    s.H = 0;
    Pipeline pl(scalar_problem(s), m1(0.0));
    const auto ol = solve_open_loop(pl.spec, pl.P, pl.ops, pl.p1, pl.p2, pl.g1);
    for (const auto& u1 : ol.u1) CHECK(u1.norm() == 0.0);
  }
}

TEST_CASE("closed-loop synthesis") {
  SUBCASE("scalar example: K = 1/(t - T)") {
    Pipeline pl(scalar_problem(intro()));
    const auto cl = solve_closed_loop(pl.spec, pl.P, pl.ops, pl.p1);
    CHECK(cl.solvable);
    CHECK(cl.guard_node == 990);
    CHECK(cl.epsilon_guard == doctest::Approx(0.01));
    for (int k = 0; k <= cl.guard_node; ++k) {
      const double t = pl.spec.grid.node(k);
      const double expect = 1.0 / (t - 1.0);
      CHECK(std::abs(cl.K[static_cast<std::size_t>(k)](0, 0) - expect) <= 1e-9 * std::abs(expect));
      // full gain: -R^+B'(P + P1) vanishes, G0 = 1
      CHECK(std::abs(cl.gains[static_cast<std::size_t>(k)](0, 0) - expect) <=
            1e-9 * std::abs(expect));
    }
    // the mean path reaches zero after the hold window
    CHECK(cl.mean.xbar[static_cast<std::size_t>(cl.guard_node)](0) ==
          doctest::Approx(cl.epsilon_guard).epsilon(1e-9));
    CHECK(std::abs(cl.mean.xbar.back()(0)) < 1e-12);
    CHECK(cl.terminal_residual < 1e-12);
  }
  SUBCASE("P1 = 0 accepts K = 0") {
    Scalars s = intro();
    s.H = 0;
    Pipeline pl(scalar_problem(s), m1(0.0));
    const auto cl = solve_closed_loop(pl.spec, pl.P, pl.ops, pl.p1);
    CHECK(cl.solvable);
    for (const auto& K : cl.K) CHECK(K.norm() == 0.0);
    CHECK(cl.rank.front() == 0);
  }
  SUBCASE("no input channel in the P1 range leaves a residual") {
    Scalars s = intro();
    s.B = 0;
    Pipeline pl(scalar_problem(s), m1(-1.0));
    const auto cl = solve_closed_loop(pl.spec, pl.P, pl.ops, pl.p1);
    CHECK_FALSE(cl.solvable);
    CHECK(cl.gain_residual > 0.1);
  }
  SUBCASE("guard state decays like epsilon") {
    double x_guard[2];
    int i = 0;
    for (int steps : {1000, 2000}) {
      Pipeline pl(scalar_problem(intro(1.0, 1.0, steps)));
      const auto cl = solve_closed_loop(pl.spec, pl.P, pl.ops, pl.p1);
      x_guard[i++] = cl.mean.xbar[static_cast<std::size_t>(cl.guard_node)](0);
      CHECK(x_guard[i - 1] <= 2.0 * cl.epsilon_guard);
    }
    CHECK(x_guard[0] / x_guard[1] == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("open-loop and closed-loop controls agree along the mean path") {
  Pipeline pl(scalar_problem(intro(1.5, 2.0, 600)));
  const auto ol = solve_open_loop(pl.spec, pl.P, pl.ops, pl.p1, pl.p2, pl.g1);
  const auto cl = solve_closed_loop(pl.spec, pl.P, pl.ops, pl.p1);
  for (int k = 0; k <= cl.guard_node; ++k) {
    const auto i = static_cast<std::size_t>(k);
    CHECK(std::abs(ol.u[i](0) - cl.mean.u[i](0)) < 1e-9);
    CHECK(std::abs(ol.xbar[i](0) - cl.mean.xbar[i](0)) < 1e-9);
  }
}

TEST_CASE("regular branch") {
  SUBCASE("scalar R = 1: F = -1/(1 + T - t)") {
    Scalars s = intro();
    s.R = 1;
    const ProblemSpec spec = scalar_problem(s);
    const auto F = solve_regular(spec, solve_P(spec)).F;
    for (int k = 0; k < spec.grid.size(); k += 100) {
      CHECK(F[static_cast<std::size_t>(k)](0, 0) ==
            doctest::Approx(-1.0 / (2.0 - spec.grid.node(k))).epsilon(1e-9));
    }
  }
  SUBCASE("B = 0 or zero weights give F = 0") {
    Scalars s = intro(1.0, 1.0, 100);
    s.R = 1;
    s.B = 0;
    ProblemSpec spec = scalar_problem(s);
    for (const auto& F : solve_regular(spec, solve_P(spec)).F) CHECK(F.norm() == 0.0);
    s.B = 1;
    s.H = 0;
    spec = scalar_problem(s);
    for (const auto& F : solve_regular(spec, solve_P(spec)).F) CHECK(F.norm() == 0.0);
  }
}

TEST_CASE("optimal LQG cost") {
  SUBCASE("scalar example costs 0") {
    Pipeline pl(scalar_problem(intro()));
    const auto f = solve_filter_covariance(pl.spec);
    CHECK(std::abs(optimal_lqg_cost(pl.spec, pl.P, pl.p1, f)) < 1e-12);
  }
  SUBCASE("Q = 0 leaves only the filtered term") {
    std::mt19937_64 rng(2);
    ProblemSpec spec = random_problem(rng, 3, 2, 2, 2, 50);
    spec.Q = MatrixSchedule(Matrix(Matrix::Zero(3, 3)));
    const auto P = solve_P(spec);
    const auto f = solve_filter_covariance(spec);
    const Vector& x0 = spec.x0_mean;
    CHECK(optimal_lqg_cost(spec, P, zero_p1(spec), f) ==
          doctest::Approx(x0.dot(P.P.front() * x0)).epsilon(1e-14));
  }
  SUBCASE("no noise gives the deterministic cost") {
    std::mt19937_64 rng(3);
    ProblemSpec spec = random_problem(rng, 2, 1, 1, 1, 50);
    spec.D = MatrixSchedule(Matrix(Matrix::Zero(2, 2)));
    spec.sigma0 = Matrix::Zero(2, 2);
    const auto P = solve_P(spec);
    const auto f = solve_filter_covariance(spec);
    const Vector& x0 = spec.x0_mean;
    CHECK(optimal_lqg_cost(spec, P, zero_p1(spec), f) ==
          doctest::Approx(x0.dot(P.P.front() * x0)).epsilon(1e-14));
  }
  SUBCASE("regular scalar: trace term against a quadrature oracle") {
    Scalars s = intro(1.0, 1.0, 1000);
    s.R = 1;
    s.Q = 2;
    const ProblemSpec spec = scalar_problem(s);
    const auto P = solve_P(spec);
    const auto f = solve_filter_covariance(spec);
    // Q Phat with Phat = tanh(t): integral of 2 tanh over [0, 1] is 2 log cosh 1
    const double expect = P.P.front()(0, 0) + 2.0 * std::log(std::cosh(1.0));
    CHECK(optimal_lqg_cost(spec, P, zero_p1(spec), f) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("optimality-system residuals") {
  SUBCASE("scalar example optimum") {
    Pipeline pl(scalar_problem(intro()));
    const auto ol = solve_open_loop(pl.spec, pl.P, pl.ops, pl.p1, pl.p2, pl.g1);
    MeanPath path{pl.spec.grid, ol.xbar, ol.u};
    const auto f = solve_filter_covariance(pl.spec);
    const auto r = fbde_residuals(pl.spec, pl.P, pl.p1, path, &f);
    CHECK(CostateCheck::max_of(r.stationarity) < 1e-12);
    CHECK(CostateCheck::max_of(r.costate) < 1e-12);
    CHECK(CostateCheck::max_of(r.state) < 1e-9);
    CHECK(r.terminal < 1e-12);
    CHECK(r.q.size() == pl.p1.P1.size());
  }
  SUBCASE("a perturbed control breaks stationarity") {
    Pipeline pl(scalar_problem(intro()));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 0.3);
    std::vector<Vector> u;
    for (int k = 0; k <= pl.spec.grid.steps; ++k) u.push_back(Vector::Constant(1, -1.0 + nd(rng)));
    const auto path = propagate_mean(pl.spec, custom_policy(u));
    const auto r = fbde_residuals(pl.spec, pl.P, pl.p1, path);
    CHECK(r.terminal > 1e-3);
  }
  SUBCASE("regular branch") {
    Scalars s = intro();
    s.R = 1;
    s.Q = 1;
    const ProblemSpec spec = scalar_problem(s);
    const auto P = solve_P(spec);
    const auto path = propagate_mean(spec, regular_policy(solve_regular(spec, P)));
    const auto r = fbde_residuals(spec, P, zero_p1(spec), path);
    CHECK(CostateCheck::max_of(r.stationarity) < 1e-12);
    CHECK(CostateCheck::max_of(r.costate) < 5e-3);
    CHECK(r.terminal < 1e-12);
  }
}

TEST_CASE("open-loop perturbations never beat the optimum") {
  Pipeline pl(scalar_problem(intro(1.0, 1.0, 200)));
  const auto ol = solve_open_loop(pl.spec, pl.P, pl.ops, pl.p1, pl.p2, pl.g1);
  const double xT = ol.xbar.back()(0);
  const double optimum = xT * xT;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vector> u = ol.u;
    for (auto& v : u) v(0) += nd(rng);
    const auto path = propagate_mean(pl.spec, custom_policy(u));
    const double m = path.xbar.back()(0);
    CHECK(m * m >= optimum - 1e-12);
  }
}

TEST_CASE("synthesize pipeline") {
  SUBCASE("automatic prefers closed loop") {
    const auto syn = synthesize(scalar_problem(intro()));
    CHECK(syn.verdict.solvable);
    REQUIRE(syn.policy);
    CHECK(syn.policy->kind == ControlPolicy::Kind::closed_loop);
    CHECK(std::abs(syn.deterministic_cost) < 1e-12);
  }
  SUBCASE("explicit zero terminal is unsolvable") {
    SynthesisOptions opt;
    opt.p1_terminal = m1(0.0);
    const auto syn = synthesize(scalar_problem(intro()), opt);
    CHECK_FALSE(syn.verdict.solvable);
    CHECK_FALSE(syn.policy);
  }
  SUBCASE("regular problem") {
    Scalars s = intro();
    s.R = 1;
    const auto syn = synthesize(scalar_problem(s));
    REQUIRE(syn.policy);
    CHECK(syn.policy->kind == ControlPolicy::Kind::regular);
    CHECK(syn.deterministic_cost == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("gains do not depend on output data") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    ProblemSpec a = random_problem(rng, 2, 2, 2, 1, 60, 0.5);
    ProblemSpec b = a;
    b.G = MatrixSchedule(Matrix(a.G.at_node(0) * random_conditioned(rng, 2)));
    b.C = MatrixSchedule(Matrix(2.0 * a.C.at_node(0)));
    b.sigma0 = 2.0 * a.sigma0;
    const auto sa = synthesize(a);
    const auto sb = synthesize(b);
    for (std::size_t k = 0; k < sa.P.P.size(); ++k) {
      CHECK(sa.P.P[k] == sb.P.P[k]);
      CHECK(sa.p1.P1[k] == sb.p1.P1[k]);
    }
    CHECK(sa.filter.L.front() != sb.filter.L.front());
  }
}
