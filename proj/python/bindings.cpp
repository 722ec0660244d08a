#include "irlqg/csv.hpp"
#include "irlqg/simulator.hpp"
#include "irlqg/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace irlqg;

namespace {

SynthesisMode parse_mode(const std::string& mode) {
  if (mode == "open") return SynthesisMode::open;
  if (mode == "closed") return SynthesisMode::closed;
  if (mode == "auto") return SynthesisMode::automatic;
  throw py::value_error("mode must be 'open', 'closed' or 'auto'");
}

py::dict synthesis_dict(const Synthesis& syn) {
  py::dict d;
  d["irregular"] = syn.regularity.irregular();
  d["solvable"] = syn.verdict.solvable;
  d["failed_condition"] = syn.verdict.failed_condition;
  d["coupling_residual"] = syn.verdict.coupling_residual;
  d["range_residual"] = syn.verdict.range_residual;
  d["gain_residual"] = syn.verdict.gain_residual;
  d["deterministic_cost"] = syn.deterministic_cost;
  d["optimal_cost"] = syn.optimal_cost;
  d["P"] = syn.P.P;
  d["P1"] = syn.p1.P1;
  d["Phat"] = syn.filter.Phat;
  d["L"] = syn.filter.L;
  d["policy"] = syn.policy ? py::object(py::str(to_string(syn.policy->kind))) : py::none();
  if (syn.open_loop) d["u_open_loop"] = syn.open_loop->u;
  if (syn.closed_loop) {
    d["K"] = syn.closed_loop->K;
    d["gains"] = syn.closed_loop->gains;
    d["guard_node"] = syn.closed_loop->guard_node;
  }
  if (syn.regular) d["F"] = syn.regular->F;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Irregular LQ/LQG output-feedback control toolkit";
  m.attr("__version__") = IRLQG_VERSION;

  py::register_exception<ProblemError>(m, "ProblemError", PyExc_ValueError);
  py::register_exception<MatrixError>(m, "MatrixError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("pinv", &pinv, py::arg("M"), py::arg("tol") = kDefaultRankTol);
  m.def("numerical_rank", &numerical_rank, py::arg("M"), py::arg("tol") = kDefaultRankTol);
  m.def("range_residual", &range_residual, py::arg("X"), py::arg("Y"),
        py::arg("tol") = kDefaultRankTol);

  py::class_<TimeGrid>(m, "TimeGrid")
      .def_readonly("t0", &TimeGrid::t0)
      .def_readonly("T", &TimeGrid::T)
      .def_readonly("steps", &TimeGrid::steps)
      .def("node", &TimeGrid::node)
      .def("nodes", [](const TimeGrid& g) {
        std::vector<double> t;
        for (int k = 0; k < g.size(); ++k) t.push_back(g.node(k));
        return t;
      });

  py::class_<ProblemSpec>(m, "Problem")
      .def_readonly("n", &ProblemSpec::n)
      .def_readonly("m", &ProblemSpec::m)
      .def_readonly("s", &ProblemSpec::s)
      .def_readonly("grid", &ProblemSpec::grid)
      .def_readonly("x0_mean", &ProblemSpec::x0_mean)
      .def("to_json", &dump_problem);

  m.def("parse_problem", &parse_problem, py::arg("json_text"));
  m.def("load_problem", [](const std::string& p) { return load_problem(p); }, py::arg("path"));
  m.def("intro_problem", &intro_problem, py::arg("T") = 1.0, py::arg("steps") = 1000,
        py::arg("x0") = 1.0);

  m.def(
      "classify",
      [](const ProblemSpec& spec, double tol) {
        const auto P = solve_P(spec, tol);
        const auto rep = classify(spec, P, tol);
        py::dict d;
        d["irregular"] = rep.irregular();
        d["irregular_nodes"] = rep.irregular_nodes();
        d["rank_R"] = rep.rank_R;
        d["worst_residual"] = rep.worst_residual;
        return d;
      },
      py::arg("spec"), py::arg("tol") = kDefaultRankTol);

  m.def("solve_P", [](const ProblemSpec& spec) { return solve_P(spec).P; }, py::arg("spec"));
  m.def("solve_filter_covariance",
        [](const ProblemSpec& spec) {
          auto f = solve_filter_covariance(spec);
          return py::make_tuple(f.Phat, f.L);
        },
        py::arg("spec"));

  m.def(
      "synthesize",
      [](const ProblemSpec& spec, const std::string& mode, std::optional<Matrix> p1_terminal) {
        SynthesisOptions opt;
        opt.mode = parse_mode(mode);
        opt.p1_terminal = std::move(p1_terminal);
        Synthesis syn;
        {
          py::gil_scoped_release release;
          syn = synthesize(spec, opt);
        }
        return synthesis_dict(syn);
      },
      py::arg("spec"), py::arg("mode") = "auto", py::arg("p1_terminal") = py::none());

  m.def(
      "simulate",
      [](const ProblemSpec& spec, int trials, std::uint64_t seed, const std::string& controller,
         std::optional<std::vector<Vector>> schedule) {
        SimConfig cfg;
        cfg.trials = trials;
        cfg.seed = seed;
        FilterCovarianceSolution filter;
        if (controller == "custom") {
          filter = solve_filter_covariance(spec);
          cfg.controller = custom_policy(
              schedule ? *schedule
                       : std::vector<Vector>(static_cast<std::size_t>(spec.grid.size()),
                                             Vector::Zero(spec.m)));
        } else {
          SynthesisOptions opt;
          opt.mode = parse_mode(controller);
          Synthesis syn = synthesize(spec, opt);
          if (!syn.verdict.solvable) throw py::value_error("unsolvable: " + syn.verdict.failed_condition);
          filter = std::move(syn.filter);
          cfg.controller = *syn.policy;
          if (syn.regularity.irregular()) cfg.p1_terminal = syn.p1.terminal_value;
        }
        SimResult sim;
        {
          py::gil_scoped_release release;
          sim = run_monte_carlo(spec, filter, cfg);
        }
        py::dict d;
        d["trials"] = sim.trials;
        d["modified_cost"] = py::make_tuple(sim.modified_cost.value, sim.modified_cost.se);
        d["classic_terminal_cost"] =
            py::make_tuple(sim.classic_terminal_cost.value, sim.classic_terminal_cost.se);
        d["running_cost"] = py::make_tuple(sim.running_cost.value, sim.running_cost.se);
        d["mean_terminal_state"] = sim.mean_terminal_state;
        d["terminal_state_se"] = sim.terminal_state_se;
        d["terminal_constraint_residual"] = sim.terminal_constraint_residual;
        d["mean_x"] = sim.mean_x;
        d["mean_u"] = sim.mean_u;
        return d;
      },
      py::arg("spec"), py::arg("trials") = 1000, py::arg("seed") = 0,
      py::arg("controller") = "auto", py::arg("schedule") = py::none());

  m.def(
      "demo_intro",
      [](double T, int trials, std::uint64_t seed) {
        const auto rep = demo_intro(T, trials, seed);
        py::dict d;
        d["classic"] = py::make_tuple(rep.classic.value, rep.classic.se);
        d["modified"] = py::make_tuple(rep.modified.value, rep.modified.se);
        d["table"] = rep.table();
        return d;
      },
      py::arg("T") = 1.0, py::arg("trials") = 10000, py::arg("seed") = 0);
}
