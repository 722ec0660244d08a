// irlqg: classify, solve and simulate irregular LQG problems.
//
// Exit codes: 0 success, 1 unsolvable, 2 input error, 3 numerical failure.

#include "irlqg/csv.hpp"
#include "irlqg/simulator.hpp"
#include "irlqg/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace irlqg;

namespace {

enum Exit { kOk = 0, kUnsolvable = 1, kInputError = 2, kNumericalFailure = 3 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string join_nodes(const std::vector<bool>& regular) {
  std::ostringstream os;
  int shown = 0, total = 0;
  for (std::size_t k = 0; k < regular.size(); ++k) {
    if (regular[k]) continue;
    ++total;
    if (shown < 8) os << (shown++ ? "," : "") << k;
  }
  if (total > shown) os << ",...";
  return os.str();
}

Matrix parse_matrix_literal(const std::string& text, int n) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError("--p1-terminal: not a JSON value: " + std::string(e.what()));
  }
  if (j.is_number()) return j.get<double>() * Matrix::Identity(n, n);
  if (!j.is_array() || j.size() != static_cast<std::size_t>(n)) {
    throw InputError("--p1-terminal: expected a number or an " + std::to_string(n) + "x" +
                     std::to_string(n) + " nested array");
  }
  Matrix M(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(n)) {
      throw InputError("--p1-terminal: row " + std::to_string(i) + " has the wrong length");
    }
    for (int c = 0; c < n; ++c) M(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) r.push_back(M(i, c));
    rows.push_back(r);
  }
  return rows;
}

class OutputSet {
 public:
  OutputSet(std::string command, std::string input, std::string dir)
      : dir_(std::move(dir)) {
    manifest_["command"] = std::move(command);
    manifest_["input"] = std::move(input);
    manifest_["version"] = IRLQG_VERSION;
    manifest_["outputs"] = json::array();
  }
  [[nodiscard]] bool enabled() const { return !dir_.empty(); }
  json& manifest() { return manifest_; }

  void add(const std::string& name, const std::string& content) {
    if (!enabled()) return;
    fs::create_directories(dir_);
    const auto path = (fs::path(dir_) / name).string();
    write_file(path, content);
    manifest_["outputs"].push_back(path);
  }
  void finish() {
    if (!enabled()) return;
    fs::create_directories(dir_);
    write_file((fs::path(dir_) / "manifest.json").string(), manifest_.dump(2) + "\n");
  }

 private:
  std::string dir_;
  json manifest_;
};

void grid_json(json& j, const TimeGrid& g) {
  j["grid"] = {{"t0", g.t0}, {"T", g.T}, {"steps", g.steps}};
}

json tolerances_json(const Tolerances& t) {
  return {{"rank", t.rank},
          {"coupling", t.coupling},
          {"range", t.range},
          {"closed_loop", t.closed_loop},
          {"guard_steps", t.guard_steps}};
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const ProblemError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const MatrixError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
}

ProblemSpec load_or_throw(const std::string& path) {
  if (!fs::exists(path)) throw ProblemError("no such file: " + path);
  return load_problem(path);
}

// ---------------------------------------------------------------------------

int cmd_classify(const std::string& path, double tol) {
  const ProblemSpec spec = load_or_throw(path);
  const auto P = solve_P(spec, tol);
  const auto rep = classify(spec, P, tol);
  const int bad = rep.irregular_nodes();
  const int nodes = static_cast<int>(rep.regular.size());
  if (bad == 0) {
    std::cout << "REGULAR\n";
  } else if (bad == nodes) {
    std::cout << "IRREGULAR (all nodes)\n";
  } else {
    std::cout << "IRREGULAR (" << bad << " of " << nodes << " nodes: " << join_nodes(rep.regular)
              << ")\n";
  }
  const auto [rmin, rmax] = std::minmax_element(rep.rank_R.begin(), rep.rank_R.end());
  std::cout << "rank(R) = " << *rmin;
  if (*rmax != *rmin) std::cout << ".." << *rmax;
  std::cout << " of " << spec.m << "\n";
  std::cout << "worst range residual = " << format_double(rep.worst_residual) << "\n";
  for (const auto& w : P.warnings) std::cout << "warning: " << w << "\n";
  return kOk;
}

int cmd_solve(const std::string& path, const std::string& mode, const std::string& p1_text,
              double tol, const std::string& out) {
  const ProblemSpec spec = load_or_throw(path);
  SynthesisOptions opt;
  opt.mode = mode == "open" ? SynthesisMode::open
             : mode == "closed" ? SynthesisMode::closed
                                : SynthesisMode::automatic;
  opt.tol.rank = tol;
  if (!p1_text.empty()) opt.p1_terminal = parse_matrix_literal(p1_text, spec.n);

  const Synthesis syn = synthesize(spec, opt);
  OutputSet outputs("solve", path, out);
  auto& man = outputs.manifest();
  man["mode"] = mode;
  man["tolerances"] = tolerances_json(opt.tol);
  grid_json(man, spec.grid);
  if (opt.p1_terminal) man["p1_terminal"] = matrix_json(*opt.p1_terminal);

  const auto& v = syn.verdict;
  const bool irregular = syn.regularity.irregular();
  std::cout << (irregular ? "IRREGULAR" : "REGULAR") << "\n";
  if (irregular) {
    std::cout << "coupling residual = " << format_double(v.coupling_residual)
              << (v.coupling_holds ? " (holds)" : " (violated)") << "\n";
    if (syn.open_loop) {
      std::cout << "open-loop range residual = " << format_double(v.range_residual)
                << (v.open_loop_feasible ? " (feasible)" : " (infeasible)") << "\n";
    }
    if (syn.closed_loop) {
      std::cout << "closed-loop gain residual = " << format_double(v.gain_residual)
                << (v.closed_loop_feasible ? " (feasible)" : " (infeasible)") << "\n";
    }
  }

  std::ostringstream os;
  write_matrix_series(os, spec.grid, syn.P.P, "P");
  outputs.add("P.csv", os.str());
  if (irregular && !syn.p1.P1.empty()) {
    os.str("");
    write_matrix_series(os, spec.grid, syn.p1.P1, "P1");
    outputs.add("P1.csv", os.str());
  }

  if (!v.solvable) {
    std::cout << "UNSOLVABLE: " << v.failed_condition << "\n";
    man["verdict"] = "unsolvable";
    man["failed_condition"] = v.failed_condition;
    outputs.finish();
    return kUnsolvable;
  }

  const ControlPolicy& policy = *syn.policy;
  std::cout << "policy = " << to_string(policy.kind) << "\n";
  if (policy.kind == ControlPolicy::Kind::open_loop) {
    os.str("");
    write_vector_series(os, spec.grid, syn.open_loop->u, "u");
    outputs.add("u.csv", os.str());
  } else if (policy.kind == ControlPolicy::Kind::closed_loop) {
    const auto& cl = *syn.closed_loop;
    TimeGrid head = spec.grid;
    os.str("");
    write_matrix_series(os, head, cl.K, "K");
    outputs.add("K.csv", os.str());
    os.str("");
    write_matrix_series(os, head, cl.gains, "F");
    outputs.add("gain.csv", os.str());
    std::cout << "gain computed up to t = " << format_double(spec.grid.node(cl.guard_node))
              << " (guard " << format_double(cl.epsilon_guard) << ")\n";
  } else {
    os.str("");
    write_matrix_series(os, spec.grid, syn.regular->F, "F");
    outputs.add("gain.csv", os.str());
  }
  os.str("");
  write_matrix_series(os, spec.grid, syn.filter.L, "L");
  outputs.add("L.csv", os.str());

  std::cout << "deterministic cost = " << format_double(syn.deterministic_cost) << "\n";
  std::cout << "optimal cost = " << format_double(syn.optimal_cost) << "\n";
  os.str("");
  write_summary(os, {{"deterministic_cost", syn.deterministic_cost},
                     {"optimal_cost", syn.optimal_cost},
                     {"coupling_residual", v.coupling_residual},
                     {"range_residual", v.range_residual},
                     {"gain_residual", v.gain_residual}});
  outputs.add("summary.csv", os.str());
  man["verdict"] = "solvable";
  man["policy"] = to_string(policy.kind);
  outputs.finish();
  return kOk;
}

int cmd_simulate(const std::string& path, int trials, std::uint64_t seed,
                 const std::string& controller, const std::string& schedule_path,
                 const std::string& p1_text, const std::string& out) {
  if (trials < 1) throw InputError("--trials must be at least 1");
  const ProblemSpec spec = load_or_throw(path);
  SimConfig cfg;
  cfg.trials = trials;
  cfg.seed = seed;

  FilterCovarianceSolution filter;
  if (controller == "custom") {
    filter = solve_filter_covariance(spec);
    std::vector<Vector> schedule;
    if (schedule_path.empty()) {
      schedule.assign(static_cast<std::size_t>(spec.grid.size()), Vector::Zero(spec.m));
    } else {
      std::ifstream f(schedule_path);
      if (!f) throw InputError("cannot read schedule " + schedule_path);
      schedule = read_schedule(f, spec.grid, spec.m);
    }
    cfg.controller = custom_policy(std::move(schedule));
  } else {
    SynthesisOptions opt;
    opt.mode = controller == "open" ? SynthesisMode::open
               : controller == "closed" ? SynthesisMode::closed
                                        : SynthesisMode::automatic;
    if (!p1_text.empty()) opt.p1_terminal = parse_matrix_literal(p1_text, spec.n);
    Synthesis syn = synthesize(spec, opt);
    if (!syn.verdict.solvable) {
      std::cout << "UNSOLVABLE: " << syn.verdict.failed_condition << "\n";
      return kUnsolvable;
    }
    filter = std::move(syn.filter);
    cfg.controller = *syn.policy;
    if (syn.regularity.irregular()) cfg.p1_terminal = syn.p1.terminal_value;
  }

  const SimResult sim = run_monte_carlo(spec, filter, cfg);

  std::vector<std::pair<std::string, double>> rows{
      {"trials", double(sim.trials)},
      {"modified_cost", sim.modified_cost.value},
      {"modified_cost_se", sim.modified_cost.se},
      {"classic_cost", sim.classic_terminal_cost.value + sim.running_cost.value},
      {"classic_terminal_cost", sim.classic_terminal_cost.value},
      {"classic_terminal_cost_se", sim.classic_terminal_cost.se},
      {"running_cost", sim.running_cost.value},
      {"running_cost_se", sim.running_cost.se},
      {"terminal_constraint_residual", sim.terminal_constraint_residual},
      {"innovation_lag1", sim.innovation_lag1},
  };
  for (Eigen::Index i = 0; i < sim.mean_terminal_state.size(); ++i) {
    rows.emplace_back("mean_terminal_state_" + std::to_string(i), sim.mean_terminal_state(i));
    rows.emplace_back("mean_terminal_state_se_" + std::to_string(i), sim.terminal_state_se(i));
  }
  std::ostringstream summary;
  write_summary(summary, rows);
  std::cout << summary.str();

  OutputSet outputs("simulate", path, out);
  auto& man = outputs.manifest();
  man["seed"] = seed;
  man["trials"] = trials;
  man["controller"] = controller;
  if (!schedule_path.empty()) man["schedule"] = schedule_path;
  grid_json(man, spec.grid);
  outputs.add("summary.csv", summary.str());
  std::ostringstream mean;
  write_mean_path(mean, sim);
  outputs.add("mean_path.csv", mean.str());
  outputs.finish();
  return kOk;
}

int cmd_demo_intro(double T, int trials, std::uint64_t seed) {
  if (!(T > 0.0)) throw InputError("--T must be positive");
  if (trials < 1) throw InputError("--trials must be at least 1");
  const DemoReport rep = demo_intro(T, trials, seed);
  std::cout << rep.table();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Irregular LQ/LQG output-feedback control toolkit"};
  app.set_version_flag("--version", std::string(IRLQG_VERSION));
  app.require_subcommand(1);

  std::string path, mode = "auto", p1_text, out, controller = "auto", schedule;
  double tol = kDefaultRankTol;
  int trials = 1000;
  std::uint64_t seed = 0;
  double T = 1.0;

  auto* classify_cmd = app.add_subcommand("classify", "Report regular/irregular verdict");
  classify_cmd->add_option("problem", path, "problem JSON file")->required();
  classify_cmd->add_option("--tol", tol, "rank tolerance");

  auto* solve_cmd = app.add_subcommand("solve", "Synthesize the optimal controller");
  solve_cmd->add_option("problem", path, "problem JSON file")->required();
  solve_cmd->add_option("--mode", mode, "open, closed or auto")
      ->check(CLI::IsMember({"open", "closed", "auto"}));
  solve_cmd->add_option("--p1-terminal", p1_text, "P1(T) as a number (times I) or JSON matrix");
  solve_cmd->add_option("--tol", tol, "rank tolerance");
  solve_cmd->add_option("--out", out, "output directory for CSV files");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo evaluation of a controller");
  sim_cmd->add_option("problem", path, "problem JSON file")->required();
  sim_cmd->add_option("--trials", trials, "number of trials");
  sim_cmd->add_option("--seed", seed, "random seed");
  sim_cmd->add_option("--controller", controller, "open, closed, auto or custom")
      ->check(CLI::IsMember({"open", "closed", "auto", "custom"}));
  sim_cmd->add_option("--schedule", schedule, "CSV control schedule for --controller custom");
  sim_cmd->add_option("--p1-terminal", p1_text, "P1(T) override");
  sim_cmd->add_option("--out", out, "output directory for CSV files");

  auto* demo_cmd = app.add_subcommand("demo-intro", "Classic vs modified cost on the scalar example");
  demo_cmd->add_option("--T", T, "horizon");
  demo_cmd->add_option("--trials", trials, "number of trials");
  demo_cmd->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  if (*classify_cmd) return guarded([&] { return cmd_classify(path, tol); });
  if (*solve_cmd) return guarded([&] { return cmd_solve(path, mode, p1_text, tol, out); });
  if (*sim_cmd) {
    return guarded(
        [&] { return cmd_simulate(path, trials, seed, controller, schedule, p1_text, out); });
  }
  if (*demo_cmd) return guarded([&] { return cmd_demo_intro(T, trials, seed); });
  return kInputError;
}
