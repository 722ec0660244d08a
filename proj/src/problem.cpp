#include "irlqg/problem.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace irlqg {

using json = nlohmann::json;

MatrixSchedule::MatrixSchedule(Matrix constant) { samples_.push_back(std::move(constant)); }

MatrixSchedule::MatrixSchedule(std::vector<Matrix> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw ProblemError("schedule needs at least one sample");
}

Matrix MatrixSchedule::at_mid(int k) const {
  if (is_constant()) return samples_.front();
  const auto i = static_cast<std::size_t>(k);
  return 0.5 * (samples_[i] + samples_[i + 1]);
}

Matrix MatrixSchedule::at(const TimeGrid& grid, double t) const {
  if (is_constant()) return samples_.front();
  const double u = (t - grid.t0) / grid.step();
  if (u <= 0.0) return samples_.front();
  if (u >= grid.steps) return samples_.back();
  const auto k = static_cast<int>(std::floor(u));
  const double w = u - k;
  const auto i = static_cast<std::size_t>(k);
  if (w == 0.0) return samples_[i];
  return (1.0 - w) * samples_[i] + w * samples_[i + 1];
}

// ---------------------------------------------------------------------------
// validation

bool ValidationReport::ok() const {
  for (const auto& v : violations) {
    if (v.severity == Severity::error) return false;
  }
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : violations) {
    os << (v.severity == Severity::error ? "error" : "warning") << ": " << v.field << ": "
       << v.message << '\n';
  }
  return os.str();
}

namespace {

void check_shape(ValidationReport& rep, const char* name, const MatrixSchedule& sched,
                 Eigen::Index rows, Eigen::Index cols, const TimeGrid& grid) {
  if (sched.samples().empty()) {
    rep.violations.push_back({Severity::error, name, "missing"});
    return;
  }
  if (!sched.is_constant() && static_cast<int>(sched.samples().size()) != grid.size()) {
    rep.violations.push_back({Severity::error, name,
                              "expected " + std::to_string(grid.size()) + " samples, got " +
                                  std::to_string(sched.samples().size())});
  }
  for (const auto& M : sched.samples()) {
    if (M.rows() != rows || M.cols() != cols) {
      rep.violations.push_back({Severity::error, name,
                                "dimension mismatch: expected " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + ", got " + std::to_string(M.rows()) +
                                    "x" + std::to_string(M.cols())});
      return;
    }
    if (!M.allFinite()) {
      rep.violations.push_back({Severity::error, name, "non-finite entries"});
      return;
    }
  }
}

void check_psd_schedule(ValidationReport& rep, const char* name, const MatrixSchedule& sched) {
  for (std::size_t k = 0; k < sched.samples().size(); ++k) {
    if (!is_psd(sched.samples()[k])) {
      rep.violations.push_back({Severity::error, name,
                                std::string(name) + " not PSD" +
                                    (sched.is_constant() ? "" : " at node " + std::to_string(k))});
      return;
    }
  }
}

}  // namespace

ValidationReport validate(const ProblemSpec& spec) {
  ValidationReport rep;
  const auto& g = spec.grid;
  if (spec.n <= 0 || spec.m <= 0 || spec.s <= 0) {
    rep.violations.push_back({Severity::error, "n,m,s", "dimensions must be positive"});
    return rep;
  }
  if (!(g.T > g.t0) || !std::isfinite(g.t0) || !std::isfinite(g.T)) {
    rep.violations.push_back({Severity::error, "T", "horizon must satisfy T > t0"});
  }
  if (g.steps < 2) {
    rep.violations.push_back({Severity::error, "steps", "need at least 2 grid steps"});
  }
  const auto n = spec.n, m = spec.m, s = spec.s;
  check_shape(rep, "A", spec.A, n, n, g);
  check_shape(rep, "B", spec.B, n, m, g);
  check_shape(rep, "D", spec.D, n, n, g);
  check_shape(rep, "C", spec.C, s, n, g);
  check_shape(rep, "G", spec.G, s, s, g);
  check_shape(rep, "Q", spec.Q, n, n, g);
  check_shape(rep, "R", spec.R, m, m, g);
  if (spec.H.rows() != n || spec.H.cols() != n) {
    rep.violations.push_back({Severity::error, "H", "dimension mismatch"});
  }
  if (spec.x0_mean.size() != n) {
    rep.violations.push_back({Severity::error, "x0_mean", "dimension mismatch"});
  }
  if (spec.sigma0.rows() != n || spec.sigma0.cols() != n) {
    rep.violations.push_back({Severity::error, "sigma0", "dimension mismatch"});
  }
  if (spec.p1_terminal &&
      (spec.p1_terminal->rows() != n || spec.p1_terminal->cols() != n)) {
    rep.violations.push_back({Severity::error, "p1_terminal", "dimension mismatch"});
  }
  if (!rep.ok()) return rep;

  check_psd_schedule(rep, "Q", spec.Q);
  check_psd_schedule(rep, "R", spec.R);
  if (!is_psd(spec.H)) rep.violations.push_back({Severity::error, "H", "H not PSD"});
  if (!is_psd(spec.sigma0)) {
    rep.violations.push_back({Severity::error, "sigma0", "sigma0 not PSD"});
  }
  if (!spec.H.allFinite() || !spec.x0_mean.allFinite() || !spec.sigma0.allFinite()) {
    rep.violations.push_back({Severity::error, "H/x0_mean/sigma0", "non-finite entries"});
  }
  for (std::size_t k = 0; k < spec.G.samples().size(); ++k) {
    const Matrix& Gk = spec.G.samples()[k];
    const Matrix GG = Gk * Gk.transpose();
    if (numerical_rank(GG) < s) {
      rep.violations.push_back(
          {Severity::error, "G",
           "GG' singular" + (spec.G.is_constant() ? std::string() : " at node " + std::to_string(k))});
      break;
    }
  }
  if (spec.p1_terminal) {
    const Matrix& X = *spec.p1_terminal;
    if ((X - X.transpose()).norm() > 1e-12 * (1.0 + X.norm())) {
      rep.violations.push_back({Severity::error, "p1_terminal", "p1_terminal not symmetric"});
    }
  }
  // Rank of R along the grid must be constant for the derived operators.
  if (!spec.R.is_constant()) {
    const int r0 = numerical_rank(spec.R.samples().front());
    for (std::size_t k = 1; k < spec.R.samples().size(); ++k) {
      if (numerical_rank(spec.R.samples()[k]) != r0) {
        rep.violations.push_back({Severity::warning, "R",
                                  "rank of R changes along the grid (node " + std::to_string(k) +
                                      ")"});
        break;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) {
    throw ProblemError("field '" + field + "': expected a nested row-major array");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j.front().is_array()) {
    throw ProblemError("field '" + field + "': expected rows as arrays");
  }
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ProblemError("field '" + field + "': ragged row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw ProblemError("field '" + field + "': non-numeric entry at (" + std::to_string(r) +
                           "," + std::to_string(c) + ")");
      }
      M(r, c) = v.get<double>();
    }
  }
  return M;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw ProblemError("field '" + field + "': expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ProblemError("field '" + field + "': non-numeric entry " + std::to_string(i));
    }
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

MatrixSchedule schedule_from_json(const json& j, const std::string& field) {
  if (j.is_object()) {
    if (!j.contains("samples")) {
      throw ProblemError("field '" + field + "': object form needs \"samples\"");
    }
    const auto& arr = j.at("samples");
    if (!arr.is_array() || arr.empty()) {
      throw ProblemError("field '" + field + "': \"samples\" must be a non-empty array");
    }
    std::vector<Matrix> samples;
    samples.reserve(arr.size());
    for (std::size_t k = 0; k < arr.size(); ++k) {
      samples.push_back(matrix_from_json(arr[k], field + ".samples[" + std::to_string(k) + "]"));
    }
    return MatrixSchedule(std::move(samples));
  }
  return MatrixSchedule(matrix_from_json(j, field));
}

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ProblemError(std::string("missing required field '") + key + "'");
  return doc.at(key);
}

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json schedule_to_json(const MatrixSchedule& sched) {
  if (sched.is_constant()) return matrix_to_json(sched.samples().front());
  json arr = json::array();
  for (const auto& M : sched.samples()) arr.push_back(matrix_to_json(M));
  return json{{"samples", std::move(arr)}};
}

}  // namespace

ProblemSpec parse_problem(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ProblemError(std::string("parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ProblemError("problem document must be a JSON object");

  ProblemSpec spec;
  try {
    spec.n = require(doc, "n").get<int>();
    spec.m = require(doc, "m").get<int>();
    spec.s = require(doc, "s").get<int>();
    spec.grid.t0 = doc.value("t0", 0.0);
    spec.grid.T = require(doc, "T").get<double>();
    spec.grid.steps = require(doc, "steps").get<int>();
  } catch (const json::type_error& e) {
    throw ProblemError(std::string("bad scalar field: ") + e.what());
  }
  spec.A = schedule_from_json(require(doc, "A"), "A");
  spec.B = schedule_from_json(require(doc, "B"), "B");
  spec.D = schedule_from_json(require(doc, "D"), "D");
  spec.C = schedule_from_json(require(doc, "C"), "C");
  spec.G = schedule_from_json(require(doc, "G"), "G");
  spec.Q = schedule_from_json(require(doc, "Q"), "Q");
  spec.R = schedule_from_json(require(doc, "R"), "R");
  spec.H = matrix_from_json(require(doc, "H"), "H");
  spec.x0_mean = vector_from_json(require(doc, "x0_mean"), "x0_mean");
  spec.sigma0 = matrix_from_json(require(doc, "sigma0"), "sigma0");
  if (doc.contains("p1_terminal") && !doc.at("p1_terminal").is_null()) {
    spec.p1_terminal = matrix_from_json(doc.at("p1_terminal"), "p1_terminal");
  }

  const auto report = validate(spec);
  if (!report.ok()) throw ProblemError("invalid problem:\n" + report.summary());
  return spec;
}

ProblemSpec load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProblemError("cannot open problem file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_problem(buf.str());
  } catch (const ProblemError& e) {
    throw ProblemError(path.string() + ": " + e.what());
  }
}

std::string dump_problem(const ProblemSpec& spec) {
  json doc;
  doc["n"] = spec.n;
  doc["m"] = spec.m;
  doc["s"] = spec.s;
  doc["t0"] = spec.grid.t0;
  doc["T"] = spec.grid.T;
  doc["steps"] = spec.grid.steps;
  doc["A"] = schedule_to_json(spec.A);
  doc["B"] = schedule_to_json(spec.B);
  doc["D"] = schedule_to_json(spec.D);
  doc["C"] = schedule_to_json(spec.C);
  doc["G"] = schedule_to_json(spec.G);
  doc["Q"] = schedule_to_json(spec.Q);
  doc["R"] = schedule_to_json(spec.R);
  doc["H"] = matrix_to_json(spec.H);
  json x0 = json::array();
  for (Eigen::Index i = 0; i < spec.x0_mean.size(); ++i) x0.push_back(spec.x0_mean(i));
  doc["x0_mean"] = std::move(x0);
  doc["sigma0"] = matrix_to_json(spec.sigma0);
  if (spec.p1_terminal) doc["p1_terminal"] = matrix_to_json(*spec.p1_terminal);
  return doc.dump(2);
}

void save_problem(const ProblemSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ProblemError("cannot write '" + path.string() + "'");
  out << dump_problem(spec) << '\n';
}

ProblemSpec intro_problem(double T, int steps, double x0) {
  ProblemSpec spec;
  spec.n = spec.m = spec.s = 1;
  const Matrix zero = Matrix::Zero(1, 1);
  const Matrix one = Matrix::Ones(1, 1);
  spec.A = MatrixSchedule(zero);
  spec.B = MatrixSchedule(one);
  spec.D = MatrixSchedule(one);
  spec.C = MatrixSchedule(one);
  spec.G = MatrixSchedule(one);
  spec.Q = MatrixSchedule(zero);
  spec.R = MatrixSchedule(zero);
  spec.H = one;
  spec.grid = TimeGrid{0.0, T, steps};
  spec.x0_mean = Vector::Constant(1, x0);
  spec.sigma0 = zero;
  return spec;
}

}  // namespace irlqg
