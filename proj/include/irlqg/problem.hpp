#pragma once

// LQG problem data: dynamics dx = (A x + B u) dt + D dw, output
// dy = C x dt + G dv, cost E int (x'Qx + u'Ru) dt + [E x(T)]' H [E x(T)].

#include "irlqg/matrixkit.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace irlqg {

/// Raised for malformed problem files or problem data that fails validation.
class ProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform grid t_k = t0 + k h, k = 0..steps, h = (T - t0) / steps.
struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int steps = 2;

  [[nodiscard]] double step() const { return (T - t0) / steps; }
  [[nodiscard]] double node(int k) const { return k == steps ? T : t0 + k * step(); }
  [[nodiscard]] int size() const { return steps + 1; }
};

/// A time-varying matrix sampled at every grid node, linearly interpolated in
/// between. A constant matrix stores a single sample.
class MatrixSchedule {
 public:
  MatrixSchedule() = default;
  explicit MatrixSchedule(Matrix constant);
  explicit MatrixSchedule(std::vector<Matrix> samples);

  [[nodiscard]] bool is_constant() const { return samples_.size() == 1; }
  [[nodiscard]] Eigen::Index rows() const { return samples_.empty() ? 0 : samples_.front().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return samples_.empty() ? 0 : samples_.front().cols(); }
  [[nodiscard]] const std::vector<Matrix>& samples() const { return samples_; }

  /// Sample at grid node k.
  [[nodiscard]] const Matrix& at_node(int k) const {
    return is_constant() ? samples_.front() : samples_[static_cast<std::size_t>(k)];
  }
  /// Midpoint between nodes k and k+1.
  [[nodiscard]] Matrix at_mid(int k) const;
  /// Linear interpolation at an arbitrary time on `grid`.
  [[nodiscard]] Matrix at(const TimeGrid& grid, double t) const;

 private:
  std::vector<Matrix> samples_;
};

struct ProblemSpec {
  int n = 0;  // state
  int m = 0;  // input
  int s = 0;  // output
  MatrixSchedule A, B, D, C, G, Q, R;
  Matrix H;
  TimeGrid grid;
  Vector x0_mean;
  Matrix sigma0;
  std::optional<Matrix> p1_terminal;
};

enum class Severity { warning, error };

struct Violation {
  Severity severity = Severity::error;
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  [[nodiscard]] bool ok() const;
  [[nodiscard]] std::string summary() const;
};

[[nodiscard]] ValidationReport validate(const ProblemSpec& spec);

/// Parses a problem document. Throws ProblemError naming the offending field
/// (or line/column for JSON syntax errors) and on validation errors.
[[nodiscard]] ProblemSpec parse_problem(const std::string& json_text);
[[nodiscard]] ProblemSpec load_problem(const std::filesystem::path& path);

[[nodiscard]] std::string dump_problem(const ProblemSpec& spec);
void save_problem(const ProblemSpec& spec, const std::filesystem::path& path);

/// The scalar example dx = u dt + dw, dy = x dt + dv, cost [E x(T)]^2, on
/// [0, T] with x(0) = x0 known exactly.
[[nodiscard]] ProblemSpec intro_problem(double T = 1.0, int steps = 1000, double x0 = 1.0);

}  // namespace irlqg
