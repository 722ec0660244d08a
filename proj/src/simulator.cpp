#include "irlqg/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace irlqg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Per-node running sums for one block of trials.
struct BlockSums {
  int n = 0, m = 0;
  std::vector<double> x, xhat, u, err, err2, orth, orth2;
  double innov_prod = 0.0, innov_prod2 = 0.0, innov_sq = 0.0;
  long long innov_count = 0;

  BlockSums(int nodes, int n_, int m_) : n(n_), m(m_) {
    const auto N = static_cast<std::size_t>(nodes);
    x.assign(N * n, 0.0);
    xhat.assign(N * n, 0.0);
    u.assign(N * m, 0.0);
    err.assign(N * n, 0.0);
    err2.assign(N * n * n, 0.0);
    orth.assign(N, 0.0);
    orth2.assign(N, 0.0);
  }

  void merge(const BlockSums& o) {
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(x, o.x);
    add(xhat, o.xhat);
    add(u, o.u);
    add(err, o.err);
    add(err2, o.err2);
    add(orth, o.orth);
    add(orth2, o.orth2);
    innov_prod += o.innov_prod;
    innov_prod2 += o.innov_prod2;
    innov_sq += o.innov_sq;
    innov_count += o.innov_count;
  }
};

struct TrialOutcome {
  Vector x_T;
  Vector xhat_T;
  double running = 0.0;
};

/// Symmetric square root of a PSD matrix.
Matrix psd_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(S));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

std::mt19937_64 trial_engine(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

class TrialRunner {
 public:
  TrialRunner(const ProblemSpec& spec, const FilterCovarianceSolution& filter,
              const SimConfig& cfg)
      : spec_(spec), filter_(filter), cfg_(cfg), sigma_root_(psd_sqrt(spec.sigma0)) {}

  /// Simulates one trial, adding its per-node statistics into `sums`.
  /// Returns false (and fills `error`) if the state stops being finite.
  bool run(int trial, BlockSums& sums, TrialOutcome& out, TrialPath* path, std::string& error) const {
    const int n = spec_.n, m = spec_.m, s = spec_.s;
    const TimeGrid& grid = spec_.grid;
    const int N = grid.steps;
    const double h = grid.step();
    const double sqrt_h = std::sqrt(h);
    const ControlPolicy& policy = cfg_.controller;

    auto rng = trial_engine(cfg_.seed, static_cast<std::uint64_t>(trial));
    std::normal_distribution<double> normal(0.0, 1.0);

    Vector z(n), x(n), xhat(n), u(m), held(m), dw(n), dv(s), dy(s), innov(s), prev_innov(s);
    Vector tmp_n(n), tmp_s(s), err(n);
    for (int i = 0; i < n; ++i) z(i) = normal(rng);
    x = spec_.x0_mean;
    x.noalias() += sigma_root_ * z;
    xhat = spec_.x0_mean;
    held.setZero();

    double running = 0.0;
    for (int k = 0; k <= N; ++k) {
      // control
      if (k == N && policy.terminal_control) {
        u = *policy.terminal_control;
      } else if (policy.holds_at(k, N)) {
        u = held;
      } else {
        u.setZero();
        const auto i = static_cast<std::size_t>(k);
        if (i < policy.gains.size()) u.noalias() += policy.gains[i] * xhat;
        if (i < policy.feedforward.size()) u += policy.feedforward[i];
        if (k == policy.hold_from) held = u;
      }
      if (!x.allFinite() || !xhat.allFinite() || !u.allFinite()) {
        error = "non-finite state in trial " + std::to_string(trial) + " at node " +
                std::to_string(k);
        return false;
      }

      // statistics at node k
      const auto base_n = static_cast<std::size_t>(k) * n;
      const auto base_m = static_cast<std::size_t>(k) * m;
      err = x - xhat;
      for (int a = 0; a < n; ++a) {
        sums.x[base_n + a] += x(a);
        sums.xhat[base_n + a] += xhat(a);
        sums.err[base_n + a] += err(a);
        for (int b = 0; b < n; ++b) {
          sums.err2[(base_n + a) * n + b] += err(a) * err(b);
        }
      }
      for (int a = 0; a < m; ++a) sums.u[base_m + a] += u(a);
      const double orth = xhat.dot(err);
      sums.orth[static_cast<std::size_t>(k)] += orth;
      sums.orth2[static_cast<std::size_t>(k)] += orth * orth;

      tmp_n.noalias() = spec_.Q.at_node(k) * x;
      double stage = x.dot(tmp_n);
      stage += u.dot(spec_.R.at_node(k) * u);
      running += (k == 0 || k == N ? 0.5 : 1.0) * h * stage;

      if (path) {
        path->x.push_back(x);
        path->xhat.push_back(xhat);
        path->u.push_back(u);
      }
      if (k == N) break;

      // noise and measurement
      for (int i = 0; i < n; ++i) dw(i) = sqrt_h * normal(rng);
      for (int i = 0; i < s; ++i) dv(i) = sqrt_h * normal(rng);
      const Matrix& A = spec_.A.at_node(k);
      const Matrix& B = spec_.B.at_node(k);
      const Matrix& C = spec_.C.at_node(k);
      dy.noalias() = C * x;
      dy *= h;
      dy.noalias() += spec_.G.at_node(k) * dv;
      tmp_s.noalias() = C * xhat;
      innov = dy - h * tmp_s;
      if (k > 0) {
        const double prod = prev_innov(0) * innov(0);
        sums.innov_prod += prod;
        sums.innov_prod2 += prod * prod;
        sums.innov_count += 1;
      }
      sums.innov_sq += innov(0) * innov(0);
      prev_innov = innov;

      // plant
      tmp_n.noalias() = A * x;
      tmp_n.noalias() += B * u;
      x += h * tmp_n;
      tmp_n.noalias() = spec_.D.at_node(k) * dw;
      x += tmp_n;

      // filter
      tmp_n.noalias() = A * xhat;
      tmp_n.noalias() += B * u;
      xhat += h * tmp_n;
      tmp_n.noalias() = filter_.L[static_cast<std::size_t>(k)] * innov;
      xhat += tmp_n;
    }
    out.x_T = x;
    out.xhat_T = xhat;
    out.running = running;
    return true;
  }

 private:
  const ProblemSpec& spec_;
  const FilterCovarianceSolution& filter_;
  const SimConfig& cfg_;
  Matrix sigma_root_;
};

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return kNaN;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

int default_thread_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("IRLQG_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) return std::min(cap, std::max(hw, cap));
  }
  return hw;
}

SimResult run_monte_carlo(const ProblemSpec& spec, const FilterCovarianceSolution& filter,
                          const SimConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("run_monte_carlo: trials must be >= 1");
  const int n = spec.n, m = spec.m;
  const int nodes = spec.grid.size();
  const int trials = cfg.trials;

  // Fixed partition: at most 32 blocks, independent of the thread count.
  const int block_size = std::max(64, (trials + 31) / 32);
  const int blocks = (trials + block_size - 1) / block_size;

  std::vector<BlockSums> block_sums;
  block_sums.reserve(static_cast<std::size_t>(blocks));
  for (int b = 0; b < blocks; ++b) block_sums.emplace_back(nodes, n, m);
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(trials));
  std::vector<TrialPath> paths(cfg.record_paths ? static_cast<std::size_t>(trials) : 0);

  const TrialRunner runner(spec, filter, cfg);
  std::atomic<int> next_block{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string first_error;
  int first_error_trial = std::numeric_limits<int>::max();

  auto worker = [&]() {
    for (;;) {
      const int b = next_block.fetch_add(1);
      if (b >= blocks || failed.load()) return;
      const int lo = b * block_size;
      const int hi = std::min(trials, lo + block_size);
      for (int t = lo; t < hi; ++t) {
        std::string error;
        TrialPath* path = cfg.record_paths ? &paths[static_cast<std::size_t>(t)] : nullptr;
        if (!runner.run(t, block_sums[static_cast<std::size_t>(b)],
                        outcomes[static_cast<std::size_t>(t)], path, error)) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (t < first_error_trial) {
            first_error_trial = t;
            first_error = error;
          }
          failed.store(true);
          return;
        }
      }
    }
  };

  const int threads = std::clamp(cfg.threads > 0 ? cfg.threads : default_thread_count(), 1, blocks);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw NumericalError("Monte Carlo aborted: " + first_error);

  BlockSums total(nodes, n, m);
  for (const auto& b : block_sums) total.merge(b);

  SimResult res;
  res.trials = trials;
  res.seed = cfg.seed;
  res.grid = spec.grid;
  const double inv = 1.0 / trials;

  // Terminal statistics, summed in trial order.
  res.mean_terminal_state = Vector::Zero(n);
  res.mean_terminal_estimate = Vector::Zero(n);
  double running_mean = 0.0;
  double classic_mean = 0.0;
  std::vector<double> classic(static_cast<std::size_t>(trials));
  std::vector<double> running(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const auto& o = outcomes[static_cast<std::size_t>(t)];
    res.mean_terminal_state += o.x_T;
    res.mean_terminal_estimate += o.xhat_T;
    classic[static_cast<std::size_t>(t)] = o.x_T.dot(spec.H * o.x_T);
    running[static_cast<std::size_t>(t)] = o.running;
    classic_mean += classic[static_cast<std::size_t>(t)];
    running_mean += o.running;
  }
  res.mean_terminal_state *= inv;
  res.mean_terminal_estimate *= inv;
  classic_mean *= inv;
  running_mean *= inv;

  res.terminal_state_se = Vector::Constant(n, kNaN);
  if (trials >= 2) {
    Vector acc = Vector::Zero(n);
    for (const auto& o : outcomes) acc += (o.x_T - res.mean_terminal_state).cwiseAbs2();
    res.terminal_state_se = (acc / (trials - 1.0)).cwiseSqrt() / std::sqrt(double(trials));
  }

  const Vector& mT = res.mean_terminal_state;
  const Vector Hm = spec.H * mT;
  res.classic_terminal_cost = {classic_mean, sample_sd(classic, classic_mean) / std::sqrt(double(trials))};
  res.running_cost = {running_mean, sample_sd(running, running_mean) / std::sqrt(double(trials))};
  // Delta-method influence values of the plug-in estimator.
  std::vector<double> influence(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const auto& o = outcomes[static_cast<std::size_t>(t)];
    influence[static_cast<std::size_t>(t)] = 2.0 * Hm.dot(o.x_T - mT) + (o.running - running_mean);
  }
  res.modified_cost = {mT.dot(Hm) + running_mean,
                       sample_sd(influence, 0.0) / std::sqrt(double(trials))};

  if (cfg.p1_terminal) {
    res.terminal_constraint_residual = (*cfg.p1_terminal * res.mean_terminal_estimate).norm();
  }

  // Per-node statistics.
  const double var_scale = trials >= 2 ? 1.0 / (trials - 1.0) : kNaN;
  for (int k = 0; k < nodes; ++k) {
    const auto bn = static_cast<std::size_t>(k) * n;
    const auto bm = static_cast<std::size_t>(k) * m;
    Vector mx(n), mxh(n), me(n), mse(n), mu(m);
    Matrix cov(n, n);
    for (int a = 0; a < n; ++a) {
      mx(a) = total.x[bn + a] * inv;
      mxh(a) = total.xhat[bn + a] * inv;
      me(a) = total.err[bn + a] * inv;
    }
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        cov(a, b) = (total.err2[(bn + a) * n + b] - trials * me(a) * me(b)) * var_scale;
      }
      mse(a) = std::sqrt(std::max(0.0, cov(a, a)) * inv);
    }
    for (int a = 0; a < m; ++a) mu(a) = total.u[bm + a] * inv;
    const double om = total.orth[static_cast<std::size_t>(k)] * inv;
    const double ovar = (total.orth2[static_cast<std::size_t>(k)] - trials * om * om) * var_scale;
    res.mean_x.push_back(mx);
    res.mean_xhat.push_back(mxh);
    res.mean_u.push_back(mu);
    res.error_mean.push_back(me);
    res.error_mean_se.push_back(mse);
    res.error_cov.push_back(cov);
    res.orthogonality_mean.push_back(om);
    res.orthogonality_se.push_back(std::sqrt(std::max(0.0, ovar) * inv));
  }

  if (total.innov_count > 1 && total.innov_sq > 0.0) {
    const double cnt = static_cast<double>(total.innov_count);
    const double mean_sq = total.innov_sq / (cnt + trials);
    const double mean_prod = total.innov_prod / cnt;
    const double var_prod = std::max(0.0, total.innov_prod2 / cnt - mean_prod * mean_prod);
    res.innovation_lag1 = mean_prod / mean_sq;
    res.innovation_lag1_se = std::sqrt(var_prod / cnt) / mean_sq;
  }
  res.paths = std::move(paths);
  return res;
}

std::string DemoReport::table() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "scalar example dx = u dt + dw, x0 = 1, u = -x0/T, T = " << T << ", trials = " << trials
     << ", seed = " << seed << "\n";
  os << std::left << std::setw(28) << "cost" << std::setw(16) << "estimate" << std::setw(16)
     << "std. error" << "reference\n";
  os << std::setw(28) << "classic E[x(T)^2]" << std::setw(16) << classic.value << std::setw(16)
     << classic.se << ">= T = " << T << "\n";
  os << std::setw(28) << "modified [E x(T)]^2" << std::setw(16) << modified.value << std::setw(16)
     << modified.se << "optimum 0\n";
  return os.str();
}

DemoReport demo_intro(double T, int trials, std::uint64_t seed, int steps_per_unit) {
  const int steps = std::max(2, static_cast<int>(std::lround(T * steps_per_unit)));
  const ProblemSpec spec = intro_problem(T, steps, 1.0);
  const auto filter = solve_filter_covariance(spec);
  std::vector<Vector> schedule(static_cast<std::size_t>(steps) + 1,
                               Vector::Constant(1, -spec.x0_mean(0) / T));
  SimConfig cfg;
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.controller = custom_policy(std::move(schedule));
  const SimResult sim = run_monte_carlo(spec, filter, cfg);

  DemoReport rep;
  rep.T = T;
  rep.trials = trials;
  rep.seed = seed;
  rep.classic = sim.classic_terminal_cost;
  rep.modified = sim.modified_cost;
  rep.mean_terminal_state = sim.mean_terminal_state;
  return rep;
}

}  // namespace irlqg
