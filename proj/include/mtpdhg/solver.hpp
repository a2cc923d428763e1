// Copyright 2026 The mtpdhg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Multi-timescale PDHG (MT and accelerated AMT variants) and a classical
// PDHG baseline.

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mtpdhg/geometry.hpp"
#include "mtpdhg/metrics.hpp"
#include "mtpdhg/problem.hpp"
#include "mtpdhg/sliding.hpp"

namespace mtpdhg {

/// An error raised inside the main loop, tagged with the global iteration.
class IterationError : public Error {
 public:
  IterationError(long k, const std::string& what)
      : Error("iteration " + std::to_string(k) + ": " + what), iteration(k) {}
  long iteration;
};

/// Per-block update rates r_s, weights rho_s and their moments.
struct RateSchedule {
  std::vector<int> r;
  std::vector<double> rho;
  double r_bar = 1.0;
  double r2_bar = 1.0;
  double r3_bar = 1.0;
  /// Last global iteration index; N + 1 is a multiple of every r_s.
  long N = 0;
  /// N as requested before rounding up.
  long N_requested = 0;

  /// rho defaults to uniform. N is raised to the least N' >= N with
  /// lcm(r) | N' + 1.
  static RateSchedule make(std::vector<int> r, long N, std::vector<double> rho = {}) {
    require(!r.empty(), "rate schedule: need at least one block");
    require(N >= 0, "rate schedule: N must be >= 0");
    for (int x : r) require(x >= 1, "rate schedule: rates must be >= 1");
    RateSchedule s;
    s.r = std::move(r);
    s.N_requested = N;
    const long L = s.lcm();
    s.N = ((N + 1 + L - 1) / L) * L - 1;
    if (rho.empty()) rho.assign(s.r.size(), 1.0 / double(s.r.size()));
    s.set_rho(std::move(rho));
    return s;
  }

  void set_rho(std::vector<double> w) {
    require(w.size() == r.size(), "rate schedule: need one rho per block");
    double total = 0.0;
    for (double x : w) {
      require(x >= 0.0 && std::isfinite(x), "rate schedule: rho must be finite and >= 0");
      total += x;
    }
    require(total > 0.0, "rate schedule: rho sums to zero");
    for (double& x : w) x /= total;
    rho = std::move(w);
    r_bar = r2_bar = r3_bar = 0.0;
    for (std::size_t s = 0; s < r.size(); ++s) {
      const double rs = r[s];
      r_bar += rho[s] * rs;
      r2_bar += rho[s] * rs * rs;
      r3_bar += rho[s] * rs * rs * rs;
    }
  }

  Index num_blocks() const { return static_cast<Index>(r.size()); }
  int r_max() const { return *std::max_element(r.begin(), r.end()); }
  long lcm() const {
    long L = 1;
    for (int x : r) L = std::lcm(L, long(x));
    return L;
  }
  /// Number of dual steps block s performs over a run.
  long steps(Index s) const { return (N + 1) / r[s]; }
};

enum class Variant { MT, AMT };

inline const char* to_string(Variant v) { return v == Variant::MT ? "MT" : "AMT"; }

/// Step sizes: eta_k, eta_{k,s} = eta_k rho_s, tau_s and theta_k.
struct StepParams {
  Variant variant = Variant::MT;
  /// MT: constant eta.
  double eta = 1.0;
  /// AMT: eta_k = mu (k + q) / (2 r_bar C), theta_k = k + 2 q with q = r2_bar / r_bar.
  double mu = 0.0;
  double C = 1.0;
  double r_bar = 1.0;
  double q = 1.0;
  std::vector<double> tau;
  double alpha = 1.0;
  /// Preset-suggested primal sliding variant.
  SlidingVariant sliding_variant = SlidingVariant::Convex;

  double theta(long k) const { return variant == Variant::MT ? 1.0 : double(k) + 2.0 * q; }
  double eta_k(long k) const {
    return variant == Variant::MT ? eta : mu * (double(k) + q) / (2.0 * r_bar * C);
  }
  /// Closed form of sum_{k=0}^{N} theta_k.
  double theta_sum(long N) const {
    const double n1 = double(N + 1);
    return variant == Variant::MT ? n1 : 0.5 * double(N) * n1 + 2.0 * q * n1;
  }
};

/// sup_{X in domain} D(X, X_init) for bounded domains (Euclidean).
inline double domain_divergence_bound(const ConvexDomain& domain, const Vector& X_init) {
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
          const double r = k.radius + (X_init - k.center).norm();
          return 0.5 * r * r;
        } else if constexpr (std::is_same_v<K, ConvexDomain::ProductBall>) {
          double total = 0.0;
          for (Index s = 0; s < X_init.size(); s += k.block_size) {
            const double r = k.radius + X_init.segment(s, k.block_size).norm();
            total += 0.5 * r * r;
          }
          return total;
        } else if constexpr (std::is_same_v<K, ConvexDomain::Box>) {
          const Vector far = (X_init - k.lower).cwiseAbs().cwiseMax((k.upper - X_init).cwiseAbs());
          return 0.5 * far.squaredNorm();
        } else {
          throw InvalidArgument("domain_divergence_bound: primal domain is unbounded");
        }
      },
      domain.kind());
}

/// D_s^y defaults: lambda_s^2 / 2 for ScaledNorm (y_init = 0), infinite for CharZero.
inline std::vector<double> dual_divergence_bounds(const SaddleProblem& problem) {
  std::vector<double> out;
  for (const auto& b : problem.blocks) out.push_back(b.dual_radius_sq);
  return out;
}

namespace detail {

inline std::vector<double> kappa_weights(const SaddleProblem& problem, const std::vector<double>& D_y) {
  require(static_cast<Index>(D_y.size()) == problem.num_blocks(), "preset: need one D_y per block");
  std::vector<double> w;
  bool any = false;
  for (std::size_t s = 0; s < D_y.size(); ++s) {
    require(D_y[s] >= 0.0, "preset: D_y must be >= 0");
    require(std::isfinite(D_y[s]), "preset: D_y of block " + std::to_string(s) +
                                       " is infinite; supply a finite bound or use manual parameters");
    any = any || D_y[s] > 0.0;
    w.push_back(problem.blocks[s].kappa_tilde * std::sqrt(D_y[s]));
  }
  if (!any) throw InvalidArgument("dual domains degenerate; use CharZero path with manual rho");
  for (std::size_t s = 0; s < w.size(); ++s) {
    if (w[s] == 0.0 && problem.blocks[s].kappa_tilde > 0.0) {
      throw InvalidArgument("preset: block " + std::to_string(s) + " gets rho = 0 but has a nonzero operator");
    }
  }
  return w;
}

inline void check_theta_free_blocks(const SaddleProblem& problem, const RateSchedule& schedule) {
  require(schedule.num_blocks() == problem.num_blocks(), "rate schedule and problem disagree on S");
}

}  // namespace detail

/// MT step sizes for a given eta and the schedule's rho:
/// tau_s = 2 kappa_s^2 / (rho_s eta).
inline StepParams preset_mt_manual(const SaddleProblem& problem, const RateSchedule& schedule, double eta) {
  detail::check_theta_free_blocks(problem, schedule);
  require(eta > 0.0 && std::isfinite(eta), "preset: eta must be positive");
  StepParams p;
  p.variant = Variant::MT;
  p.eta = eta;
  p.r_bar = schedule.r_bar;
  p.q = schedule.r2_bar / schedule.r_bar;
  for (Index s = 0; s < problem.num_blocks(); ++s) {
    const double kap = problem.blocks[s].kappa_tilde;
    if (kap == 0.0) {
      p.tau.push_back(1.0);
      continue;
    }
    require(schedule.rho[s] > 0.0, "preset: rho_s = 0 for a block with a nonzero operator");
    p.tau.push_back(2.0 * kap * kap / (schedule.rho[s] * eta));
  }
  return p;
}

/// eta = (sum kappa_s sqrt(D_s)) sqrt(8 / (3 D_X)), rho_s proportional to
/// kappa_s sqrt(D_s). Overwrites schedule.rho.
inline StepParams preset_mt(const SaddleProblem& problem, RateSchedule& schedule, double D_X,
                            const std::vector<double>& D_y) {
  detail::check_theta_free_blocks(problem, schedule);
  require(D_X > 0.0 && std::isfinite(D_X), "preset_mt: D_X must be positive and finite");
  const auto w = detail::kappa_weights(problem, D_y);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  schedule.set_rho(w);
  return preset_mt_manual(problem, schedule, total * std::sqrt(8.0 / (3.0 * D_X)));
}

/// AMT step sizes for the schedule's current rho:
/// theta_k = k + 2 r2/r, eta_k = mu (k + r2/r) / (2 r C),
/// tau_s = (kappa_s^2 / rho_s) 4 r_s r2 C / mu (r instead of r2 when alt_tau).
inline StepParams preset_amt_manual(const SaddleProblem& problem, const RateSchedule& schedule, bool alt_tau = false) {
  detail::check_theta_free_blocks(problem, schedule);
  require(problem.mu > 0.0, "preset_amt: requires mu > 0");
  const auto geom = problem.geometry();
  require(std::isfinite(geom.curvature), "preset_amt: requires finite curvature C");
  StepParams p;
  p.variant = Variant::AMT;
  p.mu = problem.mu;
  p.C = geom.curvature;
  p.r_bar = schedule.r_bar;
  p.q = schedule.r2_bar / schedule.r_bar;
  p.sliding_variant = SlidingVariant::StronglyConvex;
  const double moment = alt_tau ? schedule.r_bar : schedule.r2_bar;
  for (Index s = 0; s < problem.num_blocks(); ++s) {
    const double kap = problem.blocks[s].kappa_tilde;
    if (kap == 0.0) {
      p.tau.push_back(1.0);
      continue;
    }
    require(schedule.rho[s] > 0.0, "preset: rho_s = 0 for a block with a nonzero operator");
    p.tau.push_back(kap * kap / schedule.rho[s] * 4.0 * schedule.r[s] * moment * p.C / p.mu);
  }
  p.eta = p.eta_k(0);
  return p;
}

/// As preset_amt_manual, with rho_s proportional to kappa_s sqrt(D_s).
/// Overwrites schedule.rho.
inline StepParams preset_amt(const SaddleProblem& problem, RateSchedule& schedule, double D_X,
                             const std::vector<double>& D_y, bool alt_tau = false) {
  detail::check_theta_free_blocks(problem, schedule);
  require(problem.mu > 0.0, "preset_amt: requires mu > 0");
  require(D_X > 0.0, "preset_amt: D_X must be positive");
  schedule.set_rho(detail::kappa_weights(problem, D_y));
  return preset_amt_manual(problem, schedule, alt_tau);
}

/// LP baseline: eta = ||A||, tau_s = 2 S ||A_s||^2 / eta, uniform rho.
inline StepParams preset_lp(const SaddleProblem& problem, RateSchedule& schedule) {
  detail::check_theta_free_blocks(problem, schedule);
  const Index S = problem.num_blocks();
  std::vector<Eigen::Triplet<double>> trips;
  Index row = 0;
  std::vector<double> norms;
  for (const auto& b : problem.blocks) {
    SparseMatrix m = b.K.to_sparse();
    for (Index r = 0; r < m.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) trips.emplace_back(row + r, it.col(), it.value());
    row += m.rows();
    norms.push_back(operator_norm_estimate(b.K, kKappaPowerIterations) / 1.01);
  }
  SparseMatrix all(row, problem.dimension);
  all.setFromTriplets(trips.begin(), trips.end());
  const double normA = operator_norm_estimate(LinearOperator::from_sparse(all), kKappaPowerIterations) / 1.01;
  schedule.set_rho(std::vector<double>(S, 1.0));
  StepParams p;
  p.variant = Variant::MT;
  p.eta = normA;
  p.r_bar = schedule.r_bar;
  p.q = schedule.r2_bar / schedule.r_bar;
  for (double n : norms) p.tau.push_back(2.0 * double(S) * n * n / normA);
  return p;
}

/// floor(4 M^2 (N + 1) / (r_bar (sum kappa_s sqrt(D_s))^2)), at least 1.
inline int default_sliding_T(const SaddleProblem& problem, const RateSchedule& schedule,
                             const std::vector<double>& D_y) {
  double total = 0.0;
  for (Index s = 0; s < problem.num_blocks(); ++s) total += problem.blocks[s].kappa_tilde * std::sqrt(D_y[s]);
  if (!(total > 0.0) || !std::isfinite(total)) return 1;
  const double T = std::floor(4.0 * problem.M * problem.M * double(schedule.N + 1) / (schedule.r_bar * total * total));
  return static_cast<int>(std::clamp(T, 1.0, 1e7));
}

/// eta r_bar D(X, X_init) + (3/2) sum_s tau_s r_s D(y_s, y_s_init); MT only.
inline double rate_envelope_rhs(const StepParams& params, const RateSchedule& schedule, const Vector& X,
                           const Vector& X_init, const std::vector<Vector>& Y, const std::vector<Vector>& Y_init) {
  require(params.variant == Variant::MT, "rate_envelope_rhs: MT parameters expected");
  auto gx = BregmanGeometry::euclidean(X.size());
  double out = params.eta * schedule.r_bar * divergence(gx, X, X_init);
  for (std::size_t s = 0; s < Y.size(); ++s) {
    auto gy = BregmanGeometry::euclidean(Y[s].size());
    out += 1.5 * params.tau[s] * schedule.r[s] * divergence(gy, Y[s], Y_init[s]);
  }
  return out;
}

/// Ring of the last 2 r_max + 1 pairs (X^j, X_hat^j); indices j < 0 read X_init.
class History {
 public:
  History(int r_max, Vector X_init)
      : size_(2 * r_max + 1), X_init_(std::move(X_init)), X_(size_, X_init_), X_hat_(size_, X_init_) {}

  void push(long k, Vector X, Vector X_hat) {
    require(k == next_, "history: iterates must be pushed in order");
    X_[slot(k)] = std::move(X);
    X_hat_[slot(k)] = std::move(X_hat);
    ++next_;
  }

  const Vector& X(long j) const { return j < 0 ? X_init_ : X_[checked(j)]; }
  const Vector& X_hat(long j) const { return j < 0 ? X_init_ : X_hat_[checked(j)]; }
  long next() const { return next_; }

 private:
  std::size_t slot(long j) const { return static_cast<std::size_t>(j % long(size_)); }
  std::size_t checked(long j) const {
    if (j >= next_ || j < next_ - long(size_)) {
      throw InvalidArgument("history: index " + std::to_string(j) + " outside the stored window");
    }
    return slot(j);
  }

  std::size_t size_;
  Vector X_init_;
  std::vector<Vector> X_;
  std::vector<Vector> X_hat_;
  long next_ = 0;
};

/// X_tilde = alpha sum_{k'=k-r}^{k-1} theta_{k'} (X_hat^{k'} - X^{k'-r}) + sum_{k'=k-r}^{k-1} theta_{k'+r} X^{k'}.
inline Vector extrapolate(const History& history, const StepParams& params, long k, int r) {
  require(r >= 1, "extrapolate: rate must be >= 1");
  if (k % r != 0) throw InvalidArgument("extrapolate: called at k=" + std::to_string(k) + " off the schedule of rate " + std::to_string(r));
  Vector out = Vector::Zero(history.X(-1).size());
  for (long kp = k - r; kp <= k - 1; ++kp) {
    if (kp >= 0) out.noalias() += params.alpha * params.theta(kp) * (history.X_hat(kp) - history.X(kp - r));
    out.noalias() += params.theta(kp + r) * history.X(kp);
  }
  return out;
}

/// sum_{k'=k}^{k+r-1} theta_{k'}.
inline double window_weight(const StepParams& params, long k, int r) {
  double w = 0.0;
  for (long kp = k; kp < k + r; ++kp) w += params.theta(kp);
  return w;
}

/// y_s^{i} = argmin <-(K_s X_tilde / W - h_s), y> + R_s^*(y) + tau_{s,i} D(y, y_prev).
inline Vector dual_step(const DualBlock& block, const StepParams& params, Index s, const Vector& X_tilde,
                        double W, const Vector& y_prev) {
  const Vector g = block.shift - block.K.apply(X_tilde) / W;
  const double tau = params.variant == Variant::MT ? params.tau[s] : params.tau[s] / W;
  return prox_dual(BregmanGeometry::euclidean(block.size()), block.conj_domain, g, y_prev, tau);
}

/// What trace hooks get to see at iteration k.
struct IterationView {
  long k = 0;
  const SaddleProblem* problem = nullptr;
  const Vector* X = nullptr;
  const Vector* X_hat = nullptr;
  const std::vector<Vector>* Y = nullptr;
  /// Ergodic point Z^k.
  PrimalDualPoint ergodic;
  const std::vector<long>* dual_steps = nullptr;
  double theta_sum = 0.0;
  double elapsed = 0.0;
};

struct RunHooks {
  /// Trace rows at k % stride == 0 and at k = N.
  int stride = 10;
  std::function<MetricRow(const IterationView&)> metrics;
  std::function<void(const IterationView&)> on_iteration;
  /// Checked on each trace row; true ends the run at that k.
  std::function<bool(const MetricRow&)> stop;
};

struct RunOptions {
  Vector X_init;
  std::vector<Vector> Y_init;
  SlidingConfig sliding;
  RunHooks hooks;
  int kstar_audit_every = 100;
  std::uint64_t audit_seed = 0x61756469ULL;
};

struct RunResult {
  PrimalDualPoint Z;
  /// Last iterates (X^N, Y^N) and X_hat^N.
  PrimalDualPoint last;
  Vector X_hat_last;
  std::vector<MetricRow> trace;
  std::vector<long> dual_steps;
  /// k at which each dual step of each block happened.
  std::vector<std::vector<long>> dual_step_times;
  double theta_sum = 0.0;
  double max_kstar_drift = 0.0;
  double max_audit_excess = -std::numeric_limits<double>::infinity();
  int audits = 0;
  long oracle_calls = 0;
  long N = 0;
};

/// Running sums sum theta_k X_hat^k, sum theta_k y_s^k in extended precision.
class ErgodicAccumulator {
 public:
  void init(Index d, const std::vector<Vector>& Y) {
    X_.assign(d, 0.0L);
    Y_.clear();
    for (const auto& y : Y) Y_.emplace_back(y.size(), 0.0L);
  }
  void add(double theta, const Vector& X_hat, const std::vector<Vector>& Y) {
    const long double t = theta;
    for (Index i = 0; i < X_hat.size(); ++i) X_[i] += t * X_hat[i];
    for (std::size_t s = 0; s < Y.size(); ++s)
      for (Index i = 0; i < Y[s].size(); ++i) Y_[s][i] += t * Y[s][i];
    total_ += t;
  }
  PrimalDualPoint point() const {
    PrimalDualPoint z;
    z.X.resize(static_cast<Index>(X_.size()));
    for (std::size_t i = 0; i < X_.size(); ++i) z.X[Index(i)] = static_cast<double>(X_[i] / total_);
    for (const auto& y : Y_) {
      Vector v(static_cast<Index>(y.size()));
      for (std::size_t i = 0; i < y.size(); ++i) v[Index(i)] = static_cast<double>(y[i] / total_);
      z.Y.push_back(std::move(v));
    }
    return z;
  }
  double total() const { return static_cast<double>(total_); }

 private:
  std::vector<long double> X_;
  std::vector<std::vector<long double>> Y_;
  long double total_ = 0.0L;
};

namespace detail {

inline void prepare_initial_point(const SaddleProblem& problem, RunOptions& options) {
  if (options.X_init.size() == 0) options.X_init = problem.primal_domain.project(Vector::Zero(problem.dimension));
  require_same_size(options.X_init.size(), problem.dimension, "X_init");
  require(problem.primal_domain.contains(options.X_init, 1e-9), "X_init lies outside the primal domain");
  if (options.Y_init.empty()) options.Y_init = zero_duals(problem);
  require_same_size(static_cast<Index>(options.Y_init.size()), problem.num_blocks(), "Y_init");
  for (Index s = 0; s < problem.num_blocks(); ++s) {
    require_same_size(options.Y_init[s].size(), problem.blocks[s].size(), "Y_init block");
    require(problem.blocks[s].conj_domain.contains(options.Y_init[s], 1e-12), "Y_init outside its dual domain");
  }
}

}  // namespace detail

/// Algorithm: for k = 0..N, dual steps for every block with k % r_s == 0,
/// then one primal step with the mixture centers (eta_k rho_s, X^{k - r_s}).
inline RunResult run(const SaddleProblem& problem, const RateSchedule& schedule, const StepParams& params,
                     RunOptions options = {}) {
  problem.validate();
  detail::check_theta_free_blocks(problem, schedule);
  require(static_cast<Index>(params.tau.size()) == problem.num_blocks(), "run: need one tau per block");
  require(params.alpha == 1.0, "run: only alpha = 1 is supported");
  require(options.hooks.stride >= 1, "run: trace stride must be >= 1");
  require((schedule.N + 1) % schedule.lcm() == 0, "run: N + 1 must be a multiple of every rate");
  detail::prepare_initial_point(problem, options);
  const auto geom = problem.geometry();
  const Index S = problem.num_blocks();
  const auto t0 = std::chrono::steady_clock::now();

  History history(schedule.r_max(), options.X_init);
  std::vector<Vector> Y = options.Y_init;
  Vector kstar = adjoint_sum(problem, Y);
  ErgodicAccumulator erg;
  erg.init(problem.dimension, Y);

  RunResult result;
  result.N = schedule.N;
  result.dual_steps.assign(S, 0);
  result.dual_step_times.assign(S, {});
  std::mt19937_64 audit_rng(options.audit_seed);
  Vector X_k, X_hat_k;

  for (long k = 0; k <= schedule.N; ++k) {
    try {
      // Dual phase.
      for (Index s = 0; s < S; ++s) {
        const int r = schedule.r[s];
        if (k % r != 0) continue;
        const Vector X_tilde = extrapolate(history, params, k, r);
        const double W = window_weight(params, k, r);
        Vector y_new = dual_step(problem.blocks[s], params, s, X_tilde, W, Y[s]);
        kstar.noalias() += problem.blocks[s].K.apply_adjoint(y_new - Y[s]);
        Y[s] = std::move(y_new);
        ++result.dual_steps[s];
        result.dual_step_times[s].push_back(k);
      }
      if (options.kstar_audit_every > 0 && k % options.kstar_audit_every == 0) {
        const Vector fresh = adjoint_sum(problem, Y);
        result.max_kstar_drift = std::max(result.max_kstar_drift, (fresh - kstar).norm() / (1.0 + kstar.norm()));
        kstar = fresh;
      }

      // Primal phase.
      const double eta = params.eta_k(k);
      std::vector<WeightedPoint> centers;
      centers.reserve(S);
      for (Index s = 0; s < S; ++s) centers.push_back({eta * schedule.rho[s], history.X(k - schedule.r[s])});
      const Vector& x_prev = history.X(k - 1);
      SlidingConfig cfg = options.sliding;
      PrimalStep step = make_primal_step(problem, geom, cfg, centers, kstar, x_prev);
      result.oracle_calls += step.oracle_calls;
      if (cfg.audit && k % cfg.audit_stride == 0) {
        const double scale = 1.0 + step.X.norm() / std::sqrt(double(step.X.size()));
        for (int j = 0; j < cfg.audit_points; ++j) {
          const Vector Xs = sample_point(problem.primal_domain, step.X, scale, audit_rng);
          result.max_audit_excess =
              std::max(result.max_audit_excess, primal_step_excess(problem, geom, centers, kstar, x_prev, step, Xs));
        }
        ++result.audits;
      }

      const double theta = params.theta(k);
      erg.add(theta, step.X_hat, Y);
      X_k = step.X;
      X_hat_k = step.X_hat;
      history.push(k, std::move(step.X), std::move(step.X_hat));

      const bool emit = k % options.hooks.stride == 0 || k == schedule.N;
      if ((emit && options.hooks.metrics) || options.hooks.on_iteration) {
        IterationView view;
        view.k = k;
        view.problem = &problem;
        view.X = &X_k;
        view.X_hat = &X_hat_k;
        view.Y = &Y;
        view.ergodic = erg.point();
        view.dual_steps = &result.dual_steps;
        view.theta_sum = erg.total();
        view.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (options.hooks.on_iteration) options.hooks.on_iteration(view);
        if (emit && options.hooks.metrics) {
          MetricRow row = options.hooks.metrics(view);
          row.k = k;
          if (row.rounds.empty()) row.rounds = result.dual_steps;
          if (std::isnan(row.wall_seconds)) row.wall_seconds = view.elapsed;
          result.trace.push_back(std::move(row));
          if (options.hooks.stop && options.hooks.stop(result.trace.back())) {
            result.N = k;
            break;
          }
        }
      }
    } catch (const IterationError&) {
      throw;
    } catch (const std::exception& e) {
      throw IterationError(k, e.what());
    }
  }
  const Vector fresh = adjoint_sum(problem, Y);
  result.max_kstar_drift = std::max(result.max_kstar_drift, (fresh - kstar).norm() / (1.0 + kstar.norm()));
  result.Z = erg.point();
  result.theta_sum = erg.total();
  result.last.X = X_k;
  result.last.Y = Y;
  result.X_hat_last = X_hat_k;
  return result;
}

/// Default trace row: primal value and gap at the ergodic point. The gap
/// comparator is the fixed X_hat when given, else the best response to the
/// ergodic duals (linear F on a bounded domain), else left NaN.
inline std::function<MetricRow(const IterationView&)> default_metrics(std::optional<Vector> comparator = std::nullopt) {
  return [comparator](const IterationView& v) {
    MetricRow row;
    const SaddleProblem& p = *v.problem;
    const auto& Z = v.ergodic;
    double pv = p.objective(Z.X).value;
    for (const auto& b : p.blocks) {
      if (b.penalty == PenaltyKind::ScaledNorm) pv += b.lambda * (b.K.apply(Z.X) - b.shift).norm();
    }
    row.primal_value = pv;
    std::optional<Vector> Xh = comparator;
    if (!Xh && p.is_linear() && p.primal_domain.is_bounded()) Xh = best_response_comparator(p, Z.Y);
    if (Xh) {
      GapSup g = gap_sup_y(p, Z.X, Z.Y, *Xh);
      row.gap_sup = g.gap;
      row.violation = g.violation;
    } else {
      row.violation = char_zero_violation(p, Z.X);
    }
    return row;
  };
}

struct BaselineOptions {
  Vector X_init;
  std::vector<Vector> Y_init;
  /// Per-block update rates; block s updates only when k % r_s == 0 but still
  /// extrapolates with 2 X^{k-1} - X^{k-2} (naive delay). Empty = all ones.
  std::vector<int> rates;
  RunHooks hooks;
};

/// Classical PDHG with alpha = 1:
///   y_s^k = prox(-(K_s X_tilde - h_s), y_s^{k-1}, tau_s), X_tilde = 2 X^{k-1} - X^{k-2},
///   X^k = argmin <c + K^* Y^k, X> + eta D(X, X^{k-1}).
inline RunResult baseline_pdhg(const SaddleProblem& problem, double eta, const std::vector<double>& tau, long N,
                               BaselineOptions options = {}) {
  problem.validate();
  if (!problem.is_linear()) throw InvalidArgument("baseline_pdhg: unsupported for non-linear F (needs an exact prox)");
  require(eta > 0.0, "baseline_pdhg: eta must be positive");
  const Index S = problem.num_blocks();
  require(static_cast<Index>(tau.size()) == S, "baseline_pdhg: need one tau per block");
  if (options.rates.empty()) options.rates.assign(S, 1);
  require(static_cast<Index>(options.rates.size()) == S, "baseline_pdhg: need one rate per block");
  RunOptions init;
  init.X_init = options.X_init;
  init.Y_init = options.Y_init;
  detail::prepare_initial_point(problem, init);
  const auto geom = problem.geometry();
  const auto t0 = std::chrono::steady_clock::now();

  Vector X_prev2 = init.X_init, X_prev = init.X_init;
  std::vector<Vector> Y = init.Y_init;
  Vector kstar = adjoint_sum(problem, Y);
  ErgodicAccumulator erg;
  erg.init(problem.dimension, Y);
  RunResult result;
  result.N = N;
  result.dual_steps.assign(S, 0);
  result.dual_step_times.assign(S, {});
  for (long k = 0; k <= N; ++k) {
    try {
      const Vector X_tilde = 2.0 * X_prev - X_prev2;
      for (Index s = 0; s < S; ++s) {
        if (k % options.rates[s] != 0) continue;
        const auto& b = problem.blocks[s];
        const Vector g = b.shift - b.K.apply(X_tilde);
        Vector y_new = prox_dual(BregmanGeometry::euclidean(b.size()), b.conj_domain, g, Y[s], tau[s]);
        kstar.noalias() += b.K.apply_adjoint(y_new - Y[s]);
        Y[s] = std::move(y_new);
        ++result.dual_steps[s];
        result.dual_step_times[s].push_back(k);
      }
      if (k % 100 == 0) kstar = adjoint_sum(problem, Y);
      const WeightedPoint center{eta, X_prev};
      Vector X = prox_linear(geom, problem.primal_domain, *problem.linear_coefficient + kstar,
                             std::span<const WeightedPoint>(&center, 1));
      erg.add(1.0, X, Y);
      X_prev2 = std::move(X_prev);
      X_prev = std::move(X);
      const bool emit = k % options.hooks.stride == 0 || k == N;
      if ((emit && options.hooks.metrics) || options.hooks.on_iteration) {
        IterationView view;
        view.k = k;
        view.problem = &problem;
        view.X = &X_prev;
        view.X_hat = &X_prev;
        view.Y = &Y;
        view.ergodic = erg.point();
        view.dual_steps = &result.dual_steps;
        view.theta_sum = erg.total();
        view.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (options.hooks.on_iteration) options.hooks.on_iteration(view);
        if (emit && options.hooks.metrics) {
          MetricRow row = options.hooks.metrics(view);
          row.k = k;
          if (row.rounds.empty()) row.rounds = result.dual_steps;
          if (std::isnan(row.wall_seconds)) row.wall_seconds = view.elapsed;
          result.trace.push_back(std::move(row));
          if (options.hooks.stop && options.hooks.stop(result.trace.back())) {
            result.N = k;
            break;
          }
        }
      }
    } catch (const std::exception& e) {
      throw IterationError(k, e.what());
    }
  }
  result.Z = erg.point();
  result.theta_sum = erg.total();
  result.last.X = X_prev;
  result.last.Y = Y;
  result.X_hat_last = X_prev;
  return result;
}

}  // namespace mtpdhg
