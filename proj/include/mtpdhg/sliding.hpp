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

// Gradient sliding: T inner mirror-descent steps approximating
//
//   min_{u in U} <v, u> + phi(u) + sum_i eta_i D(u, x_i)
//
// and the primal step of the outer iteration built on top of it.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mtpdhg/geometry.hpp"
#include "mtpdhg/problem.hpp"

namespace mtpdhg {

enum class SlidingVariant {
  /// lambda_t = t + 1, beta_t = t / 2.
  Convex,
  /// lambda_t = t, beta_t = (t + 1) mu / (2 eta C) + (t - 1) / 2.
  StronglyConvex,
};

/// Weights for T inner steps. Index 0 is unused so that lambda[t], beta[t]
/// follow the 1-based inner counter.
struct SlidingSchedule {
  SlidingVariant variant = SlidingVariant::Convex;
  int T = 1;
  std::vector<double> lambda;
  std::vector<double> beta;
  double mu = 0.0;
  double eta = 0.0;
  double C = 1.0;

  static SlidingSchedule convex(int T, double mu = 0.0, double eta = 1.0, double C = 1.0) {
    require(T >= 1, "sliding schedule: T must be >= 1");
    SlidingSchedule s;
    s.variant = SlidingVariant::Convex;
    s.T = T;
    s.mu = mu;
    s.eta = eta;
    s.C = C;
    s.lambda.assign(T + 2, 0.0);
    s.beta.assign(T + 2, 0.0);
    for (int t = 1; t <= T + 1; ++t) {
      s.lambda[t] = t + 1.0;
      s.beta[t] = 0.5 * t;
    }
    return s;
  }

  static SlidingSchedule strongly_convex(int T, double mu, double eta, double C) {
    require(T >= 1, "sliding schedule: T must be >= 1");
    require(mu > 0.0, "strongly convex sliding schedule needs mu > 0");
    require(eta > 0.0 && std::isfinite(C) && C > 0.0, "strongly convex sliding schedule needs eta > 0 and finite C");
    SlidingSchedule s;
    s.variant = SlidingVariant::StronglyConvex;
    s.T = T;
    s.mu = mu;
    s.eta = eta;
    s.C = C;
    s.lambda.assign(T + 2, 0.0);
    s.beta.assign(T + 2, 0.0);
    for (int t = 1; t <= T + 1; ++t) {
      s.lambda[t] = t;
      s.beta[t] = (t + 1.0) * mu / (2.0 * eta * C) + 0.5 * (t - 1.0);
    }
    return s;
  }

  static SlidingSchedule make(SlidingVariant v, int T, double mu, double eta, double C) {
    return v == SlidingVariant::Convex ? convex(T, mu, eta, C) : strongly_convex(T, mu, eta, C);
  }

  /// Smallest value of lambda_t (1 + beta_t) eta - lambda_{t+1} (eta beta_{t+1} - mu / C)
  /// over t = 1..T, scaled by the right-hand side. Non-negative when the step
  /// condition holds.
  double condition_slack() const {
    double worst = std::numeric_limits<double>::infinity();
    const double muc = std::isfinite(C) ? mu / C : 0.0;
    for (int t = 1; t <= T; ++t) {
      const double rhs = lambda[t] * (1.0 + beta[t]) * eta;
      const double lhs = lambda[t + 1] * (eta * beta[t + 1] - muc);
      worst = std::min(worst, (rhs - lhs) / std::max(1.0, std::abs(rhs)));
    }
    return worst;
  }

  double lambda_sum() const {
    double s = 0.0;
    for (int t = 1; t <= T; ++t) s += lambda[t];
    return s;
  }
};

struct SlidingResult {
  Vector u_T;
  Vector u_hat_T;
  int inner_oracle_calls = 0;
};

/// Algorithm: u^0 = x_init; for t = 1..T
///   u^t = argmin <v + phi'(u^{t-1}), u> + sum_i eta_i D(u, x_i) + eta beta_t D(u, u^{t-1})
/// and u_hat = sum lambda_t u^t / sum lambda_t.
inline SlidingResult gradient_slide(const ObjectiveOracle& phi, const ConvexDomain& domain,
                                    const BregmanGeometry& geom, const SlidingSchedule& schedule,
                                    std::span<const WeightedPoint> centers, const Vector& v,
                                    const Vector& x_init) {
  double eta = 0.0;
  for (const auto& c : centers) eta += c.weight;
  require(eta > 0.0, "gradient_slide: sum of center weights must be positive");
  require(domain.contains(x_init, 1e-9), "gradient_slide: x_init outside the domain");
  require_same_size(v.size(), geom.dimension, "gradient_slide linear term");
  if (std::abs(schedule.eta - eta) > 1e-12 * std::max(1.0, eta)) {
    throw InvalidArgument("gradient_slide: schedule built for eta=" + std::to_string(schedule.eta) +
                          " but centers sum to " + std::to_string(eta));
  }
  if (schedule.condition_slack() < -1e-12) {
    throw InvalidArgument("gradient_slide: step condition on (lambda_t, beta_t) violated");
  }

  std::vector<WeightedPoint> mix(centers.begin(), centers.end());
  mix.push_back({0.0, x_init});
  const std::size_t last = mix.size() - 1;

  SlidingResult out;
  Vector u = x_init;
  Vector acc = Vector::Zero(u.size());
  for (int t = 1; t <= schedule.T; ++t) {
    const Vector g = v + phi(u).subgradient;
    ++out.inner_oracle_calls;
    mix[last].weight = eta * schedule.beta[t];
    mix[last].point = u;
    u = prox_linear(geom, domain, g, mix);
    acc.noalias() += schedule.lambda[t] * u;
  }
  out.u_T = u;
  out.u_hat_T = domain.project(acc / schedule.lambda_sum());
  return out;
}

/// Settings for the primal step of the outer iteration.
struct SlidingConfig {
  SlidingVariant variant = SlidingVariant::Convex;
  int T = 1;
  /// Check the approximate-minimizer inequality during runs.
  bool audit = false;
  int audit_stride = 10;
  int audit_points = 20;
};

/// Coefficients of delta_k(X) for one primal step.
struct DeltaAudit {
  bool exact = true;
  SlidingVariant variant = SlidingVariant::Convex;
  double eta = 0.0;
  int T = 0;
  double M = 0.0;
  /// Constant term of delta_k.
  double constant = 0.0;

  /// delta_k(X) given the previous iterate X^{k-1} and new iterate X^k.
  double value(const BregmanGeometry& geom, const Vector& X, const Vector& x_prev, const Vector& x_k) const {
    if (exact) return 0.0;
    if (variant == SlidingVariant::Convex) {
      const double w = 2.0 * eta / (double(T) * (T + 3.0));
      return w * (divergence(geom, X, x_prev) - divergence(geom, X, x_k)) + constant;
    }
    return constant;
  }

  /// Summed-form bound 4 C M^2 / (mu (T + 1)) for the strongly convex schedule.
  static double strongly_convex_summed_bound(double M, double mu, double C, int T) {
    return 4.0 * C * M * M / (mu * (T + 1.0));
  }
};

inline DeltaAudit make_delta_audit(const SlidingSchedule& s, double M) {
  DeltaAudit a;
  a.exact = false;
  a.variant = s.variant;
  a.eta = s.eta;
  a.T = s.T;
  a.M = M;
  if (s.variant == SlidingVariant::Convex) {
    a.constant = 4.0 * M * M / (s.eta * (s.T + 3.0));
  } else {
    double ratio = 0.0;
    for (int t = 1; t <= s.T; ++t) ratio += s.lambda[t] / s.beta[t];
    a.constant = (2.0 * M * M / s.eta) / (double(s.T) * (s.T + 1.0)) * ratio;
  }
  return a;
}

struct PrimalStep {
  Vector X;
  Vector X_hat;
  DeltaAudit audit;
  int oracle_calls = 0;
};

/// Phi^k(X) = F(X) + <linear_term, X> + sum_s eta_s D(X, center_s).
inline double primal_objective(const SaddleProblem& problem, const BregmanGeometry& geom,
                               std::span<const WeightedPoint> centers, const Vector& linear_term,
                               const Vector& X) {
  double v = problem.objective(X).value + linear_term.dot(X);
  for (const auto& c : centers) v += c.weight * divergence(geom, X, c.point);
  return v;
}

/// One primal update. Linear F is minimized exactly (X_hat = X); otherwise
/// the step runs gradient sliding from x_prev.
inline PrimalStep make_primal_step(const SaddleProblem& problem, const BregmanGeometry& geom,
                                   const SlidingConfig& config, std::span<const WeightedPoint> centers,
                                   const Vector& linear_term, const Vector& x_prev) {
  double eta = 0.0;
  for (const auto& c : centers) {
    require(c.weight >= 0.0, "primal step: negative center weight");
    eta += c.weight;
  }
  require(eta > 0.0, "primal step: center weights sum to zero");
  PrimalStep out;
  if (problem.is_linear()) {
    out.X = prox_linear(geom, problem.primal_domain, *problem.linear_coefficient + linear_term, centers);
    out.X_hat = out.X;
    return out;
  }
  const SlidingSchedule schedule =
      SlidingSchedule::make(config.variant, config.T, problem.mu, eta, geom.curvature);
  SlidingResult r = gradient_slide(problem.objective, problem.primal_domain, geom, schedule, centers,
                                   linear_term, x_prev);
  out.X = std::move(r.u_T);
  out.X_hat = std::move(r.u_hat_T);
  out.oracle_calls = r.inner_oracle_calls;
  out.audit = make_delta_audit(schedule, problem.M);
  return out;
}

/// Phi(X_hat) - [Phi(X) - (mu/C + eta) D(X, X^k) + delta(X)]; at most ~0 when
/// the approximate-minimizer property holds. The mu/C term is only claimed
/// by the strongly convex schedule.
inline double primal_step_excess(const SaddleProblem& problem, const BregmanGeometry& geom,
                                 std::span<const WeightedPoint> centers, const Vector& linear_term,
                                 const Vector& x_prev, const PrimalStep& step, const Vector& X) {
  double eta = 0.0;
  for (const auto& c : centers) eta += c.weight;
  double modulus = eta;
  if (!step.audit.exact && step.audit.variant == SlidingVariant::StronglyConvex) {
    modulus += problem.mu / geom.curvature;
  }
  const double lhs = primal_objective(problem, geom, centers, linear_term, step.X_hat);
  const double rhs = primal_objective(problem, geom, centers, linear_term, X) -
                     modulus * divergence(geom, X, step.X) + step.audit.value(geom, X, x_prev, step.X);
  return lhs - rhs;
}

}  // namespace mtpdhg
