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

// Performance measures: duality gap, KKT residual, (eps, delta) checks and
// log-log rate fits over traces.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mtpdhg/consensus.hpp"
#include "mtpdhg/problem.hpp"

namespace mtpdhg {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One trace row. Unused measures stay NaN.
struct MetricRow {
  long k = 0;
  double primal_value = kNaN;
  double gap_sup = kNaN;
  /// sum_s ||K_s X - h_s|| over CharZero blocks.
  double violation = kNaN;
  double kkt = kNaN;
  double consensus_violation = kNaN;
  double cum_cost = kNaN;
  double wall_seconds = kNaN;
  std::vector<long> rounds;
  /// Extra named columns, written after the fixed ones.
  std::vector<std::pair<std::string, double>> extra;

  double column(const std::string& name) const {
    if (name == "k") return double(k);
    if (name == "primal_value") return primal_value;
    if (name == "gap_sup") return gap_sup;
    if (name == "violation") return violation;
    if (name == "kkt") return kkt;
    if (name == "consensus_violation") return consensus_violation;
    if (name == "cum_cost") return cum_cost;
    if (name == "wall_seconds") return wall_seconds;
    for (const auto& [n, v] : extra)
      if (n == name) return v;
    throw InvalidArgument("unknown trace column '" + name + "'");
  }
};

/// G(X, Y; X', Y') = L(X, Y') - L(X', Y).
inline double gap(const SaddleProblem& problem, const PrimalDualPoint& Z, const PrimalDualPoint& Zp) {
  return lagrangian(problem, Z.X, Zp.Y) - lagrangian(problem, Zp.X, Z.Y);
}

struct GapSup {
  /// sup over feasible Y' of G(X, Y; X_hat, Y') with CharZero blocks left out.
  double gap = 0.0;
  /// sum_s ||K_s X - h_s|| over CharZero blocks (the sup is +inf unless 0).
  double violation = 0.0;
};

/// [F(X) + sum_{ScaledNorm} lambda_s ||K_s X - h_s||] - [F(X_hat) + sum_s <K_s X_hat - h_s, y_s>].
inline GapSup gap_sup_y(const SaddleProblem& problem, const Vector& X, const std::vector<Vector>& Y,
                        const Vector& X_hat) {
  require_same_size(static_cast<Index>(Y.size()), problem.num_blocks(), "gap_sup_y duals");
  if (!problem.primal_domain.contains(X_hat, 1e-9)) {
    throw InvalidArgument("gap_sup_y: comparator X_hat lies outside the primal domain");
  }
  GapSup out;
  double upper = problem.objective(X).value;
  for (const auto& b : problem.blocks) {
    const double r = (b.K.apply(X) - b.shift).norm();
    if (b.penalty == PenaltyKind::ScaledNorm) {
      upper += b.lambda * r;
    } else {
      out.violation += r;
    }
  }
  out.gap = upper - lagrangian(problem, X_hat, Y);
  return out;
}

/// argmin_{X in domain} L(X, Y) for linear F on a bounded domain; with it,
/// gap_sup_y becomes the full primal-dual gap.
inline Vector best_response_comparator(const SaddleProblem& problem, const std::vector<Vector>& Y) {
  require(problem.is_linear(), "best_response_comparator: F must be linear");
  require(problem.primal_domain.is_bounded(), "best_response_comparator: primal domain must be bounded");
  return problem.primal_domain.linear_minimizer(*problem.linear_coefficient + adjoint_sum(problem, Y));
}

/// (||AX - b||^2 + ||[A^T Y - c]_+||^2 + [c^T X - b^T Y]_+)^{1/2}.
inline double kkt_residual(const Matrix& A, const Vector& b, const Vector& c, const Vector& X, const Vector& Y) {
  require_same_size(A.rows(), b.size(), "kkt_residual b");
  require_same_size(A.cols(), c.size(), "kkt_residual c");
  require_same_size(A.cols(), X.size(), "kkt_residual X");
  require_same_size(A.rows(), Y.size(), "kkt_residual Y");
  const double primal = (A * X - b).squaredNorm();
  const double dual = (A.transpose() * Y - c).cwiseMax(0.0).squaredNorm();
  const double duality = std::max(0.0, c.dot(X) - b.dot(Y));
  return std::sqrt(primal + dual + duality);
}

/// ||(I - Pi) X||.
inline double consensus_violation(const Topology& topo, const Vector& X) {
  return deviation_apply(topo, X).norm();
}

struct EpsDelta {
  /// F(X) - F*.
  double eps = 0.0;
  /// ||(I - Pi) X||.
  double delta = 0.0;
  /// F(Pi X) - F*.
  double eps_projected = 0.0;
  /// F(X) + sum_s R_s(K_s X) - F*; a penalized gap eps gives an
  /// (eps, eps / xi) solution.
  double eps_penalized = 0.0;
  double delta_claim = 0.0;
};

inline EpsDelta eps_delta_check(const Topology& topo, const SaddleProblem& lifted, const Vector& X,
                                double F_star_ref, double xi) {
  require(xi > 0.0, "eps_delta_check: xi must be positive");
  EpsDelta out;
  out.eps = lifted.objective(X).value - F_star_ref;
  out.delta = consensus_violation(topo, X);
  const Vector PX = consensus_average(X, topo.m, topo.dbar);
  out.eps_projected = lifted.objective(PX).value - F_star_ref;
  out.eps_penalized = primal_value(lifted, X) - F_star_ref;
  out.delta_claim = std::max(0.0, out.eps_penalized) / xi;
  return out;
}

/// Least-squares slope of log(value) against log(k) over the last half of
/// the rows; rows with k <= 0 or value <= 0 (or non-finite) are dropped.
inline double rate_fit(const std::vector<double>& k, const std::vector<double>& value) {
  require_same_size(static_cast<Index>(k.size()), static_cast<Index>(value.size()), "rate_fit columns");
  require(k.size() >= 20, "rate_fit: need at least 20 rows");
  std::vector<double> lx, ly;
  for (std::size_t i = k.size() / 2; i < k.size(); ++i) {
    if (k[i] > 0.0 && value[i] > 0.0 && std::isfinite(value[i])) {
      lx.push_back(std::log(k[i]));
      ly.push_back(std::log(value[i]));
    }
  }
  require(lx.size() >= 5, "rate_fit: fewer than 5 positive points in the last half of the trace");
  const double n = double(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  require(sxx > 0.0, "rate_fit: degenerate k range");
  return sxy / sxx;
}

inline double rate_fit(const std::vector<MetricRow>& trace, const std::string& column) {
  std::vector<double> k, v;
  for (const auto& row : trace) {
    k.push_back(double(row.k));
    v.push_back(row.column(column));
  }
  return rate_fit(k, v);
}

}  // namespace mtpdhg
