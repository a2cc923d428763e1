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

// Saddle-point problem model:
//
//   min_{X in primal_domain} max_{y_s} F(X) + sum_s <K_s X, y_s> - R_s^*(y_s)
//
// with R_s^*(y) = <shift_s, y> + indicator(conj_domain_s)(y). The shift lets
// equality-constrained problems such as A X = b be written with a constant
// folded into the dual linear term.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/SparseCore>

#include "mtpdhg/error.hpp"
#include "mtpdhg/geometry.hpp"

namespace mtpdhg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Dense storage is used below this many entries.
inline constexpr Index kDenseEntryLimit = 10000;

/// A real matrix with forward and adjoint products. Small operators are kept
/// dense; larger ones in compressed-row storage.
class LinearOperator {
 public:
  LinearOperator() : storage_(Matrix(0, 0)) {}

  static LinearOperator from_dense(const Matrix& m) {
    if (m.size() < kDenseEntryLimit) return LinearOperator(Storage(m));
    return LinearOperator(Storage(SparseMatrix(m.sparseView())));
  }

  static LinearOperator from_sparse(SparseMatrix m) {
    m.makeCompressed();
    if (m.size() < kDenseEntryLimit) return LinearOperator(Storage(Matrix(m)));
    return LinearOperator(Storage(std::move(m)));
  }

  Index rows() const {
    return std::visit([](const auto& m) { return static_cast<Index>(m.rows()); }, storage_);
  }
  Index cols() const {
    return std::visit([](const auto& m) { return static_cast<Index>(m.cols()); }, storage_);
  }
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }

  Vector apply(const Vector& x) const {
    require_same_size(x.size(), cols(), "operator apply");
    return std::visit([&](const auto& m) -> Vector { return m * x; }, storage_);
  }

  Vector apply_adjoint(const Vector& y) const {
    require_same_size(y.size(), rows(), "operator adjoint");
    return std::visit([&](const auto& m) -> Vector { return m.transpose() * y; }, storage_);
  }

  Matrix to_dense() const {
    return std::visit([](const auto& m) -> Matrix { return Matrix(m); }, storage_);
  }

  SparseMatrix to_sparse() const {
    if (const auto* s = std::get_if<SparseMatrix>(&storage_)) return *s;
    SparseMatrix out = std::get<Matrix>(storage_).sparseView();
    out.makeCompressed();
    return out;
  }

  /// Dense copy of the column range [start, start + width).
  Matrix column_block(Index start, Index width) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->middleCols(start, width);
    const auto& s = std::get<SparseMatrix>(storage_);
    Matrix out = Matrix::Zero(s.rows(), width);
    for (Index r = 0; r < s.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(s, r); it; ++it) {
        if (it.col() >= start && it.col() < start + width) out(r, it.col() - start) = it.value();
      }
    }
    return out;
  }

  double max_abs() const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->size() ? d->cwiseAbs().maxCoeff() : 0.0;
    const auto& s = std::get<SparseMatrix>(storage_);
    double best = 0.0;
    for (Index k = 0; k < s.nonZeros(); ++k) best = std::max(best, std::abs(s.valuePtr()[k]));
    return best;
  }

 private:
  using Storage = std::variant<Matrix, SparseMatrix>;
  explicit LinearOperator(Storage s) : storage_(std::move(s)) {}
  Storage storage_;
};

/// Power-iteration estimate of ||K||_2, inflated by 1% so that step-size
/// conditions written with an upper bound on the operator norm keep a margin.
inline double operator_norm_estimate(const LinearOperator& op, int iterations) {
  require(iterations >= 1, "operator_norm_estimate: iterations must be >= 1");
  if (op.rows() == 0 || op.cols() == 0 || op.max_abs() == 0.0) return 0.0;
  std::mt19937_64 rng(0x6d747064ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(op.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = op.apply_adjoint(op.apply(v));
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
  }
  sigma = op.apply(v).norm();
  return 1.01 * sigma;
}

enum class PenaltyKind {
  /// R_s is the indicator of {shift}; R_s^* is linear on all of R^{n_s}.
  CharZero,
  /// R_s(z) = lambda ||z - shift||_2; R_s^* restricted to Ball(lambda).
  ScaledNorm,
};

inline constexpr int kKappaPowerIterations = 200;

struct DualBlock {
  LinearOperator K;
  PenaltyKind penalty = PenaltyKind::CharZero;
  double lambda = 0.0;
  Vector shift;
  ConvexDomain conj_domain;
  /// Upper bound on sup_{||y|| <= 1} ||K^* y||.
  double kappa_tilde = 0.0;
  /// sup_{y in conj_domain} D(y, 0); infinite for CharZero.
  double dual_radius_sq = std::numeric_limits<double>::infinity();

  Index size() const { return K.rows(); }

  static DualBlock char_zero(LinearOperator K, Vector shift = Vector()) {
    DualBlock b;
    b.penalty = PenaltyKind::CharZero;
    b.shift = shift.size() ? std::move(shift) : Vector::Zero(K.rows());
    require_same_size(b.shift.size(), K.rows(), "char_zero shift");
    b.conj_domain = ConvexDomain::free_space();
    b.kappa_tilde = operator_norm_estimate(K, kKappaPowerIterations);
    b.K = std::move(K);
    return b;
  }

  static DualBlock scaled_norm(LinearOperator K, double lambda, Vector shift = Vector()) {
    require(lambda > 0.0 && std::isfinite(lambda), "scaled_norm: lambda must be positive");
    DualBlock b;
    b.penalty = PenaltyKind::ScaledNorm;
    b.lambda = lambda;
    b.shift = shift.size() ? std::move(shift) : Vector::Zero(K.rows());
    require_same_size(b.shift.size(), K.rows(), "scaled_norm shift");
    b.conj_domain = ConvexDomain::origin_ball(K.rows(), lambda);
    b.kappa_tilde = operator_norm_estimate(K, kKappaPowerIterations);
    b.dual_radius_sq = 0.5 * lambda * lambda;
    b.K = std::move(K);
    return b;
  }

  /// sup_{y in dom R^*} <v, y> - <shift, y> restricted part, i.e. R_s(v).
  double penalty_value(const Vector& Kx) const {
    const Vector r = Kx - shift;
    if (penalty == PenaltyKind::ScaledNorm) return lambda * r.norm();
    return r.norm() <= 1e-10 * (1.0 + shift.norm()) ? 0.0 : std::numeric_limits<double>::infinity();
  }
};

struct OracleValue {
  double value;
  Vector subgradient;
};

using ObjectiveOracle = std::function<OracleValue(const Vector&)>;

/// F(X) = <c, X>.
inline ObjectiveOracle linear_objective(Vector c) {
  return [c = std::move(c)](const Vector& x) {
    require_same_size(x.size(), c.size(), "linear objective");
    return OracleValue{c.dot(x), c};
  };
}

/// f(x) = (1/n) sum_l [1 - y_l <b_l, x>]_+ + (mu/2) ||x||^2 over the rows b_l.
inline ObjectiveOracle hinge_ridge_objective(SparseMatrix features, Vector labels, double mu) {
  require_same_size(features.rows(), labels.size(), "hinge objective labels");
  require(features.rows() > 0, "hinge objective needs at least one sample");
  require(mu >= 0.0, "hinge objective: mu must be >= 0");
  features.makeCompressed();
  auto oracle = [y = std::move(labels), mu](const auto& B) {
    return [B, y, mu](const Vector& x) {
      require_same_size(x.size(), B.cols(), "hinge objective");
      const double inv_n = 1.0 / static_cast<double>(B.rows());
      const Vector margins = B * x;
      Vector active = Vector::Zero(B.rows());
      double loss = 0.0;
      for (Index l = 0; l < B.rows(); ++l) {
        const double slack = 1.0 - y[l] * margins[l];
        if (slack > 0.0) {
          loss += slack;
          active[l] = -y[l] * inv_n;
        }
      }
      Vector grad = B.transpose() * active;
      grad.noalias() += mu * x;
      return OracleValue{loss * inv_n + 0.5 * mu * x.squaredNorm(), std::move(grad)};
    };
  };
  // dense storage pays off once a quarter of the entries are filled
  if (4 * features.nonZeros() >= features.rows() * features.cols()) return oracle(Matrix(features));
  return oracle(features);
}

/// A saddle problem with block-decomposable dual.
struct SaddleProblem {
  Index dimension = 0;
  ConvexDomain primal_domain;
  ObjectiveOracle objective;
  std::vector<DualBlock> blocks;
  /// Strong-convexity modulus of F.
  double mu = 0.0;
  /// Constant in F(X) - F(X') - <F'(X'), X - X'> <= M ||X - X'||. This is M
  /// itself, not a subgradient bound M' (for which M = 2 M').
  double M = 0.0;
  /// Set iff F is linear; F(X) = <linear_coefficient, X>.
  std::optional<Vector> linear_coefficient;

  Index num_blocks() const { return static_cast<Index>(blocks.size()); }
  bool is_linear() const { return linear_coefficient.has_value(); }

  void validate() const {
    require(dimension > 0, "problem dimension must be positive");
    require(!blocks.empty(), "problem needs at least one dual block");
    require(static_cast<bool>(objective), "problem objective oracle is empty");
    require(mu >= 0.0 && M >= 0.0, "problem constants mu and M must be >= 0");
    for (const auto& b : blocks) require_same_size(b.K.cols(), dimension, "dual block operator");
    if (is_linear()) {
      require_same_size(linear_coefficient->size(), dimension, "linear coefficient");
      require(mu == 0.0, "linear objective must have mu = 0");
    }
  }

  /// Primal space geometry (Euclidean).
  BregmanGeometry geometry() const { return BregmanGeometry::euclidean(dimension); }
};

inline SaddleProblem make_linear_problem(Vector c, ConvexDomain domain, std::vector<DualBlock> blocks) {
  SaddleProblem p;
  p.dimension = c.size();
  p.primal_domain = std::move(domain);
  p.objective = linear_objective(c);
  p.linear_coefficient = std::move(c);
  p.blocks = std::move(blocks);
  p.validate();
  return p;
}

/// Primal and dual point (X, (y_s)).
struct PrimalDualPoint {
  Vector X;
  std::vector<Vector> Y;
};

inline std::vector<Vector> zero_duals(const SaddleProblem& problem) {
  std::vector<Vector> out;
  out.reserve(problem.blocks.size());
  for (const auto& b : problem.blocks) out.push_back(Vector::Zero(b.size()));
  return out;
}

/// sum_s ||K_s X - shift_s|| over CharZero blocks.
inline double char_zero_violation(const SaddleProblem& problem, const Vector& X) {
  double total = 0.0;
  for (const auto& b : problem.blocks) {
    if (b.penalty == PenaltyKind::CharZero) total += (b.K.apply(X) - b.shift).norm();
  }
  return total;
}

/// F(X) + sum_s R_s(K_s X); +infinity when a CharZero block is violated.
inline double primal_value(const SaddleProblem& problem, const Vector& X) {
  require_same_size(X.size(), problem.dimension, "primal_value");
  double value = problem.objective(X).value;
  for (const auto& b : problem.blocks) value += b.penalty_value(b.K.apply(X));
  return value;
}

/// F(X) + sum_s <K_s X, y_s> - R_s^*(y_s) for duals inside their domains.
inline double lagrangian(const SaddleProblem& problem, const Vector& X, const std::vector<Vector>& Y) {
  require_same_size(static_cast<Index>(Y.size()), problem.num_blocks(), "lagrangian duals");
  double value = problem.objective(X).value;
  for (std::size_t s = 0; s < Y.size(); ++s) {
    const auto& b = problem.blocks[s];
    require_same_size(Y[s].size(), b.size(), "lagrangian dual block");
    if (!b.conj_domain.contains(Y[s], 1e-9)) {
      throw InvalidArgument("lagrangian: dual block " + std::to_string(s) + " outside its domain");
    }
    value += (b.K.apply(X) - b.shift).dot(Y[s]);
  }
  return value;
}

/// sum_s K_s^* y_s.
inline Vector adjoint_sum(const SaddleProblem& problem, const std::vector<Vector>& Y) {
  Vector out = Vector::Zero(problem.dimension);
  for (std::size_t s = 0; s < Y.size(); ++s) out += problem.blocks[s].K.apply_adjoint(Y[s]);
  return out;
}

}  // namespace mtpdhg
