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

// Distance-generating functions, Bregman divergences, convex domains and the
// two exactly solvable prox subproblems used by the primal and dual updates.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <variant>

#include "mtpdhg/error.hpp"

namespace mtpdhg {

/// Membership tolerance for projected points (relative to max(1, scale)).
inline constexpr double kDomainTolerance = 1e-12;

enum class DgfKind { EuclideanHalfSq };

/// A distance-generating function w on R^dimension with modulus 1 and the
/// curvature bound C such that D(x, x') <= (C/2) ||x - x'||^2.
struct BregmanGeometry {
  Index dimension = 0;
  DgfKind dgf = DgfKind::EuclideanHalfSq;
  double modulus = 1.0;
  double curvature = 1.0;

  static BregmanGeometry euclidean(Index dimension) {
    require(dimension > 0, "geometry dimension must be positive");
    return BregmanGeometry{dimension, DgfKind::EuclideanHalfSq, 1.0, 1.0};
  }
};

inline double potential(const BregmanGeometry& geom, const Vector& x) {
  require_same_size(x.size(), geom.dimension, "potential");
  return 0.5 * x.squaredNorm();
}

inline Vector potential_gradient(const BregmanGeometry& geom, const Vector& x) {
  require_same_size(x.size(), geom.dimension, "potential_gradient");
  return x;
}

/// D(x, z) = w(x) - w(z) - <grad w(z), x - z>.
inline double divergence(const BregmanGeometry& geom, const Vector& x, const Vector& z) {
  require_same_size(x.size(), geom.dimension, "divergence");
  require_same_size(z.size(), geom.dimension, "divergence");
  return 0.5 * (x - z).squaredNorm();
}

/// A closed convex set with a closed-form Euclidean projection.
class ConvexDomain {
 public:
  struct FreeSpace {};
  struct Ball {
    double radius;
    Vector center;
  };
  struct Box {
    Vector lower;
    Vector upper;
  };
  struct NonnegativeOrthant {};
  /// Cartesian product of origin-centred balls, one per consecutive block.
  struct ProductBall {
    Index block_size;
    double radius;
  };

  using Kind = std::variant<FreeSpace, Ball, Box, NonnegativeOrthant, ProductBall>;

  ConvexDomain() : kind_(FreeSpace{}) {}

  static ConvexDomain free_space() { return ConvexDomain(FreeSpace{}); }
  static ConvexDomain nonnegative_orthant() { return ConvexDomain(NonnegativeOrthant{}); }

  static ConvexDomain ball(double radius, Vector center) {
    require(radius >= 0.0 && std::isfinite(radius), "ball radius must be finite and >= 0");
    return ConvexDomain(Ball{radius, std::move(center)});
  }

  static ConvexDomain origin_ball(Index dimension, double radius) {
    return ball(radius, Vector::Zero(dimension));
  }

  static ConvexDomain box(Vector lower, Vector upper) {
    require_same_size(lower.size(), upper.size(), "box bounds");
    require((lower.array() <= upper.array()).all(), "box lower bound exceeds upper bound");
    return ConvexDomain(Box{std::move(lower), std::move(upper)});
  }

  static ConvexDomain product_ball(Index block_size, double radius) {
    require(block_size > 0, "product ball block size must be positive");
    require(radius >= 0.0 && std::isfinite(radius), "ball radius must be finite and >= 0");
    return ConvexDomain(ProductBall{block_size, radius});
  }

  const Kind& kind() const { return kind_; }

  bool is_free() const { return std::holds_alternative<FreeSpace>(kind_); }

  bool is_bounded() const {
    return std::holds_alternative<Ball>(kind_) || std::holds_alternative<Box>(kind_) ||
           std::holds_alternative<ProductBall>(kind_);
  }

  /// Radius for origin-centred balls; infinity for unbounded kinds.
  double ball_radius() const {
    if (const auto* b = std::get_if<Ball>(&kind_)) return b->radius;
    if (const auto* b = std::get_if<ProductBall>(&kind_)) return b->radius;
    return std::numeric_limits<double>::infinity();
  }

  Vector project(const Vector& x) const {
    return std::visit([&](const auto& k) { return project_impl(k, x); }, kind_);
  }

  bool contains(const Vector& x, double tol = kDomainTolerance) const {
    return std::visit([&](const auto& k) { return contains_impl(k, x, tol); }, kind_);
  }

  /// argmin_{x in domain} <g, x>; only defined for bounded domains.
  Vector linear_minimizer(const Vector& g) const {
    require(is_bounded(), "ill-posed prox: zero proximal weight on an unbounded domain");
    return std::visit([&](const auto& k) { return linmin_impl(k, g); }, kind_);
  }

 private:
  explicit ConvexDomain(Kind k) : kind_(std::move(k)) {}

  static Vector project_impl(const FreeSpace&, const Vector& x) { return x; }
  static Vector project_impl(const NonnegativeOrthant&, const Vector& x) {
    return x.cwiseMax(0.0);
  }
  static Vector project_impl(const Box& b, const Vector& x) {
    require_same_size(x.size(), b.lower.size(), "box projection");
    return x.cwiseMax(b.lower).cwiseMin(b.upper);
  }
  static Vector project_impl(const Ball& b, const Vector& x) {
    require_same_size(x.size(), b.center.size(), "ball projection");
    Vector diff = x - b.center;
    const double n = diff.norm();
    if (n <= b.radius) return x;
    return b.center + (b.radius / n) * diff;
  }
  static Vector project_impl(const ProductBall& b, const Vector& x) {
    require(x.size() % b.block_size == 0, "product ball: size is not a multiple of the block");
    Vector out = x;
    for (Index start = 0; start < x.size(); start += b.block_size) {
      auto seg = out.segment(start, b.block_size);
      const double n = seg.norm();
      if (n > b.radius) seg *= b.radius / n;
    }
    return out;
  }

  static bool contains_impl(const FreeSpace&, const Vector& x, double) {
    return x.allFinite();
  }
  static bool contains_impl(const NonnegativeOrthant&, const Vector& x, double tol) {
    return x.allFinite() && (x.array() >= -tol).all();
  }
  static bool contains_impl(const Box& b, const Vector& x, double tol) {
    if (x.size() != b.lower.size()) return false;
    for (Index i = 0; i < x.size(); ++i) {
      const double slack = tol * std::max(1.0, std::max(std::abs(b.lower[i]), std::abs(b.upper[i])));
      if (!(x[i] >= b.lower[i] - slack && x[i] <= b.upper[i] + slack)) return false;
    }
    return true;
  }
  static bool contains_impl(const Ball& b, const Vector& x, double tol) {
    if (x.size() != b.center.size()) return false;
    return (x - b.center).norm() <= b.radius + tol * std::max(1.0, b.radius);
  }
  static bool contains_impl(const ProductBall& b, const Vector& x, double tol) {
    if (x.size() % b.block_size != 0) return false;
    for (Index start = 0; start < x.size(); start += b.block_size) {
      if (x.segment(start, b.block_size).norm() > b.radius + tol * std::max(1.0, b.radius)) {
        return false;
      }
    }
    return true;
  }

  template <class K>
  static Vector linmin_impl(const K&, const Vector& g) {
    return Vector::Zero(g.size());
  }
  static Vector linmin_impl(const Ball& b, const Vector& g) {
    const double n = g.norm();
    if (n == 0.0) return b.center;
    return b.center - (b.radius / n) * g;
  }
  static Vector linmin_impl(const Box& b, const Vector& g) {
    Vector out(g.size());
    for (Index i = 0; i < g.size(); ++i) {
      out[i] = g[i] > 0.0 ? b.lower[i] : (g[i] < 0.0 ? b.upper[i] : 0.5 * (b.lower[i] + b.upper[i]));
    }
    return out;
  }
  static Vector linmin_impl(const ProductBall& b, const Vector& g) {
    Vector out = Vector::Zero(g.size());
    for (Index start = 0; start < g.size(); start += b.block_size) {
      const double n = g.segment(start, b.block_size).norm();
      if (n > 0.0) out.segment(start, b.block_size) = -(b.radius / n) * g.segment(start, b.block_size);
    }
    return out;
  }

  Kind kind_;
};

/// A point of the domain near center: projection of center + scale * N(0, I).
template <class Rng>
Vector sample_point(const ConvexDomain& domain, const Vector& center, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(center.size());
  for (Index i = 0; i < x.size(); ++i) x[i] = center[i] + scale * normal(rng);
  return domain.project(x);
}

/// One term w * D(x, point) of a Bregman mixture.
struct WeightedPoint {
  double weight;
  Vector point;
};

/// argmin_{x in domain} <g, x> + sum_i w_i D(x, p_i).
inline Vector prox_linear(const BregmanGeometry& geom, const ConvexDomain& domain, const Vector& g,
                          std::span<const WeightedPoint> centers) {
  require_same_size(g.size(), geom.dimension, "prox_linear gradient");
  double total = 0.0;
  Vector weighted = Vector::Zero(geom.dimension);
  for (const auto& c : centers) {
    require(c.weight >= 0.0, "prox_linear: negative center weight");
    require_same_size(c.point.size(), geom.dimension, "prox_linear center");
    if (c.weight == 0.0) continue;
    total += c.weight;
    weighted.noalias() += c.weight * c.point;
  }
  if (total == 0.0) {
    if (!domain.is_bounded()) throw InvalidArgument("ill-posed prox: sum of center weights is zero");
    return domain.linear_minimizer(g);
  }
  return domain.project((weighted - g) / total);
}

/// argmin_{y in domain} <g, y> + tau D(y, y_prev).
inline Vector prox_dual(const BregmanGeometry& geom, const ConvexDomain& domain, const Vector& g,
                        const Vector& y_prev, double tau) {
  require(tau > 0.0, "prox_dual: tau must be positive");
  require_same_size(g.size(), geom.dimension, "prox_dual gradient");
  require_same_size(y_prev.size(), geom.dimension, "prox_dual previous iterate");
  if (!domain.contains(y_prev, 1e-9)) {
    throw InvalidArgument("prox_dual: previous dual iterate lies outside its domain");
  }
  return domain.project(y_prev - g / tau);
}

}  // namespace mtpdhg
