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

#include <gtest/gtest.h>

#include "mtpdhg/metrics.hpp"
#include "mtpdhg/solver.hpp"
#include "test_support.hpp"

using namespace mtpdhg;
using namespace mtpdhg::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(GapSup, IdenticalConsensusPointIsZero) {
  auto topo = average_deviation_topology(3, 1);
  auto lp = lift_problem(std::vector<ObjectiveOracle>(3, linear_objective(vec({0.7}))), topo, {2.0},
                         ConvexDomain::box(vec({-1}), vec({1})), 0.0, 1.0);
  Vector X = Vector::Constant(3, 0.4);
  auto g = gap_sup_y(lp.problem, X, zero_duals(lp.problem), X);
  EXPECT_NEAR(g.gap, 0.0, 1e-15);
  EXPECT_EQ(g.violation, 0.0);
}

TEST(GapSup, SupportFunctionValue) {
  auto p = make_linear_problem(Vector::Zero(2), ConvexDomain::free_space(),
                               {DualBlock::scaled_norm(LinearOperator::from_dense(Matrix::Identity(2, 2)), 2.0)});
  auto g = gap_sup_y(p, vec({3, 4}), zero_duals(p), vec({0, 0}));
  EXPECT_NEAR(g.gap, 10.0, 1e-14);
}

TEST(GapSup, BilinearSaddle) {
  // min_{x in [-1,1]} max_{|y| <= 1} c x + y (k x - h): saddle at x* = h/k, y* = -c/k.
  const double c = 0.5, k = 2.0, h = 0.6;
  Matrix K(1, 1);
  K(0, 0) = k;
  auto p = make_linear_problem(vec({c}), ConvexDomain::box(vec({-1}), vec({1})),
                               {DualBlock::scaled_norm(LinearOperator::from_dense(K), 1.0, vec({h}))});
  const Vector xs = vec({h / k});
  const std::vector<Vector> ys{vec({-c / k})};
  EXPECT_NEAR(gap_sup_y(p, xs, ys, best_response_comparator(p, ys)).gap, 0.0, 1e-10);
  PrimalDualPoint zs{xs, ys};
  EXPECT_NEAR(gap(p, zs, zs), 0.0, 1e-15);
  const Vector xp = vec({h / k + 0.1});
  const std::vector<Vector> yp{vec({-c / k + 0.1})};
  EXPECT_GT(gap_sup_y(p, xp, yp, best_response_comparator(p, yp)).gap, 1e-3);
}

TEST(GapSup, CharZeroReportedSeparately) {
  auto p = make_linear_problem(Vector::Zero(2), ConvexDomain::free_space(),
                               {DualBlock::char_zero(LinearOperator::from_dense(Matrix::Identity(2, 2)))});
  auto g = gap_sup_y(p, vec({3, 4}), zero_duals(p), vec({0, 0}));
  EXPECT_NEAR(g.violation, 5.0, 1e-14);
  EXPECT_TRUE(std::isfinite(g.gap));
}

TEST(GapSup, InfeasibleComparatorThrows) {
  auto p = make_linear_problem(vec({1}), ConvexDomain::box(vec({0}), vec({1})),
                               {DualBlock::char_zero(LinearOperator::from_dense(Matrix::Identity(1, 1)))});
  EXPECT_THROW(gap_sup_y(p, vec({0.5}), zero_duals(p), vec({2.0})), InvalidArgument);
}

TEST(GapSup, WeakDualityAtReferenceOptimizer) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    auto f = planted_problem(rng, 6, 2, 3, 2.0);
    for (int j = 0; j < 100; ++j) {
      Vector X = f.problem.primal_domain.project(random_vec(rng, 6));
      std::vector<Vector> Y;
      for (const auto& b : f.problem.blocks) Y.push_back(b.conj_domain.project(random_vec(rng, b.size(), 2.0)));
      EXPECT_GE(gap_sup_y(f.problem, X, Y, f.X_star).gap, -1e-9);
    }
  }
}

TEST(GapSup, ErgodicGapUnderInverseKEnvelope) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    auto f = planted_problem(rng, 8, 3, 3, 2.0);
    auto sched = RateSchedule::make({1, 2, 1}, 399);
    const double DX = domain_divergence_bound(f.problem.primal_domain, Vector::Zero(8));
    const auto Dy = dual_divergence_bounds(f.problem);
    auto params = preset_mt(f.problem, sched, DX, Dy);
    RunOptions opt;
    opt.hooks.stride = 1;
    opt.hooks.metrics = default_metrics();
    auto res = run(f.problem, sched, params, opt);
    double bound = params.eta * sched.r_bar * DX;
    for (Index s = 0; s < 3; ++s) bound += 1.5 * params.tau[s] * sched.r[s] * Dy[s];
    ASSERT_EQ(res.trace.size(), 400u);
    for (const auto& row : res.trace) {
      EXPECT_GE(row.gap_sup, -1e-9);
      EXPECT_LE(double(row.k + 1) * row.gap_sup, bound * (1 + 1e-9)) << "trial " << trial << " k " << row.k;
    }
    EXPECT_LT(res.trace.back().gap_sup, 0.05 * res.trace.front().gap_sup);
  }
}

TEST(Kkt, OptimalPairIsZero) {
  Matrix A(1, 1);
  A(0, 0) = 1;
  EXPECT_NEAR(kkt_residual(A, vec({1}), vec({1}), vec({1}), vec({1})), 0.0, 1e-15);
}

TEST(Kkt, InfeasibilityOnly) {
  std::mt19937_64 rng(1);
  Matrix A = random_mat(rng, 3, 4);
  Vector b = vec({1, -2, 2});
  EXPECT_NEAR(kkt_residual(A, b, Vector::Ones(4), Vector::Zero(4), Vector::Zero(3)), 3.0, 1e-14);
}

TEST(Kkt, TermByTermOracle) {
  std::mt19937_64 rng(2);
  Matrix A = random_mat(rng, 5, 7);
  Vector b = random_vec(rng, 5), c = random_vec(rng, 7), X = random_vec(rng, 7), Y = random_vec(rng, 5);
  double t1 = 0, t2 = 0;
  for (Index i = 0; i < 5; ++i) {
    double r = -b[i];
    for (Index j = 0; j < 7; ++j) r += A(i, j) * X[j];
    t1 += r * r;
  }
  for (Index j = 0; j < 7; ++j) {
    double r = -c[j];
    for (Index i = 0; i < 5; ++i) r += A(i, j) * Y[i];
    if (r > 0) t2 += r * r;
  }
  const double t3 = std::max(0.0, c.dot(X) - b.dot(Y));
  EXPECT_NEAR(kkt_residual(A, b, c, X, Y), std::sqrt(t1 + t2 + t3), 1e-12);
}

TEST(Kkt, ZeroIffOptimalityOnConstructedPairs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int t = 0; t < 10; ++t) {
    // Complementary pair: X supported on J, reduced costs zero there.
    Matrix A = random_mat(rng, 3, 6);
    Vector Y = random_vec(rng, 3);
    Vector X = Vector::Zero(6), c = A.transpose() * Y;
    for (Index j = 0; j < 6; ++j) {
      if (j < 3) {
        X[j] = u(rng);
      } else {
        c[j] += u(rng);
      }
    }
    Vector b = A * X;
    EXPECT_LE(kkt_residual(A, b, c, X, Y), 1e-7);  // duality term enters unsquared
    EXPECT_GT(kkt_residual(A, b, c, X, Y + Vector::Constant(3, 0.05)), 1e-4);
  }
}

TEST(EpsDelta, ConsensusOptimum) {
  auto topo = average_deviation_topology(2, 1);
  auto q0 = [](const Vector& x) { return OracleValue{0.5 * x[0] * x[0], x}; };
  auto q1 = [](const Vector& x) { return OracleValue{0.5 * (x[0] - 1) * (x[0] - 1), x - Vector::Ones(1)}; };
  auto lp = lift_problem({q0, q1}, topo, {1.0}, ConvexDomain::free_space(), 1.0, 1.0);
  const double Fstar = 0.25;
  auto e = eps_delta_check(topo, lp.problem, Vector::Constant(2, 0.5), Fstar, 1.0);
  EXPECT_NEAR(e.eps, 0.0, 1e-15);
  EXPECT_LE(e.delta, 1e-10);
  auto e2 = eps_delta_check(topo, lp.problem, Vector::Constant(2, 0.9), Fstar, 1.0);
  EXPECT_GT(e2.eps, 0.0);
  EXPECT_EQ(e2.delta, 0.0);
  auto e3 = eps_delta_check(topo, lp.problem, vec({0.0, 1.0}), Fstar, 1.0);
  EXPECT_LT(e3.eps, 0.0);
  EXPECT_NEAR(e3.delta, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(e3.eps_projected, 0.0, 1e-15);
}

TEST(RateFit, ExactPowerLaws) {
  std::vector<double> k, a, b;
  for (int i = 1; i <= 100; ++i) {
    k.push_back(i);
    a.push_back(7.0 / i);
    b.push_back(3.0 / (double(i) * i));
  }
  EXPECT_NEAR(rate_fit(k, a), -1.0, 0.01);
  EXPECT_NEAR(rate_fit(k, b), -2.0, 0.01);
}

TEST(RateFit, Errors) {
  std::vector<double> k(10, 1.0), v(10, 1.0);
  EXPECT_THROW(rate_fit(k, v), InvalidArgument);
  std::vector<double> k2, v2;
  for (int i = 1; i <= 30; ++i) {
    k2.push_back(i);
    v2.push_back(i > 26 ? 1.0 / i : -1.0);
  }
  EXPECT_THROW(rate_fit(k2, v2), InvalidArgument);
  v2.assign(30, 0.0);
  for (int i = 15; i < 30; ++i) v2[i] = (i % 2) ? 1.0 / (i + 1) : -1.0;
  EXPECT_NO_THROW(rate_fit(k2, v2));
}

TEST(RateFit, TraceColumn) {
  std::vector<MetricRow> trace;
  for (int i = 0; i <= 40; ++i) {
    MetricRow r;
    r.k = i * 10;
    r.gap_sup = i == 0 ? 1.0 : 5.0 / (i * 10.0);
    trace.push_back(r);
  }
  EXPECT_NEAR(rate_fit(trace, "gap_sup"), -1.0, 1e-9);
  EXPECT_THROW(rate_fit(trace, "nope"), InvalidArgument);
}
