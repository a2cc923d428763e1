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

StepParams mt_params(double eta, std::vector<double> tau) {
  StepParams p;
  p.eta = eta;
  p.tau = std::move(tau);
  return p;
}

// Independent vanilla PDHG on an LP in CharZero form, recording iterates.
std::vector<Vector> vanilla_lp(const LpFixture& f, Index S, double eta, const std::vector<double>& tau, long N) {
  const Index rows = f.A.rows() / S, n = f.A.cols();
  Vector X1 = Vector::Zero(n), X2 = Vector::Zero(n);
  std::vector<Vector> y(S, Vector::Zero(rows));
  std::vector<Vector> out;
  for (long k = 0; k <= N; ++k) {
    Vector xt = 2 * X1 - X2;
    Vector ky = Vector::Zero(n);
    for (Index s = 0; s < S; ++s) {
      const Matrix As = f.A.middleRows(s * rows, rows);
      // g = h - K xt = -b_s + A_s xt; y <- y - g / tau
      y[s] = y[s] - (As * xt - f.b.segment(s * rows, rows)) / tau[s];
      ky -= As.transpose() * y[s];
    }
    Vector X = (X1 - (f.c + ky) / eta).cwiseMax(0.0);
    X2 = X1;
    X1 = X;
    out.push_back(X);
  }
  return out;
}

}  // namespace

TEST(RateSchedule, Moments) {
  auto s = RateSchedule::make({1, 1, 1, 10, 10, 10}, 99);
  EXPECT_NEAR(s.r_bar, 5.5, 1e-15);
  EXPECT_NEAR(s.r2_bar, 50.5, 1e-12);
  EXPECT_GE(s.r2_bar, s.r_bar * s.r_bar);
  EXPECT_EQ(s.N, 99);
}

TEST(RateSchedule, RoundsNUp) {
  auto s = RateSchedule::make({2, 3}, 10);
  EXPECT_EQ(s.N, 11);
  EXPECT_EQ(s.N_requested, 10);
  EXPECT_EQ(s.steps(0), 6);
  EXPECT_EQ(s.steps(1), 4);
  EXPECT_THROW(RateSchedule::make({0}, 10), InvalidArgument);
}

TEST(Extrapolate, InitialEqualsScaledInit) {
  Vector Xi = vec({1.5, -2});
  History h(3, Xi);
  auto p = mt_params(1.0, {1.0});
  Vector xt = extrapolate(h, p, 0, 3);
  EXPECT_LE((xt - 3 * Xi).norm(), 1e-15);
}

TEST(Extrapolate, UnitRateIsClassical) {
  History h(1, vec({0.0}));
  h.push(0, vec({1.0}), vec({1.0}));
  h.push(1, vec({4.0}), vec({4.0}));
  auto p = mt_params(1.0, {1.0});
  EXPECT_NEAR(extrapolate(h, p, 2, 1)[0], 2 * 4.0 - 1.0, 1e-15);
}

TEST(Extrapolate, RateTwoHandSum) {
  History h(2, vec({0.0}));
  for (long j = 0; j < 4; ++j) h.push(j, vec({double(j + 1)}), vec({double(j + 1)}));
  auto p = mt_params(1.0, {1.0});
  // Independent loop over the defining sum.
  auto X = [](long j) { return j < 0 ? 0.0 : double(j + 1); };
  double oracle = 0.0;
  for (long kp = 2; kp <= 3; ++kp) oracle += (X(kp) - X(kp - 2)) + X(kp);
  EXPECT_NEAR(oracle, 11.0, 1e-15);
  EXPECT_NEAR(extrapolate(h, p, 4, 2)[0], 11.0, 1e-15);
}

TEST(Extrapolate, OffScheduleThrows) {
  History h(2, vec({0.0}));
  h.push(0, vec({1.0}), vec({1.0}));
  auto p = mt_params(1.0, {1.0});
  EXPECT_THROW(extrapolate(h, p, 1, 2), InvalidArgument);
}

TEST(DualStep, CharZeroIsUnconstrained) {
  auto b = DualBlock::char_zero(LinearOperator::from_dense(Matrix::Identity(2, 2)));
  auto p = mt_params(1.0, {2.0});
  Vector y = dual_step(b, p, 0, vec({4, -2}), 2.0, vec({1, 1}));
  EXPECT_LE((y - (vec({1, 1}) + vec({4, -2}) / (2.0 * 2.0))).norm(), 1e-15);
}

TEST(DualStep, ScaledNormProjects) {
  auto b = DualBlock::scaled_norm(LinearOperator::from_dense(Matrix::Identity(2, 2)), 1.0);
  auto p = mt_params(1.0, {1.0});
  Vector y = dual_step(b, p, 0, vec({0, 3}), 1.0, vec({0, 0}));
  EXPECT_LE((y - vec({0, 1})).norm(), 1e-15);
  EXPECT_LE(dual_step(b, p, 0, vec({0, 0}), 1.0, vec({0, 0})).norm(), 0.0);
}

TEST(Presets, MtWeights) {
  std::mt19937_64 rng(1);
  auto f = planted_problem(rng, 4, 2, 2, 1.0);
  f.problem.blocks[0].kappa_tilde = 1.0;
  f.problem.blocks[1].kappa_tilde = 2.0;
  auto s = RateSchedule::make({1, 1}, 9);
  auto p = preset_mt(f.problem, s, 1.0, {1.0, 1.0});
  EXPECT_NEAR(s.rho[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(s.rho[1], 2.0 / 3, 1e-15);
  f.problem.blocks[1].kappa_tilde = 1.0;
  auto p2 = preset_mt(f.problem, s, 1.0, {1.0, 4.0});
  EXPECT_NEAR(p2.eta, 3.0 * std::sqrt(8.0 / 3.0), 1e-12);
  for (Index i = 0; i < 2; ++i) EXPECT_NEAR(p2.tau[i], 2.0 / (s.rho[i] * p2.eta), 1e-12);
  (void)p;
}

TEST(Presets, MtSingleBlockAndErrors) {
  std::mt19937_64 rng(2);
  auto f = planted_problem(rng, 4, 1, 2, 1.0);
  auto s = RateSchedule::make({1}, 9);
  preset_mt(f.problem, s, 1.0, {0.5});
  EXPECT_EQ(s.rho[0], 1.0);
  EXPECT_THROW(preset_mt(f.problem, s, 1.0, {0.0}), InvalidArgument);
  EXPECT_THROW(preset_mt(f.problem, s, 0.0, {1.0}), InvalidArgument);
}

TEST(Presets, AmtSequences) {
  std::mt19937_64 rng(3);
  auto f = planted_problem(rng, 4, 2, 2, 1.0);
  f.problem.linear_coefficient.reset();
  f.problem.mu = 0.5;
  auto s = RateSchedule::make({1, 1}, 9);
  auto p = preset_amt(f.problem, s, 1.0, {1.0, 1.0});
  s.set_rho({0.5, 0.5});
  for (long k : {0L, 3L, 10L}) {
    EXPECT_NEAR(p.theta(k), k + 2.0, 1e-15);
    EXPECT_NEAR(p.eta_k(k), 0.5 * (k + 1.0) / 2.0, 1e-15);
  }
  EXPECT_EQ(p.sliding_variant, SlidingVariant::StronglyConvex);
  f.problem.mu = 0.0;
  EXPECT_THROW(preset_amt(f.problem, s, 1.0, {1.0, 1.0}), InvalidArgument);
}

TEST(Presets, AmtTauSingleBlock) {
  std::mt19937_64 rng(4);
  auto f = planted_problem(rng, 3, 1, 2, 1.0);
  f.problem.linear_coefficient.reset();
  f.problem.mu = 0.25;
  f.problem.blocks[0].kappa_tilde = 1.0;
  auto s = RateSchedule::make({1}, 9);
  auto p = preset_amt(f.problem, s, 1.0, {1.0});
  EXPECT_NEAR(p.tau[0], 4.0 / 0.25 * s.r2_bar, 1e-12);
  auto s3 = RateSchedule::make({3}, 8);
  auto p3 = preset_amt(f.problem, s3, 1.0, {1.0});
  auto p3alt = preset_amt(f.problem, s3, 1.0, {1.0}, true);
  EXPECT_NEAR(p3.tau[0], 4.0 * 3 * 9 / 0.25, 1e-9);
  EXPECT_NEAR(p3alt.tau[0], 4.0 * 3 * 3 / 0.25, 1e-9);
}

TEST(Run, ReductionToVanillaPdhg) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto f = random_lp(rng, 12, 20, 3);
    auto s = RateSchedule::make({1, 1, 1}, 199);
    const double eta = 1.5 * f.A.norm();
    auto params = preset_mt_manual(f.problem, s, eta);
    auto ref = vanilla_lp(f, 3, eta, params.tau, s.N);
    std::vector<Vector> got;
    RunOptions opt;
    opt.hooks.on_iteration = [&](const IterationView& v) { got.push_back(*v.X); };
    run(f.problem, s, params, opt);
    ASSERT_EQ(got.size(), ref.size());
    double worst = 0;
    for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, (got[k] - ref[k]).cwiseAbs().maxCoeff());
    EXPECT_LE(worst, 1e-10);
  }
}

TEST(Run, ShortReductionAgreesWithBaseline) {
  std::mt19937_64 rng(6);
  auto f = random_lp(rng, 6, 8, 2);
  auto s = RateSchedule::make({1, 1}, 3);
  auto params = preset_mt_manual(f.problem, s, 2.0 * f.A.norm());
  std::vector<Vector> a, b;
  RunOptions opt;
  opt.hooks.on_iteration = [&](const IterationView& v) { a.push_back(*v.X); };
  run(f.problem, s, params, opt);
  BaselineOptions bo;
  bo.hooks.on_iteration = [&](const IterationView& v) { b.push_back(*v.X); };
  baseline_pdhg(f.problem, params.eta, params.tau, s.N, bo);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_LE((a[k] - b[k]).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Run, ZeroOperatorsDecouple) {
  Vector c = vec({1.0, -1.0});
  auto p = make_linear_problem(c, ConvexDomain::box(vec({-1, -1}), vec({1, 1})),
                               {DualBlock::scaled_norm(LinearOperator::from_dense(Matrix::Zero(2, 2)), 1.0),
                                DualBlock::char_zero(LinearOperator::from_dense(Matrix::Zero(1, 2)))});
  auto s = RateSchedule::make({1, 2}, 49);
  auto params = mt_params(4.0, {1.0, 1.0});
  RunOptions opt;
  opt.Y_init = {vec({0.2, 0.1}), vec({3.0})};
  std::vector<Vector> xs;
  opt.hooks.on_iteration = [&](const IterationView& v) { xs.push_back(*v.X); };
  auto res = run(p, s, params, opt);
  // Centers X^{k-1}, X^{k-2} with equal weight 2 each.
  Vector x1 = Vector::Zero(2), x2 = Vector::Zero(2);
  for (const auto& X : xs) {
    Vector x = (0.5 * (x1 + x2) - c / 4.0).cwiseMax(-1.0).cwiseMin(1.0);
    EXPECT_LE((X - x).norm(), 1e-14);
    x2 = x1;
    x1 = x;
  }
  EXPECT_EQ(res.last.Y[0], opt.Y_init[0]);
  EXPECT_EQ(res.last.Y[1], opt.Y_init[1]);
}

TEST(Run, ScheduleCounters) {
  std::mt19937_64 rng(7);
  auto f = random_lp(rng, 4, 4, 2);
  auto s = RateSchedule::make({1, 2}, 19);
  auto res = run(f.problem, s, preset_mt_manual(f.problem, s, 2 * f.A.norm()));
  EXPECT_EQ(res.dual_steps[0], 20);
  EXPECT_EQ(res.dual_steps[1], 10);
  for (Index b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < res.dual_step_times[b].size(); ++i) {
      EXPECT_EQ(res.dual_step_times[b][i], long(i) * s.r[b]);
    }
  }
}

TEST(Run, CachedAdjointAndErgodicWeights) {
  std::mt19937_64 rng(8);
  auto f = planted_problem(rng, 6, 3, 2, 1.0);
  auto s = RateSchedule::make({1, 2, 3}, 299);
  auto params = preset_mt(f.problem, s, domain_divergence_bound(f.problem.primal_domain, Vector::Zero(6)),
                          dual_divergence_bounds(f.problem));
  RunOptions opt;
  bool feasible = true;
  opt.hooks.on_iteration = [&](const IterationView& v) {
    for (Index b = 0; b < 3; ++b) feasible = feasible && f.problem.blocks[b].conj_domain.contains((*v.Y)[b]);
  };
  auto res = run(f.problem, s, params, opt);
  EXPECT_LE(res.max_kstar_drift, 1e-9);
  EXPECT_NEAR(res.theta_sum, params.theta_sum(s.N), 1e-9);
  EXPECT_TRUE(feasible);
}

TEST(Run, AmtThetaSum) {
  std::mt19937_64 rng(9);
  auto f = planted_problem(rng, 3, 2, 2, 1.0);
  Vector c = *f.problem.linear_coefficient;
  f.problem.linear_coefficient.reset();
  const double mu = 0.2;
  f.problem.objective = [c, mu](const Vector& x) { return OracleValue{c.dot(x) + 0.5 * mu * x.squaredNorm(), c + mu * x}; };
  f.problem.mu = mu;
  f.problem.M = 2.0 * (c.norm() + mu * std::sqrt(3.0));
  auto s = RateSchedule::make({1, 2}, 59);
  auto params = preset_amt(f.problem, s, domain_divergence_bound(f.problem.primal_domain, Vector::Zero(3)),
                           dual_divergence_bounds(f.problem));
  RunOptions opt;
  opt.sliding.variant = SlidingVariant::StronglyConvex;
  opt.sliding.T = 20;
  opt.sliding.audit = true;
  auto res = run(f.problem, s, params, opt);
  double closed = 0;
  for (long k = 0; k <= s.N; ++k) closed += k + 2.0 * s.r2_bar / s.r_bar;
  EXPECT_NEAR(res.theta_sum, closed, 1e-9 * closed);
  EXPECT_NEAR(params.theta_sum(s.N), closed, 1e-9 * closed);
  EXPECT_GT(res.audits, 0);
  EXPECT_LE(res.max_audit_excess, 1e-8);
  EXPECT_EQ(res.oracle_calls, 20 * (s.N + 1));
}

TEST(Run, RateEnvelopeSmall) {
  std::mt19937_64 rng(10);
  auto f = random_lp(rng, 6, 10, 2);
  auto s = RateSchedule::make({1, 3}, 149);
  auto params = preset_mt_manual(f.problem, s, f.A.norm());
  auto res = run(f.problem, s, params);
  const Vector X0 = Vector::Zero(10);
  const std::vector<Vector> Y0 = zero_duals(f.problem);
  for (int j = 0; j < 100; ++j) {
    PrimalDualPoint Z{random_vec(rng, 10).cwiseAbs(), {random_vec(rng, 3), random_vec(rng, 3)}};
    const double lhs = double(s.N + 1) * gap(f.problem, res.Z, Z);
    const double rhs = rate_envelope_rhs(params, s, Z.X, X0, Z.Y, Y0);
    EXPECT_LE(lhs, rhs + 1e-6 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Run, ErrorsCarryIteration) {
  std::mt19937_64 rng(11);
  auto f = planted_problem(rng, 3, 1, 2, 1.0);
  f.problem.linear_coefficient.reset();
  int calls = 0;
  f.problem.objective = [&calls](const Vector& x) {
    if (++calls > 30) throw InvalidArgument("oracle failed");
    return OracleValue{0.0, Vector::Zero(x.size())};
  };
  auto s = RateSchedule::make({1}, 20);
  RunOptions opt;
  opt.sliding.T = 5;
  try {
    run(f.problem, s, mt_params(1.0, {1.0}), opt);
    FAIL() << "expected an error";
  } catch (const IterationError& e) {
    EXPECT_EQ(e.iteration, 6);
    EXPECT_NE(std::string(e.what()).find("oracle failed"), std::string::npos);
  }
}

TEST(Baseline, OneIterationByHand) {
  // min 0.5 x s.t. x = 1, x >= 0, as K = -1, h = -1.
  Matrix K(1, 1);
  K(0, 0) = -1.0;
  auto p = make_linear_problem(vec({0.5}), ConvexDomain::nonnegative_orthant(),
                               {DualBlock::char_zero(LinearOperator::from_dense(K), vec({-1.0}))});
  const double eta = 2.0, tau = 4.0;
  auto res = baseline_pdhg(p, eta, {tau}, 0);
  // g = h - K xt = -1; y = 0 - g / tau = 0.25; x = max(0, -(0.5 - 0.25) / 2) = 0.
  EXPECT_NEAR(res.last.Y[0][0], 0.25, 1e-15);
  EXPECT_NEAR(res.last.X[0], 0.0, 1e-15);
  auto res2 = baseline_pdhg(p, eta, {tau}, 1);
  // xt = 0; y = 0.5; x = max(0, -(0.5 - 0.5)/2) = 0.
  EXPECT_NEAR(res2.last.Y[0][0], 0.5, 1e-15);
}

TEST(Baseline, FixedPointAtSaddle) {
  // min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0: x* = (1, 0), y* = 1.
  Matrix A(1, 2);
  A << 1.0, 1.0;
  auto p = make_linear_problem(vec({1.0, 2.0}), ConvexDomain::nonnegative_orthant(),
                               {DualBlock::char_zero(LinearOperator::from_dense(-A), vec({-1.0}))});
  BaselineOptions bo;
  bo.X_init = vec({1.0, 0.0});
  bo.Y_init = {vec({1.0})};
  auto res = baseline_pdhg(p, 3.0, {2.0}, 50, bo);
  EXPECT_LE((res.last.X - bo.X_init).norm(), 1e-10);
  EXPECT_LE((res.last.Y[0] - bo.Y_init[0]).norm(), 1e-10);
}

TEST(Baseline, ReducesKkt) {
  std::mt19937_64 rng(12);
  auto f = random_lp(rng, 12, 24, 3);
  auto s = RateSchedule::make({1, 1, 1}, 99);
  auto params = preset_lp(f.problem, s);
  auto res = baseline_pdhg(f.problem, params.eta, params.tau, 99);
  Vector Y(12);
  for (Index b = 0; b < 3; ++b) Y.segment(4 * b, 4) = res.last.Y[b];
  const double init = kkt_residual(f.A, f.b, f.c, Vector::Zero(24), Vector::Zero(12));
  EXPECT_LT(kkt_residual(f.A, f.b, f.c, res.last.X, Y), init);
  EXPECT_THROW(
      [&] {
        SaddleProblem q = f.problem;
        q.linear_coefficient.reset();
        baseline_pdhg(q, 1.0, params.tau, 3);
      }(),
      InvalidArgument);
}

TEST(Run, StopHookEndsEarly) {
  std::mt19937_64 rng(13);
  auto f = random_lp(rng, 6, 10, 2);
  auto s = RateSchedule::make({1, 2}, 199);
  auto params = preset_lp(f.problem, s);
  RunOptions opt;
  opt.hooks.stride = 7;
  opt.hooks.metrics = [](const IterationView&) { return MetricRow{}; };
  opt.hooks.stop = [](const MetricRow& r) { return r.k >= 40; };
  auto res = run(f.problem, s, params, opt);
  EXPECT_EQ(res.N, 42);
  EXPECT_EQ(res.trace.back().k, 42);
  EXPECT_EQ(res.dual_steps, (std::vector<long>{43, 22}));
  BaselineOptions bo;
  bo.hooks = opt.hooks;
  auto base = baseline_pdhg(f.problem, params.eta, params.tau, 199, bo);
  EXPECT_EQ(base.N, 42);
}
