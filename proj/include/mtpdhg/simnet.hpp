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

// Simulated distributed execution: primal agents (one per x_v) and dual
// agents (one per block) exchange messages through mailboxes, with round,
// message and cost accounting.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mtpdhg/consensus.hpp"
#include "mtpdhg/solver.hpp"

namespace mtpdhg {

enum class CostAggregation { Additive, Bottleneck };

inline const char* to_string(CostAggregation a) { return a == CostAggregation::Additive ? "additive" : "bottleneck"; }

struct CostModel {
  /// Cost of one dual update, per block.
  std::vector<double> c;
  CostAggregation aggregation = CostAggregation::Additive;

  static CostModel uniform(Index S, double cost = 1.0, CostAggregation agg = CostAggregation::Additive) {
    return CostModel{std::vector<double>(S, cost), agg};
  }

  void validate(Index S) const {
    require(static_cast<Index>(c.size()) == S, "cost model: need one cost per block");
    for (double x : c) require(std::isfinite(x) && x >= 0.0, "cost model: costs must be finite and >= 0");
  }
};

/// Expand a per-layer list (root layer first) to one value per dual node,
/// in block order.
template <class T>
std::vector<T> per_layer(const Tree& tree, const std::vector<T>& layers) {
  std::vector<T> out;
  for (long id : tree.dual_nodes()) {
    const int d = tree.depth(id);
    require(d < static_cast<int>(layers.size()),
            "per_layer: tree has a dual node at depth " + std::to_string(d) + " but only " +
                std::to_string(layers.size()) + " layer values");
    out.push_back(layers[std::size_t(d)]);
  }
  return out;
}

/// Who computes K_{s,v} x_tilde_v; changes only the primal-to-dual payload.
enum class TaskAssignment { DualComputes, PrimalComputes };

inline const char* to_string(TaskAssignment t) {
  return t == TaskAssignment::DualComputes ? "dual_computes" : "primal_computes";
}

struct LedgerRow {
  long iter = 0;
  Index block = 0;
  /// Completed dual steps of this block, including this one.
  long rounds = 0;
  long msgs = 0;
  long payload_scalars = 0;
  double iter_cost = 0.0;
  double cum_cost = 0.0;
};

struct EdgeCounter {
  long messages = 0;
  long payload_scalars = 0;
};

class MessageLedger {
 public:
  MessageLedger() = default;
  explicit MessageLedger(Index S) : rounds_(S, 0), edges_(S) {}

  void record_message(Index block, Index agent, long scalars) {
    EdgeCounter& e = edges_.at(block)[agent];
    ++e.messages;
    e.payload_scalars += scalars;
    ++total_messages_;
    total_payload_ += scalars;
  }
  void complete_round(long k, Index block, long msgs, long payload) {
    ++rounds_.at(block);
    pending_.push_back({k, block, rounds_[block], msgs, payload, 0.0, 0.0});
  }
  /// Close iteration k: fills the cost columns of its rows.
  void close_iteration(double iter_cost) {
    const double cum = (cum_cost_.empty() ? 0.0 : cum_cost_.back()) + iter_cost;
    iter_cost_.push_back(iter_cost);
    cum_cost_.push_back(cum);
    for (auto& r : pending_) {
      r.iter_cost = iter_cost;
      r.cum_cost = cum;
      rows_.push_back(r);
    }
    pending_.clear();
  }

  const std::vector<LedgerRow>& rows() const { return rows_; }
  const std::vector<long>& rounds() const { return rounds_; }
  const std::vector<double>& iter_cost() const { return iter_cost_; }
  const std::vector<double>& cum_cost() const { return cum_cost_; }
  /// Edge (block, primal agent) counters, both directions combined.
  const std::map<Index, EdgeCounter>& edges(Index block) const { return edges_.at(block); }
  long total_messages() const { return total_messages_; }
  long total_payload() const { return total_payload_; }

 private:
  std::vector<long> rounds_;
  std::vector<std::map<Index, EdgeCounter>> edges_;
  std::vector<LedgerRow> rows_, pending_;
  std::vector<double> iter_cost_, cum_cost_;
  long total_messages_ = 0;
  long total_payload_ = 0;
};

/// sum_s c_s / r_s.
inline double amortized_cost(const CostModel& cost, const Topology& topo, const RateSchedule& schedule) {
  if (cost.aggregation != CostAggregation::Additive) {
    throw InvalidArgument("amortized_cost: closed form only holds for Additive aggregation");
  }
  cost.validate(topo.num_blocks());
  require(schedule.num_blocks() == topo.num_blocks(), "amortized_cost: schedule and topology disagree on S");
  // sum over a common period so integer costs stay exact
  const double period = double(schedule.lcm());
  double per_period = 0.0;
  for (Index s = 0; s < topo.num_blocks(); ++s) per_period += cost.c[s] * (period / double(schedule.r[s]));
  return per_period / period;
}

/// What the second rate_advisor argument weighs costs against.
enum class BudgetMode { Rho, OperatorNorm };

/// r_s = max(1, round(r0 sqrt(c_s / w_s))) with r0 making the smallest
/// positive ratio map to 1; halves round down.
inline std::vector<int> rate_advisor(const CostModel& cost, const std::vector<double>& weights,
                                     BudgetMode mode = BudgetMode::Rho) {
  require(cost.aggregation == CostAggregation::Additive, "rate_advisor: requires Additive costs");
  cost.validate(static_cast<Index>(weights.size()));
  std::vector<double> ratio;
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < weights.size(); ++s) {
    require(weights[s] > 0.0 && std::isfinite(weights[s]),
            mode == BudgetMode::Rho ? "rate_advisor: rho must be positive" : "rate_advisor: norms must be positive");
    ratio.push_back(std::sqrt(cost.c[s] / weights[s]));
    if (ratio.back() > 0.0) smallest = std::min(smallest, ratio.back());
  }
  std::vector<int> r;
  for (double x : ratio) {
    if (!std::isfinite(smallest) || x == 0.0) {
      r.push_back(1);
      continue;
    }
    const double scaled = x / smallest;
    r.push_back(std::max(1, static_cast<int>(std::ceil(scaled - 0.5 - 1e-12))));
  }
  return r;
}

struct SimOptions {
  Vector X_init;
  std::vector<Vector> Y_init;
  SlidingConfig sliding;
  RunHooks hooks;
  TaskAssignment assignment = TaskAssignment::DualComputes;
  /// Re-run solver.run on the same inputs and compare the end state.
  bool verify = true;
  double verify_tol = 1e-9;
};

struct SimResult {
  PrimalDualPoint Z;
  PrimalDualPoint last;
  std::vector<MetricRow> trace;
  MessageLedger ledger;
  long oracle_calls = 0;
  double theta_sum = 0.0;
  /// Max abs difference against solver.run (NaN when not verified).
  double max_equality_diff = kNaN;
  long N = 0;
};

namespace detail {

/// Ownership guard: every read of agent state names the reader.
struct AgentId {
  enum Kind { Primal, Dual } kind;
  Index index;
  std::string name() const { return (kind == Primal ? "primal agent " : "dual agent ") + std::to_string(index); }
  bool operator==(const AgentId& o) const { return kind == o.kind && index == o.index; }
};

template <class T>
T& owned(T& field, const AgentId& owner, const AgentId& reader, const char* what) {
  if (!(owner == reader)) {
    throw LocalityError(reader.name() + " read field '" + what + "' owned by " + owner.name());
  }
  return field;
}

struct Incidence {
  Index agent;
  Matrix K;  // K_{s,v}
};

struct PrimalAgent {
  AgentId id;
  History history;
  Vector kstar;
  ErgodicAccumulator erg;
  Vector x, x_hat;
  /// Incident blocks and the agent's column slice of each operator.
  std::vector<std::pair<Index, const Matrix*>> incident;
};

struct DualAgent {
  AgentId id;
  Vector y;
  ErgodicAccumulator erg;
  std::vector<Incidence> incident;
};

struct Message {
  Index block;
  Index agent;
  Vector payload;
};

}  // namespace detail

/// Distributed execution of the MT / AMT iteration on a lifted problem.
inline SimResult simulate(const LiftedProblem& lifted, const RateSchedule& schedule, const StepParams& params,
                          const CostModel& cost, SimOptions options = {}) {
  using namespace detail;
  const SaddleProblem& problem = lifted.problem;
  const Topology& topo = lifted.topology;
  problem.validate();
  const Index m = topo.m, dbar = topo.dbar, S = problem.num_blocks();
  require(S == topo.num_blocks(), "simulate: lifted problem and topology disagree on S");
  require(schedule.num_blocks() == S, "simulate: schedule and problem disagree on S");
  require(static_cast<Index>(params.tau.size()) == S, "simulate: need one tau per block");
  require(params.alpha == 1.0, "simulate: only alpha = 1 is supported");
  require((schedule.N + 1) % schedule.lcm() == 0, "simulate: N + 1 must be a multiple of every rate");
  require(options.hooks.stride >= 1, "simulate: trace stride must be >= 1");
  require(!options.hooks.stop, "simulate: early stopping is not supported");
  cost.validate(S);

  RunOptions init;
  init.X_init = options.X_init;
  init.Y_init = options.Y_init;
  detail::prepare_initial_point(problem, init);
  const auto geom_local = BregmanGeometry::euclidean(dbar);
  const double C = problem.geometry().curvature;
  const auto t0 = std::chrono::steady_clock::now();

  // Dual agents own y_s and the column slices K_{s,v} of their operator.
  std::vector<DualAgent> duals;
  for (Index s = 0; s < S; ++s) {
    DualAgent d{{AgentId::Dual, s}, init.Y_init[s], {}, {}};
    d.erg.init(0, {d.y});
    for (Index v = 0; v < m; ++v) {
      Matrix Kv = problem.blocks[s].K.column_block(v * dbar, dbar);
      if (Kv.cwiseAbs().maxCoeff() > 0.0) d.incident.push_back({v, std::move(Kv)});
    }
    duals.push_back(std::move(d));
  }
  std::vector<PrimalAgent> primals;
  for (Index v = 0; v < m; ++v) {
    const Vector xv = init.X_init.segment(v * dbar, dbar);
    PrimalAgent p{{AgentId::Primal, v}, History(schedule.r_max(), xv), Vector::Zero(dbar), {}, xv, xv, {}};
    p.erg.init(dbar, {});
    primals.push_back(std::move(p));
  }
  // Each primal agent knows its own columns of every incident operator.
  for (Index s = 0; s < S; ++s) {
    for (const auto& inc : duals[s].incident) {
      primals[inc.agent].incident.push_back({s, &inc.K});
      const AgentId self = primals[inc.agent].id;
      owned(primals[inc.agent].kstar, self, self, "kstar").noalias() += inc.K.transpose() * duals[s].y;
    }
  }

  SimResult result;
  result.N = schedule.N;
  result.ledger = MessageLedger(S);
  std::vector<long> dual_steps(S, 0);

  auto gather = [&](auto field) {
    Vector X(m * dbar);
    for (Index v = 0; v < m; ++v) X.segment(v * dbar, dbar) = field(primals[v]);
    return X;
  };

  for (long k = 0; k <= schedule.N; ++k) {
    try {
      // Dual phase: due blocks collect X_tilde contributions, update, send deltas.
      std::vector<Index> due;
      for (Index s = 0; s < S; ++s)
        if (k % schedule.r[s] == 0) due.push_back(s);
      std::vector<Message> to_primal;
      for (Index s : due) {
        const int r = schedule.r[s];
        DualAgent& d = duals[s];
        const Index ns = problem.blocks[s].size();
        const long up_payload = options.assignment == TaskAssignment::DualComputes ? long(dbar) : long(ns);
        Vector KX = Vector::Zero(ns);
        for (const auto& inc : d.incident) {
          PrimalAgent& p = primals[inc.agent];
          // Primal side: the extrapolated point from its own history.
          const Vector xt = extrapolate(owned(p.history, p.id, p.id, "history"), params, k, r);
          result.ledger.record_message(s, inc.agent, up_payload);
          KX.noalias() += inc.K * xt;
        }
        const double W = window_weight(params, k, r);
        const DualBlock& b = problem.blocks[s];
        const Vector g = b.shift - KX / W;
        const double tau = params.variant == Variant::MT ? params.tau[s] : params.tau[s] / W;
        Vector& y = owned(d.y, d.id, d.id, "y");
        Vector y_new = prox_dual(BregmanGeometry::euclidean(ns), b.conj_domain, g, y, tau);
        const Vector delta = y_new - y;
        y = std::move(y_new);
        for (const auto& inc : d.incident) {
          result.ledger.record_message(s, inc.agent, ns);
          to_primal.push_back({s, inc.agent, delta});
        }
        ++dual_steps[s];
        result.ledger.complete_round(k, s, 2 * long(d.incident.size()),
                                     long(d.incident.size()) * (up_payload + long(ns)));
      }
      // Deliver.
      for (const auto& msg : to_primal) {
        PrimalAgent& p = primals[msg.agent];
        for (const auto& [s, Kv] : p.incident) {
          if (s == msg.block) owned(p.kstar, p.id, p.id, "kstar").noalias() += Kv->transpose() * msg.payload;
        }
      }
      double iter_cost = 0.0;
      for (Index s : due) {
        iter_cost = cost.aggregation == CostAggregation::Additive ? iter_cost + cost.c[s]
                                                                   : std::max(iter_cost, cost.c[s]);
      }
      result.ledger.close_iteration(iter_cost);

      // Primal phase: every agent steps on its own slice.
      const double eta = params.eta_k(k);
      const double theta = params.theta(k);
      for (PrimalAgent& p : primals) {
        History& h = owned(p.history, p.id, p.id, "history");
        std::vector<WeightedPoint> centers;
        centers.reserve(S);
        for (Index s = 0; s < S; ++s) centers.push_back({eta * schedule.rho[s], h.X(k - schedule.r[s])});
        const Vector& x_prev = h.X(k - 1);
        const Vector& kstar = owned(p.kstar, p.id, p.id, "kstar");
        Vector x, x_hat;
        if (problem.is_linear()) {
          x = prox_linear(geom_local, lifted.local_domain, (*lifted.local_linear)[p.id.index] + kstar, centers);
          x_hat = x;
        } else {
          double wsum = 0.0;
          for (const auto& c : centers) wsum += c.weight;
          const SlidingSchedule sched = SlidingSchedule::make(options.sliding.variant, options.sliding.T,
                                                              problem.mu, wsum, C);
          SlidingResult sr = gradient_slide(lifted.local[p.id.index], lifted.local_domain, geom_local, sched,
                                            centers, kstar, x_prev);
          result.oracle_calls += sr.inner_oracle_calls;
          x = std::move(sr.u_T);
          x_hat = std::move(sr.u_hat_T);
        }
        p.erg.add(theta, x_hat, {});
        p.x = x;
        p.x_hat = x_hat;
        h.push(k, std::move(x), std::move(x_hat));
      }
      for (DualAgent& d : duals) d.erg.add(theta, Vector(), {owned(d.y, d.id, d.id, "y")});

      const bool emit = k % options.hooks.stride == 0 || k == schedule.N;
      if ((emit && options.hooks.metrics) || options.hooks.on_iteration) {
        // Observer snapshot, outside the agents.
        const Vector X = gather([](const PrimalAgent& p) { return p.x; });
        const Vector X_hat = gather([](const PrimalAgent& p) { return p.x_hat; });
        std::vector<Vector> Y;
        PrimalDualPoint Z;
        Z.X = gather([](const PrimalAgent& p) { return p.erg.point().X; });
        for (const auto& d : duals) {
          Y.push_back(d.y);
          Z.Y.push_back(d.erg.point().Y[0]);
        }
        IterationView view;
        view.k = k;
        view.problem = &problem;
        view.X = &X;
        view.X_hat = &X_hat;
        view.Y = &Y;
        view.ergodic = std::move(Z);
        view.dual_steps = &dual_steps;
        view.theta_sum = primals.empty() ? 0.0 : primals[0].erg.total();
        view.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (options.hooks.on_iteration) options.hooks.on_iteration(view);
        if (emit && options.hooks.metrics) {
          MetricRow row = options.hooks.metrics(view);
          row.k = k;
          if (row.rounds.empty()) row.rounds = dual_steps;
          if (std::isnan(row.cum_cost)) row.cum_cost = result.ledger.cum_cost().back();
          if (std::isnan(row.wall_seconds)) row.wall_seconds = view.elapsed;
          result.trace.push_back(std::move(row));
        }
      }
    } catch (const IterationError&) {
      throw;
    } catch (const LocalityError&) {
      throw;
    } catch (const std::exception& e) {
      throw IterationError(k, e.what());
    }
  }

  result.Z.X = gather([](const PrimalAgent& p) { return p.erg.point().X; });
  result.last.X = gather([](const PrimalAgent& p) { return p.x; });
  for (const auto& d : duals) {
    result.Z.Y.push_back(d.erg.point().Y[0]);
    result.last.Y.push_back(d.y);
  }
  result.theta_sum = primals.empty() ? 0.0 : primals[0].erg.total();

  if (options.verify) {
    RunOptions ro;
    ro.X_init = init.X_init;
    ro.Y_init = init.Y_init;
    ro.sliding = options.sliding;
    ro.sliding.audit = false;
    const RunResult mono = run(problem, schedule, params, ro);
    double diff = (mono.Z.X - result.Z.X).cwiseAbs().maxCoeff();
    diff = std::max(diff, (mono.last.X - result.last.X).cwiseAbs().maxCoeff());
    for (Index s = 0; s < S; ++s) {
      if (mono.Z.Y[s].size() == 0) continue;
      diff = std::max(diff, (mono.Z.Y[s] - result.Z.Y[s]).cwiseAbs().maxCoeff());
      diff = std::max(diff, (mono.last.Y[s] - result.last.Y[s]).cwiseAbs().maxCoeff());
    }
    result.max_equality_diff = diff;
    if (!(diff <= options.verify_tol)) {
      throw Error("simulate: distributed and monolithic runs differ by " + std::to_string(diff) + " (tolerance " +
                  std::to_string(options.verify_tol) + ")");
    }
  }
  return result;
}

}  // namespace mtpdhg
