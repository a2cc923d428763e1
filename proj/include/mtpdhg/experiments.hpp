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

// Experiment drivers: LP and SVM runners, custom JSON problems, the run
// configuration and the self-test.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mtpdhg/consensus.hpp"
#include "mtpdhg/io.hpp"
#include "mtpdhg/metrics.hpp"
#include "mtpdhg/simnet.hpp"
#include "mtpdhg/solver.hpp"

namespace mtpdhg {

// ---- configuration --------------------------------------------------------

struct RunConfig {
  std::string experiment = "lp";
  std::uint64_t seed = 1;
  long N = 199;
  /// Per block; a single value applies to every block.
  std::vector<int> rates;
  /// Per tree layer, root first (tree topologies only).
  std::vector<int> layer_rates;
  std::string rho_mode = "preset";
  std::string penalty = "prj";
  double type1_scale = 10000.0;
  double xi = 1.0;
  double mu = 0.0;
  /// Sliding steps per primal update; 0 means N + 1.
  int T = 0;
  double gamma = 1.0;
  std::string similarity = "auto";
  std::vector<double> similarity_a;
  /// Per block, per layer (tree) or a single value.
  std::vector<double> cost;
  std::string cost_mode = "additive";
  std::string assignment = "dual_computes";
  std::string topology = "tree";
  std::string topology_file;
  int branching = 5;
  int depth = 3;
  long agents = 10;
  std::string data_file;
  bool normalize = true;
  long samples = 1000;
  long features = 20;
  double radius = 5.0;
  long lp_m = 120;
  long lp_n = 240;
  long lp_S = 6;
  bool baseline = true;
  std::string variant = "auto";
  bool alt_tau = false;
  std::string init = "zero";
  double eps0 = 0.0;  // 0: a_tilde^2 / mu
  double eta = 0.0;
  std::string problem_file;
  int stride = 10;
  bool verify = true;
  bool wall_clock = false;
  std::string out = "out";

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "experiment", "seed",     "N",           "rates",      "layer_rates", "rho_mode",   "penalty",
        "type1_scale", "xi",      "mu",          "T",          "gamma",       "similarity", "similarity_a",
        "cost",       "cost_mode", "assignment", "topology",   "topology_file", "branching", "depth",
        "agents",     "data_file", "normalize",  "samples",    "features",    "radius",     "lp_m",
        "lp_n",       "lp_S",     "baseline",    "variant",    "alt_tau",     "init",       "eps0",
        "eta",        "problem_file", "stride",  "verify",     "wall_clock",  "out"};
    return k;
  }

  /// Apply key=value overrides; unknown keys and malformed values throw.
  void apply(const std::map<std::string, std::string>& kv);
  Json to_json() const;
  void validate() const;
};

namespace detail {

inline long parse_long(const std::string& key, const std::string& v) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw InvalidArgument("config '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidArgument("config '" + key + "': expected a boolean, got '" + v + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  for (const auto& cell : split(v, ',')) {
    const std::string c = trim(cell);
    if constexpr (std::is_integral_v<T>) {
      out.push_back(static_cast<T>(parse_long(key, c)));
    } else {
      out.push_back(parse_double(c, "config '" + key + "'"));
    }
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_integral_v<T>) {
      out += std::to_string(v[i]);
    } else {
      out += format_double(v[i]);
    }
  }
  return out;
}

inline void one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return;
    list += std::string(list.empty() ? "" : "|") + a;
  }
  throw InvalidArgument("config '" + key + "': '" + v + "' is not one of " + list);
}

}  // namespace detail

inline void RunConfig::apply(const std::map<std::string, std::string>& kv) {
  using namespace detail;
  for (const auto& [key, v] : kv) {
    const auto num = [&](const std::string& text) { return parse_double(text, "config '" + key + "'"); };
    if (key == "experiment") experiment = v;
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_long(key, v));
    else if (key == "N") N = parse_long(key, v);
    else if (key == "rates") rates = parse_list<int>(key, v);
    else if (key == "layer_rates") layer_rates = parse_list<int>(key, v);
    else if (key == "rho_mode") rho_mode = v;
    else if (key == "penalty") penalty = v;
    else if (key == "type1_scale") type1_scale = num(v);
    else if (key == "xi") xi = num(v);
    else if (key == "mu") mu = num(v);
    else if (key == "T") T = static_cast<int>(parse_long(key, v));
    else if (key == "gamma") gamma = num(v);
    else if (key == "similarity") similarity = v;
    else if (key == "similarity_a") similarity_a = parse_list<double>(key, v);
    else if (key == "cost") cost = parse_list<double>(key, v);
    else if (key == "cost_mode") cost_mode = v;
    else if (key == "assignment") assignment = v;
    else if (key == "topology") topology = v;
    else if (key == "topology_file") topology_file = v;
    else if (key == "branching") branching = static_cast<int>(parse_long(key, v));
    else if (key == "depth") depth = static_cast<int>(parse_long(key, v));
    else if (key == "agents") agents = parse_long(key, v);
    else if (key == "data_file") data_file = v;
    else if (key == "normalize") normalize = parse_bool(key, v);
    else if (key == "samples") samples = parse_long(key, v);
    else if (key == "features") features = parse_long(key, v);
    else if (key == "radius") radius = num(v);
    else if (key == "lp_m") lp_m = parse_long(key, v);
    else if (key == "lp_n") lp_n = parse_long(key, v);
    else if (key == "lp_S") lp_S = parse_long(key, v);
    else if (key == "baseline") baseline = parse_bool(key, v);
    else if (key == "variant") variant = v;
    else if (key == "alt_tau") alt_tau = parse_bool(key, v);
    else if (key == "init") init = v;
    else if (key == "eps0") eps0 = num(v);
    else if (key == "eta") eta = num(v);
    else if (key == "problem_file") problem_file = v;
    else if (key == "stride") stride = static_cast<int>(parse_long(key, v));
    else if (key == "verify") verify = parse_bool(key, v);
    else if (key == "wall_clock") wall_clock = parse_bool(key, v);
    else if (key == "out") out = v;
    else throw InvalidArgument("config: unknown key '" + key + "'");
  }
}

inline void RunConfig::validate() const {
  using detail::one_of;
  one_of("experiment", experiment, {"lp", "svm", "custom", "selftest"});
  one_of("rho_mode", rho_mode, {"uniform", "preset"});
  one_of("penalty", penalty, {"ccv", "prj", "type1"});
  one_of("similarity", similarity, {"auto", "lipschitz", "subtree", "overlap", "user"});
  one_of("cost_mode", cost_mode, {"additive", "bottleneck"});
  one_of("assignment", assignment, {"dual_computes", "primal_computes"});
  one_of("topology", topology, {"tree", "tree_file", "average", "ring", "weights_file"});
  one_of("variant", variant, {"auto", "mt", "amt"});
  one_of("init", init, {"zero", "warm"});
  require(N >= 0, "config 'N' must be >= 0");
  require(T >= 0, "config 'T' must be >= 0");
  require(stride >= 1, "config 'stride' must be >= 1");
  require(xi > 0.0, "config 'xi' must be positive");
  require(mu >= 0.0, "config 'mu' must be >= 0");
  require(gamma > 0.0 && gamma <= 1.0, "config 'gamma' must lie in (0, 1]");
  require(type1_scale > 0.0, "config 'type1_scale' must be positive");
  require(radius > 0.0, "config 'radius' must be positive");
  require(eps0 >= 0.0, "config 'eps0' must be >= 0");
  require(eta >= 0.0, "config 'eta' must be >= 0");
  for (int r : rates) require(r >= 1, "config 'rates' must be >= 1");
  for (int r : layer_rates) require(r >= 1, "config 'layer_rates' must be >= 1");
  for (double c : cost) require(c >= 0.0 && std::isfinite(c), "config 'cost' must be finite and >= 0");
}

inline Json RunConfig::to_json() const {
  Json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["N"] = N;
  j["rates"] = rates;
  j["layer_rates"] = layer_rates;
  j["rho_mode"] = rho_mode;
  j["penalty"] = penalty;
  j["type1_scale"] = type1_scale;
  j["xi"] = xi;
  j["mu"] = mu;
  j["T"] = T;
  j["gamma"] = gamma;
  j["similarity"] = similarity;
  j["similarity_a"] = similarity_a;
  j["cost"] = cost;
  j["cost_mode"] = cost_mode;
  j["assignment"] = assignment;
  j["topology"] = topology;
  j["topology_file"] = topology_file;
  j["branching"] = branching;
  j["depth"] = depth;
  j["agents"] = agents;
  j["data_file"] = data_file;
  j["normalize"] = normalize;
  j["samples"] = samples;
  j["features"] = features;
  j["radius"] = radius;
  j["lp_m"] = lp_m;
  j["lp_n"] = lp_n;
  j["lp_S"] = lp_S;
  j["baseline"] = baseline;
  j["variant"] = variant;
  j["alt_tau"] = alt_tau;
  j["init"] = init;
  j["eps0"] = eps0;
  j["eta"] = eta;
  j["problem_file"] = problem_file;
  j["stride"] = stride;
  j["verify"] = verify;
  j["wall_clock"] = wall_clock;
  j["out"] = out;
  return j;
}

/// What a driver hands back; the CLI writes it to disk.
struct ExperimentOutput {
  std::vector<MetricRow> trace;
  MessageLedger ledger;
  Json resolved;
  Json summary;
  bool passed = true;
};

inline void write_outputs(const std::filesystem::path& dir, const ExperimentOutput& out) {
  write_trace_csv(dir / "trace.csv", out.trace);
  write_ledger_csv(dir / "ledger.csv", out.ledger);
  write_json(dir / "resolved_config.json", out.resolved);
  write_json(dir / "summary.json", out.summary);
}

// ---- shared pieces ----------------------------------------------------------

inline Json describe(const StepParams& p, const RateSchedule& s) {
  Json j;
  j["variant"] = to_string(p.variant);
  j["eta"] = p.eta;
  j["tau"] = p.tau;
  j["alpha"] = p.alpha;
  j["rates"] = s.r;
  j["rho"] = s.rho;
  j["r_bar"] = s.r_bar;
  j["r2_bar"] = s.r2_bar;
  j["r3_bar"] = s.r3_bar;
  j["N"] = s.N;
  j["N_requested"] = s.N_requested;
  if (p.variant == Variant::MT) {
    j["theta"] = "theta_k = 1";
    j["eta_k"] = "eta_k = eta";
  } else {
    j["theta"] = "theta_k = k + 2q";
    j["eta_k"] = "eta_k = mu (k + q) / (2 r_bar C)";
    j["q"] = p.q;
    j["mu"] = p.mu;
    j["C"] = p.C;
  }
  return j;
}

/// Ledger of a centralized run: every block is one dual agent talking to a
/// single primal agent (payload: d scalars up, n_s down).
inline MessageLedger central_ledger(const SaddleProblem& problem, const RateSchedule& schedule,
                                    const CostModel& cost) {
  const Index S = problem.num_blocks();
  MessageLedger ledger(S);
  for (long k = 0; k <= schedule.N; ++k) {
    double iter_cost = 0.0;
    for (Index s = 0; s < S; ++s) {
      if (k % schedule.r[s] != 0) continue;
      const long ns = problem.blocks[s].size();
      ledger.record_message(s, 0, problem.dimension);
      ledger.record_message(s, 0, ns);
      ledger.complete_round(k, s, 2, problem.dimension + ns);
      iter_cost = cost.aggregation == CostAggregation::Additive ? iter_cost + cost.c[s] : std::max(iter_cost, cost.c[s]);
    }
    ledger.close_iteration(iter_cost);
  }
  return ledger;
}

/// Per-block costs from the config (per block, per layer, single value or empty).
inline CostModel cost_from_config(const RunConfig& cfg, Index S, const Tree* tree = nullptr) {
  CostModel c;
  c.aggregation = cfg.cost_mode == "additive" ? CostAggregation::Additive : CostAggregation::Bottleneck;
  if (cfg.cost.empty()) {
    c.c.assign(S, 1.0);
  } else if (cfg.cost.size() == 1) {
    c.c.assign(S, cfg.cost[0]);
  } else if (static_cast<Index>(cfg.cost.size()) == S) {
    c.c = cfg.cost;
  } else if (tree) {
    c.c = per_layer(*tree, cfg.cost);
  } else {
    throw InvalidArgument("config 'cost': expected 1 or " + std::to_string(S) + " values");
  }
  return c;
}

inline std::vector<int> rates_from_config(const RunConfig& cfg, Index S, const Tree* tree = nullptr) {
  if (!cfg.layer_rates.empty()) {
    require(tree != nullptr, "config 'layer_rates' needs a tree topology");
    require(cfg.rates.empty(), "config: give either 'rates' or 'layer_rates', not both");
    return per_layer(*tree, cfg.layer_rates);
  }
  if (cfg.rates.empty()) return std::vector<int>(S, 1);
  if (cfg.rates.size() == 1) return std::vector<int>(S, cfg.rates[0]);
  require(static_cast<Index>(cfg.rates.size()) == S,
          "config 'rates': expected 1 or " + std::to_string(S) + " values, got " + std::to_string(cfg.rates.size()));
  return cfg.rates;
}

inline Json last_row_json(const std::vector<MetricRow>& trace) {
  Json j;
  if (trace.empty()) return j;
  const MetricRow& r = trace.back();
  j["k"] = r.k;
  for (const auto& c : trace_fixed_columns()) {
    if (c != "k") j[c] = finite_or_null(r.column(c));
  }
  for (const auto& [n, v] : r.extra) j[n] = finite_or_null(v);
  j["rounds"] = r.rounds;
  return j;
}

/// rate_fit over a trace column, or null when the trace does not allow it.
inline Json slope_or_null(const std::vector<MetricRow>& trace, const std::string& column) {
  try {
    return Json(rate_fit(trace, column));
  } catch (const InvalidArgument&) {
    return Json(nullptr);
  }
}

inline void strip_wall_clock(std::vector<MetricRow>& trace, bool keep) {
  if (keep) return;
  for (auto& r : trace) r.wall_seconds = kNaN;
}

// ---- LP ---------------------------------------------------------------------

struct LpInstance {
  Matrix A;
  Vector b, c, X_prime;
  Index S = 1;
};

/// A ~ U[0,1), X' ~ U[0,1), c ~ N(0,1), b = A X'; rows split evenly into S blocks.
inline LpInstance lp_generate(Index m, Index n, Index S, std::uint64_t seed) {
  require(m > 0 && n > 0 && S > 0, "lp_generate: sizes must be positive");
  if (m % S != 0) {
    throw InvalidArgument("lp_generate: m = " + std::to_string(m) + " is not divisible by S = " + std::to_string(S));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  LpInstance inst;
  inst.S = S;
  inst.A.resize(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) inst.A(i, j) = u(rng);
  inst.X_prime.resize(n);
  for (Index j = 0; j < n; ++j) inst.X_prime[j] = u(rng);
  inst.c.resize(n);
  for (Index j = 0; j < n; ++j) inst.c[j] = g(rng);
  inst.b = inst.A * inst.X_prime;
  return inst;
}

/// min c^T X s.t. A X = b, X >= 0 as a saddle problem: block s has
/// K_s = -A_s, h_s = -b_s and an unconstrained dual.
inline SaddleProblem lp_problem(const LpInstance& inst) {
  const Index rows = inst.A.rows() / inst.S;
  std::vector<DualBlock> blocks;
  for (Index s = 0; s < inst.S; ++s) {
    blocks.push_back(DualBlock::char_zero(LinearOperator::from_dense(-inst.A.middleRows(s * rows, rows)),
                                          -inst.b.segment(s * rows, rows)));
  }
  return make_linear_problem(inst.c, ConvexDomain::nonnegative_orthant(), std::move(blocks));
}

inline Vector stack_duals(const std::vector<Vector>& Y) {
  Index n = 0;
  for (const auto& y : Y) n += y.size();
  Vector out(n);
  Index at = 0;
  for (const auto& y : Y) {
    out.segment(at, y.size()) = y;
    at += y.size();
  }
  return out;
}

/// KKT residual of the last iterates; primal value and violation too.
inline std::function<MetricRow(const IterationView&)> lp_metrics(const LpInstance& inst) {
  return [&inst](const IterationView& v) {
    MetricRow row;
    const Vector Y = stack_duals(*v.Y);
    row.kkt = kkt_residual(inst.A, inst.b, inst.c, *v.X, Y);
    row.primal_value = inst.c.dot(*v.X);
    row.violation = (inst.A * *v.X - inst.b).norm();
    return row;
  };
}

struct LpRun {
  RateSchedule schedule;
  StepParams params;
  RunResult mt;
  std::optional<RunResult> baseline;
  double kkt_initial = 0.0;
};

/// First trace k with `column` <= threshold, or -1.
inline long iterations_to(const std::vector<MetricRow>& trace, const std::string& column, double threshold) {
  for (const auto& r : trace)
    if (r.column(column) <= threshold) return r.k;
  return -1;
}

/// MT-PDHG with the LP preset, plus the naive-delay PDHG baseline on the same rates.
inline LpRun lp_solve(const LpInstance& inst, const std::vector<int>& rates, long N, int stride, bool baseline) {
  const SaddleProblem problem = lp_problem(inst);
  LpRun out{RateSchedule::make(rates, N), {}, {}, std::nullopt, 0.0};
  out.params = preset_lp(problem, out.schedule);
  RunOptions opt;
  opt.hooks.stride = stride;
  opt.hooks.metrics = lp_metrics(inst);
  out.mt = run(problem, out.schedule, out.params, opt);
  out.kkt_initial = kkt_residual(inst.A, inst.b, inst.c, Vector::Zero(inst.A.cols()), Vector::Zero(inst.A.rows()));
  if (baseline) {
    BaselineOptions bo;
    bo.rates = out.schedule.r;
    bo.hooks.stride = stride;
    bo.hooks.metrics = lp_metrics(inst);
    out.baseline = baseline_pdhg(problem, out.params.eta, out.params.tau, out.schedule.N, bo);
  }
  return out;
}

inline ExperimentOutput lp_run(const RunConfig& cfg) {
  cfg.validate();
  const LpInstance inst = lp_generate(cfg.lp_m, cfg.lp_n, cfg.lp_S, cfg.seed);
  const auto rates = rates_from_config(cfg, inst.S);
  LpRun r = lp_solve(inst, rates, cfg.N, cfg.stride, cfg.baseline);
  ExperimentOutput out;
  out.trace = r.mt.trace;
  if (r.baseline) {
    require(r.baseline->trace.size() == out.trace.size(), "lp_run: baseline trace length mismatch");
    for (std::size_t i = 0; i < out.trace.size(); ++i) {
      out.trace[i].extra.emplace_back("baseline_kkt", r.baseline->trace[i].kkt);
    }
  }
  strip_wall_clock(out.trace, cfg.wall_clock);
  const SaddleProblem problem = lp_problem(inst);
  const CostModel cost = cost_from_config(cfg, inst.S);
  out.ledger = central_ledger(problem, r.schedule, cost);
  for (std::size_t i = 0; i < out.trace.size(); ++i) out.trace[i].cum_cost = out.ledger.cum_cost()[out.trace[i].k];

  out.resolved = cfg.to_json();
  out.resolved["derived"] = describe(r.params, r.schedule);
  out.resolved["derived"]["norm_A"] = r.params.eta;
  out.resolved["derived"]["blocks"] = inst.S;
  out.resolved["derived"]["rows_per_block"] = inst.A.rows() / inst.S;
  out.resolved["derived"]["cost"] = cost.c;

  Json& sm = out.summary;
  sm["experiment"] = "lp";
  sm["final"] = last_row_json(out.trace);
  sm["kkt_initial"] = r.kkt_initial;
  sm["kkt_final"] = out.trace.back().kkt;
  if (r.baseline) sm["baseline_kkt_final"] = finite_or_null(r.baseline->trace.back().kkt);
  sm["iterations_to_1e-2"] = iterations_to(out.trace, "kkt", 1e-2);
  sm["slopes"]["kkt"] = slope_or_null(out.trace, "kkt");
  sm["rounds"] = r.mt.dual_steps;
  if (cost.aggregation == CostAggregation::Additive) {
    double ac = 0.0;
    for (Index s = 0; s < inst.S; ++s) ac += cost.c[s] / double(r.schedule.r[s]);
    sm["amortized_cost"] = ac;
  } else {
    sm["amortized_cost"] = nullptr;
  }
  const bool finite = std::isfinite(out.trace.back().kkt);
  sm["checks"]["finite_residuals"] = finite;
  sm["checks"]["residual_decreased"] = finite && out.trace.back().kkt < r.kkt_initial;
  out.passed = finite;
  sm["passed"] = out.passed;
  return out;
}

// ---- SVM --------------------------------------------------------------------

/// Two Gaussian class clouds (means +-0.8 u for a random unit u, unit-variance
/// noise scaled by 1/sqrt(dim)), rows normalized to unit length.
inline SvmData synthetic_svm(Index samples, Index dim, std::uint64_t seed) {
  require(samples > 0 && dim > 0, "synthetic_svm: sizes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Vector u(dim);
  for (Index j = 0; j < dim; ++j) u[j] = g(rng);
  u.normalize();
  std::vector<Eigen::Triplet<double>> trips;
  SvmData d;
  d.labels.resize(samples);
  for (Index i = 0; i < samples; ++i) {
    const double y = coin(rng) ? 1.0 : -1.0;
    Vector x = 0.8 * y * u;
    for (Index j = 0; j < dim; ++j) x[j] += g(rng) / std::sqrt(double(dim));
    const double n = x.norm();
    if (n > 0.0) x /= n;
    for (Index j = 0; j < dim; ++j) trips.emplace_back(i, j, x[j]);
    d.labels[i] = y;
  }
  d.features.resize(samples, dim);
  d.features.setFromTriplets(trips.begin(), trips.end());
  d.features.makeCompressed();
  return d;
}

inline SvmData select_rows(const SvmData& d, const std::vector<Index>& rows) {
  SvmData out;
  std::vector<Eigen::Triplet<double>> trips;
  out.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseMatrix::InnerIterator it(d.features, rows[i]); it; ++it) trips.emplace_back(Index(i), it.col(), it.value());
    out.labels[Index(i)] = d.labels[rows[i]];
  }
  out.features.resize(static_cast<Index>(rows.size()), d.dim());
  out.features.setFromTriplets(trips.begin(), trips.end());
  out.features.makeCompressed();
  return out;
}

struct SvmSplit {
  std::vector<SvmData> agents;
  Index global_count = 0;
  std::vector<Index> local_counts;
  double global_fraction = 0.0;
  /// 2 gamma sqrt(m).
  double a1 = 0.0;
};

/// A shared shard holding a (1 - gamma) / (1 + (m - 1) gamma) fraction of the
/// shuffled data; the rest is split evenly (remainder to the first agents).
inline SvmSplit svm_split(const SvmData& data, Index m, double gamma, std::uint64_t seed) {
  require(gamma > 0.0 && gamma <= 1.0, "svm_split: gamma must lie in (0, 1]");
  require(m >= 1, "svm_split: need at least one agent");
  const Index n = data.samples();
  require(n >= m, "svm_split: dataset has fewer samples than agents");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SvmSplit out;
  out.global_fraction = (1.0 - gamma) / (1.0 + double(m - 1) * gamma);
  out.global_count = std::min<Index>(n - m, static_cast<Index>(std::llround(out.global_fraction * double(n))));
  out.a1 = 2.0 * gamma * std::sqrt(double(m));
  const Index rest = n - out.global_count;
  std::vector<Index> global(order.begin(), order.begin() + out.global_count);
  Index at = out.global_count;
  for (Index v = 0; v < m; ++v) {
    const Index cnt = rest / m + (v < rest % m ? 1 : 0);
    std::vector<Index> rows = global;
    rows.insert(rows.end(), order.begin() + at, order.begin() + at + cnt);
    at += cnt;
    out.local_counts.push_back(cnt);
    out.agents.push_back(select_rows(data, rows));
  }
  return out;
}

struct SvmSetup {
  Topology topology;
  std::optional<Tree> tree;
  SvmSplit split;
  PenaltyPlan plan;
  LiftedProblem lifted;
  RateSchedule schedule;
  StepParams params;
  CostModel cost;
  Vector X_init;
  int T = 1;
  int warm_T = 0;
  double warm_eps0 = 0.0;
  SlidingVariant sliding_variant = SlidingVariant::Convex;
};

inline Topology svm_topology(const RunConfig& cfg, Index dbar, std::optional<Tree>& tree) {
  if (cfg.topology == "tree") {
    tree = Tree::balanced(cfg.branching, cfg.depth);
    return hierarchical_topology(*tree, dbar);
  }
  if (cfg.topology == "tree_file") {
    require(!cfg.topology_file.empty(), "topology 'tree_file' needs topology_file");
    tree = Tree::load(cfg.topology_file);
    return hierarchical_topology(*tree, dbar);
  }
  if (cfg.topology == "average") return average_deviation_topology(cfg.agents, dbar);
  if (cfg.topology == "ring") return doubly_stochastic_topology(ring_weights(cfg.agents), dbar);
  require(!cfg.topology_file.empty(), "topology 'weights_file' needs topology_file");
  return doubly_stochastic_topology(load_weight_matrix(cfg.topology_file), dbar);
}

inline SimilarityModel svm_similarity(const RunConfig& cfg, const Topology& topo, const std::optional<Tree>& tree,
                                      double M_f) {
  if (cfg.penalty == "type1") return SimilarityModel::global(2.0 * std::sqrt(double(topo.m)));
  std::string rule = cfg.similarity;
  if (rule == "auto") rule = tree && cfg.gamma == 1.0 ? "subtree" : "overlap";
  if (rule == "subtree") {
    require(tree.has_value(), "similarity 'subtree' needs a tree topology");
    return SimilarityModel::subtree_size(*tree);
  }
  if (rule == "overlap") return SimilarityModel::data_overlap(topo.m, cfg.gamma);
  if (rule == "lipschitz") return SimilarityModel::lipschitz(topo.m, M_f);
  require(!cfg.similarity_a.empty(), "similarity 'user' needs similarity_a");
  if (cfg.similarity_a.size() == 1) return SimilarityModel::global(cfg.similarity_a[0]);
  return SimilarityModel::per_block(cfg.similarity_a);
}

inline Variant pick_variant(const RunConfig& cfg) {
  if (cfg.variant == "mt") return Variant::MT;
  if (cfg.variant == "amt") return Variant::AMT;
  return cfg.mu > 0.0 ? Variant::AMT : Variant::MT;
}

/// Build everything svm_run needs; `data` is the full dataset.
inline SvmSetup svm_setup(const RunConfig& cfg, const SvmData& data) {
  cfg.validate();
  SvmSetup st;
  const Index dbar = data.dim();
  st.topology = svm_topology(cfg, dbar, st.tree);
  const Index m = st.topology.m, S = st.topology.num_blocks();
  st.split = svm_split(data, m, cfg.gamma, cfg.seed + 1);
  // twice the subgradient bound 1 + R mu (unit-norm features)
  const double M_f = 2.0 * (1.0 + cfg.radius * cfg.mu);
  const auto sim = svm_similarity(cfg, st.topology, st.tree, M_f);
  const bool ccv = cfg.penalty == "ccv";
  st.plan = make_penalties(st.topology, sim, cfg.xi, ccv ? PenaltyMode::CCV : PenaltyMode::PRJ);
  if (cfg.penalty == "type1") {
    for (double& l : st.plan.lambda) l *= cfg.type1_scale;
  }
  std::vector<ObjectiveOracle> local;
  for (const auto& a : st.split.agents) local.push_back(hinge_ridge_objective(a.features, a.labels, cfg.mu));
  const ConvexDomain ball = ConvexDomain::origin_ball(dbar, cfg.radius);
  st.lifted = lift_problem(local, st.topology, st.plan.lambda, ball, cfg.mu, M_f);

  const Tree* tp = st.tree ? &*st.tree : nullptr;
  st.schedule = RateSchedule::make(rates_from_config(cfg, S, tp), cfg.N);
  st.cost = cost_from_config(cfg, S, tp);
  const Variant variant = pick_variant(cfg);
  require(variant == Variant::MT || cfg.mu > 0.0, "svm: AMT requires mu > 0");

  st.X_init = Vector::Zero(m * dbar);
  if (cfg.init == "warm") {
    require(cfg.mu > 0.0, "svm: warm start requires mu > 0");
    const double D_x = 0.5 * cfg.radius * cfg.radius;
    const double a = sim.a_tilde();
    st.warm_eps0 = cfg.eps0 > 0.0 ? cfg.eps0 : a * a / cfg.mu;
    const WarmStart ws = warm_start(local, ball, BregmanGeometry::euclidean(dbar), D_x, st.warm_eps0, cfg.mu, M_f);
    st.X_init = ws.X_init;
    st.warm_T = ws.T;
  }
  const double D_X = domain_divergence_bound(st.lifted.problem.primal_domain, st.X_init);
  const auto D_y = dual_divergence_bounds(st.lifted.problem);
  if (variant == Variant::MT) {
    st.params = preset_mt(st.lifted.problem, st.schedule, D_X, D_y);
    if (cfg.rho_mode == "uniform") {
      st.schedule.set_rho(std::vector<double>(S, 1.0));
      st.params = preset_mt_manual(st.lifted.problem, st.schedule, st.params.eta);
    }
  } else {
    st.params = preset_amt(st.lifted.problem, st.schedule, D_X, D_y, cfg.alt_tau);
    if (cfg.rho_mode == "uniform") {
      st.schedule.set_rho(std::vector<double>(S, 1.0));
      st.params = preset_amt_manual(st.lifted.problem, st.schedule, cfg.alt_tau);
    }
  }
  st.sliding_variant = st.params.sliding_variant;
  st.T = cfg.T > 0 ? cfg.T : static_cast<int>(st.schedule.N + 1);
  return st;
}

/// Global objective sum_v f_v at the consensus average of the ergodic X.
inline std::function<MetricRow(const IterationView&)> svm_metrics(const LiftedProblem& lifted) {
  return [&lifted](const IterationView& v) {
    MetricRow row;
    const auto& topo = lifted.topology;
    const Vector PX = consensus_average(v.ergodic.X, topo.m, topo.dbar);
    row.primal_value = lifted.problem.objective(PX).value;
    row.consensus_violation = consensus_violation(topo, v.ergodic.X);
    return row;
  };
}

struct SvmRun {
  SvmSetup setup;
  SimResult sim;
  /// F(0) = sum_v f_v(0).
  double F0 = 0.0;
  double F_min = 0.0;
};

inline SvmRun svm_solve(const RunConfig& cfg, const SvmData& data) {
  SvmRun r{svm_setup(cfg, data), {}, 0.0, 0.0};
  SimOptions opt;
  opt.X_init = r.setup.X_init;
  opt.sliding.variant = r.setup.sliding_variant;
  opt.sliding.T = r.setup.T;
  opt.hooks.stride = cfg.stride;
  opt.hooks.metrics = svm_metrics(r.setup.lifted);
  opt.assignment = cfg.assignment == "dual_computes" ? TaskAssignment::DualComputes : TaskAssignment::PrimalComputes;
  opt.verify = cfg.verify;
  r.sim = simulate(r.setup.lifted, r.setup.schedule, r.setup.params, r.setup.cost, opt);
  r.F0 = r.setup.lifted.problem.objective(Vector::Zero(r.setup.lifted.problem.dimension)).value;
  r.F_min = std::numeric_limits<double>::infinity();
  for (const auto& row : r.sim.trace) r.F_min = std::min(r.F_min, row.primal_value);
  for (auto& row : r.sim.trace) {
    const double denom = r.F0 - r.F_min;
    row.extra.emplace_back("normalized_objective", denom > 0.0 ? (row.primal_value - r.F_min) / denom : 0.0);
  }
  return r;
}

inline SvmData svm_data(const RunConfig& cfg) {
  if (!cfg.data_file.empty()) return libsvm_load(cfg.data_file, cfg.normalize);
  return synthetic_svm(cfg.samples, cfg.features, cfg.seed);
}

inline ExperimentOutput svm_run(const RunConfig& cfg) {
  const SvmData data = svm_data(cfg);
  SvmRun r = svm_solve(cfg, data);
  ExperimentOutput out;
  out.trace = r.sim.trace;
  strip_wall_clock(out.trace, cfg.wall_clock);
  out.ledger = r.sim.ledger;
  const auto& st = r.setup;

  out.resolved = cfg.to_json();
  Json& d = out.resolved["derived"];
  d = describe(st.params, st.schedule);
  d["T"] = st.T;
  d["sliding"] = st.sliding_variant == SlidingVariant::Convex ? "convex" : "strongly_convex";
  d["warm_start_T"] = st.warm_T;
  d["warm_start_eps0"] = st.warm_eps0;
  d["topology"] = to_string(st.topology.kind);
  d["agents"] = st.topology.m;
  d["blocks"] = st.topology.num_blocks();
  d["dim"] = data.dim();
  d["samples"] = data.samples();
  d["lambda"] = st.plan.lambda;
  d["sigma_min_plus"] = st.plan.sigma;
  d["sigma_global"] = st.plan.sigma_global;
  d["A"] = st.plan.A;
  d["A0"] = st.plan.A0;
  d["A1"] = st.plan.A1;
  d["rho_hint"] = st.plan.rho_hint;
  d["M_f"] = st.lifted.M_f;
  d["M"] = st.lifted.problem.M;
  d["global_share"] = st.split.global_fraction;
  d["global_count"] = st.split.global_count;
  d["local_counts"] = st.split.local_counts;
  d["a1_overlap"] = st.split.a1;
  d["cost"] = st.cost.c;
  d["cost_mode"] = to_string(st.cost.aggregation);
  d["kappa_tilde"] = Json::array();
  for (const auto& b : st.lifted.problem.blocks) d["kappa_tilde"].push_back(b.kappa_tilde);

  Json& sm = out.summary;
  sm["experiment"] = "svm";
  sm["final"] = last_row_json(out.trace);
  sm["F0"] = r.F0;
  sm["F_min"] = r.F_min;
  sm["rounds"] = r.sim.ledger.rounds();
  sm["total_messages"] = r.sim.ledger.total_messages();
  sm["total_payload_scalars"] = r.sim.ledger.total_payload();
  sm["cum_cost"] = r.sim.ledger.cum_cost().back();
  sm["amortized_cost"] = st.cost.aggregation == CostAggregation::Additive
                             ? Json(amortized_cost(st.cost, st.topology, st.schedule))
                             : Json(nullptr);
  sm["oracle_calls"] = r.sim.oracle_calls;
  sm["max_equality_diff"] = finite_or_null(r.sim.max_equality_diff);
  sm["slopes"]["primal_value_minus_min"] = nullptr;
  {
    std::vector<double> k, v;
    for (const auto& row : out.trace) {
      k.push_back(double(row.k));
      v.push_back(row.primal_value - r.F_min + 1e-3);
    }
    try {
      sm["slopes"]["primal_value_minus_min"] = rate_fit(k, v);
    } catch (const InvalidArgument&) {
    }
  }
  bool rounds_ok = true;
  for (Index s = 0; s < st.schedule.num_blocks(); ++s) {
    rounds_ok = rounds_ok && r.sim.ledger.rounds()[s] == (st.schedule.N + 1) / st.schedule.r[s];
  }
  sm["checks"]["round_counts"] = rounds_ok;
  sm["checks"]["simulated_equals_monolithic"] = cfg.verify ? Json(r.sim.max_equality_diff <= 1e-9) : Json(nullptr);
  sm["checks"]["objective_decreased"] = out.trace.back().primal_value < r.F0;
  out.passed = rounds_ok && (!cfg.verify || r.sim.max_equality_diff <= 1e-9);
  sm["passed"] = out.passed;
  return out;
}

// ---- custom JSON problems -----------------------------------------------------

namespace detail {

inline Vector json_vector(const Json& j, const std::string& what) {
  require(j.is_array(), "problem file: '" + what + "' must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), "problem file: '" + what + "' must contain numbers");
    v[Index(i)] = j[i].get<double>();
  }
  return v;
}

inline Matrix json_matrix(const Json& j, Index cols, const std::string& what) {
  require(j.is_array() && !j.empty(), "problem file: '" + what + "' must be a non-empty array of rows");
  Matrix M(static_cast<Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = json_vector(j[r], what);
    require_same_size(row.size(), cols, (what + " row " + std::to_string(r)).c_str());
    M.row(Index(r)) = row.transpose();
  }
  return M;
}

}  // namespace detail

/// {"c": [...], "mu": 0, "M": 1,
///  "domain": {"type": "box"|"ball"|"nonnegative"|"free", ...},
///  "blocks": [{"K": [[...]], "penalty": "scaled_norm"|"char_zero", "lambda": 1, "shift": [...]}]}
/// F(x) = c^T x + (mu/2) ||x||^2.
inline SaddleProblem custom_problem(const Json& j) {
  using namespace detail;
  require(j.is_object(), "problem file: top level must be an object");
  require(j.contains("c"), "problem file: missing 'c'");
  const Vector c = json_vector(j.at("c"), "c");
  const Index d = c.size();
  require(d > 0, "problem file: 'c' must be non-empty");
  const double mu = j.value("mu", 0.0);
  require(mu >= 0.0, "problem file: 'mu' must be >= 0");

  ConvexDomain domain = ConvexDomain::free_space();
  if (j.contains("domain")) {
    const Json& dj = j.at("domain");
    const std::string type = dj.value("type", "free");
    if (type == "box") {
      domain = ConvexDomain::box(json_vector(dj.at("lower"), "domain.lower"), json_vector(dj.at("upper"), "domain.upper"));
    } else if (type == "ball") {
      const Vector center = dj.contains("center") ? json_vector(dj.at("center"), "domain.center") : Vector::Zero(d);
      domain = ConvexDomain::ball(dj.at("radius").get<double>(), center);
    } else if (type == "nonnegative") {
      domain = ConvexDomain::nonnegative_orthant();
    } else if (type != "free") {
      throw InvalidArgument("problem file: unknown domain type '" + type + "'");
    }
  }
  std::vector<DualBlock> blocks;
  require(j.contains("blocks") && j.at("blocks").is_array() && !j.at("blocks").empty(),
          "problem file: 'blocks' must be a non-empty array");
  for (std::size_t s = 0; s < j.at("blocks").size(); ++s) {
    const Json& bj = j.at("blocks")[s];
    const std::string name = "blocks[" + std::to_string(s) + "]";
    const Matrix K = json_matrix(bj.at("K"), d, name + ".K");
    const Vector shift = bj.contains("shift") ? json_vector(bj.at("shift"), name + ".shift") : Vector::Zero(K.rows());
    require_same_size(shift.size(), K.rows(), (name + ".shift").c_str());
    const std::string pen = bj.value("penalty", "scaled_norm");
    if (pen == "scaled_norm") {
      blocks.push_back(DualBlock::scaled_norm(LinearOperator::from_dense(K), bj.value("lambda", 1.0), shift));
    } else if (pen == "char_zero") {
      blocks.push_back(DualBlock::char_zero(LinearOperator::from_dense(K), shift));
    } else {
      throw InvalidArgument("problem file: " + name + ".penalty must be scaled_norm or char_zero");
    }
  }
  SaddleProblem p = make_linear_problem(c, domain, std::move(blocks));
  if (mu > 0.0) {
    p.linear_coefficient.reset();
    p.objective = [c, mu](const Vector& x) { return OracleValue{c.dot(x) + 0.5 * mu * x.squaredNorm(), c + mu * x}; };
    p.mu = mu;
  }
  if (j.contains("M")) {
    p.M = j.at("M").get<double>();
  } else if (domain.is_bounded()) {
    // ||c + mu x|| over the domain.
    double rad = 0.0;
    std::visit(
        [&](const auto& k) {
          using Kd = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<Kd, ConvexDomain::Ball>) {
            rad = k.center.norm() + k.radius;
          } else if constexpr (std::is_same_v<Kd, ConvexDomain::Box>) {
            rad = k.lower.cwiseAbs().cwiseMax(k.upper.cwiseAbs()).norm();
          }
        },
        domain.kind());
    p.M = 2.0 * (c.norm() + mu * rad);
  }
  p.validate();
  return p;
}

inline SaddleProblem load_custom_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open problem file '" + path.string() + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw InvalidArgument("problem file '" + path.string() + "': " + e.what());
  }
  return custom_problem(j);
}

inline ExperimentOutput custom_run_problem(const RunConfig& cfg, const SaddleProblem& problem) {
  cfg.validate();
  const Index S = problem.num_blocks();
  RateSchedule schedule = RateSchedule::make(rates_from_config(cfg, S), cfg.N);
  const Variant variant = pick_variant(cfg);
  StepParams params;
  RunOptions opt;
  opt.X_init = problem.primal_domain.project(Vector::Zero(problem.dimension));
  const auto D_y = dual_divergence_bounds(problem);
  const bool finite_duals = std::all_of(D_y.begin(), D_y.end(), [](double x) { return std::isfinite(x); });
  if (variant == Variant::AMT) {
    require(problem.mu > 0.0, "custom: AMT requires mu > 0 in the problem file");
    if (cfg.rho_mode == "preset") {
      require(finite_duals, "custom: preset rho needs bounded duals; use rho_mode=uniform");
      params = preset_amt(problem, schedule, domain_divergence_bound(problem.primal_domain, opt.X_init), D_y, cfg.alt_tau);
    } else {
      params = preset_amt_manual(problem, schedule, cfg.alt_tau);
    }
  } else if (cfg.eta > 0.0) {
    params = preset_mt_manual(problem, schedule, cfg.eta);
  } else {
    require(finite_duals && problem.primal_domain.is_bounded(),
            "custom: the MT preset needs a bounded domain and ScaledNorm blocks; set eta for a manual step");
    params = preset_mt(problem, schedule, domain_divergence_bound(problem.primal_domain, opt.X_init), D_y);
    if (cfg.rho_mode == "uniform") {
      schedule.set_rho(std::vector<double>(S, 1.0));
      params = preset_mt_manual(problem, schedule, params.eta);
    }
  }
  opt.sliding.variant = params.sliding_variant;
  opt.sliding.T = cfg.T > 0 ? cfg.T : static_cast<int>(schedule.N + 1);
  opt.hooks.stride = cfg.stride;
  opt.hooks.metrics = default_metrics();
  RunResult res = run(problem, schedule, params, opt);

  ExperimentOutput out;
  out.trace = res.trace;
  strip_wall_clock(out.trace, cfg.wall_clock);
  const CostModel cost = cost_from_config(cfg, S);
  out.ledger = central_ledger(problem, schedule, cost);
  for (auto& row : out.trace) row.cum_cost = out.ledger.cum_cost()[row.k];
  out.resolved = cfg.to_json();
  out.resolved["derived"] = describe(params, schedule);
  out.resolved["derived"]["T"] = opt.sliding.T;
  out.resolved["derived"]["dimension"] = problem.dimension;
  out.resolved["derived"]["kappa_tilde"] = Json::array();
  for (const auto& b : problem.blocks) out.resolved["derived"]["kappa_tilde"].push_back(b.kappa_tilde);
  out.summary["experiment"] = "custom";
  out.summary["final"] = last_row_json(out.trace);
  out.summary["X_ergodic"] = to_json(std::vector<double>(res.Z.X.data(), res.Z.X.data() + res.Z.X.size()));
  out.summary["slopes"]["gap_sup"] = slope_or_null(out.trace, "gap_sup");
  out.summary["rounds"] = res.dual_steps;
  out.summary["max_kstar_drift"] = res.max_kstar_drift;
  out.passed = std::isfinite(out.trace.back().primal_value);
  out.summary["passed"] = out.passed;
  return out;
}

inline ExperimentOutput custom_run(const RunConfig& cfg) {
  require(!cfg.problem_file.empty(), "custom: set problem_file");
  return custom_run_problem(cfg, load_custom_problem(cfg.problem_file));
}

// ---- self-test ------------------------------------------------------------------

/// Quick end-to-end checks on tiny instances.
inline ExperimentOutput selftest(const RunConfig& cfg) {
  ExperimentOutput out;
  Json checks;

  // MT with unit rates equals classical PDHG.
  {
    const LpInstance inst = lp_generate(12, 24, 3, cfg.seed);
    const SaddleProblem p = lp_problem(inst);
    RateSchedule s = RateSchedule::make({1, 1, 1}, 99);
    const StepParams params = preset_lp(p, s);
    std::vector<Vector> a, b;
    RunOptions ro;
    ro.hooks.stride = 1;
    ro.hooks.metrics = lp_metrics(inst);
    ro.hooks.on_iteration = [&](const IterationView& v) { a.push_back(*v.X); };
    RunResult mt = run(p, s, params, ro);
    BaselineOptions bo;
    bo.hooks.on_iteration = [&](const IterationView& v) { b.push_back(*v.X); };
    baseline_pdhg(p, params.eta, params.tau, s.N, bo);
    double diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, (a[k] - b[k]).cwiseAbs().maxCoeff());
    checks["reduction_to_pdhg"] = {{"max_diff", diff}, {"passed", diff <= 1e-10}};
    out.trace = mt.trace;
    strip_wall_clock(out.trace, false);

    // rate envelope at random comparators
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < 20; ++t) {
      PrimalDualPoint Z;
      Z.X = Vector::NullaryExpr(24, [&](Index) { return std::abs(g(rng)); });
      for (int sb = 0; sb < 3; ++sb) Z.Y.push_back(Vector::NullaryExpr(4, [&](Index) { return g(rng); }));
      const double lhs = double(s.N + 1) * gap(p, mt.Z, Z);
      const double rhs = rate_envelope_rhs(params, s, Z.X, Vector::Zero(24), Z.Y, zero_duals(p));
      worst = std::max(worst, (lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    checks["rate_envelope"] = {{"worst_relative_excess", worst}, {"passed", worst <= 1e-6}};
  }

  // Distributed and monolithic runs agree; round counts follow the rates.
  {
    std::mt19937_64 rng(cfg.seed + 7);
    const Tree tree = Tree::balanced(2, 2);
    const Topology topo = hierarchical_topology(tree, 2);
    std::vector<ObjectiveOracle> local;
    std::vector<Vector> lin;
    std::normal_distribution<double> g(0.0, 1.0);
    for (Index v = 0; v < topo.m; ++v) {
      lin.push_back(Vector::NullaryExpr(2, [&](Index) { return g(rng); }));
      local.push_back(linear_objective(lin.back()));
    }
    const LiftedProblem lp = lift_problem(local, topo, {1.0, 1.0, 1.0}, ConvexDomain::origin_ball(2, 1.0), 0.0, 1.0, lin);
    RateSchedule s = RateSchedule::make({1, 2, 3}, 59);
    const StepParams params = preset_mt(lp.problem, s, domain_divergence_bound(lp.problem.primal_domain, Vector::Zero(8)),
                                        dual_divergence_bounds(lp.problem));
    const CostModel cost{{1.0, 2.0, 3.0}};
    SimOptions so;
    const SimResult sim = simulate(lp, s, params, cost, so);
    bool rounds_ok = true;
    for (Index b = 0; b < 3; ++b) rounds_ok = rounds_ok && sim.ledger.rounds()[b] == (s.N + 1) / s.r[b];
    const double ac = amortized_cost(cost, topo, s);
    const bool cost_ok = std::abs(sim.ledger.cum_cost().back() - ac * double(s.N + 1)) <= 1e-9;
    checks["simnet_equivalence"] = {{"max_diff", sim.max_equality_diff}, {"passed", sim.max_equality_diff <= 1e-9}};
    checks["round_counts"] = {{"passed", rounds_ok}};
    checks["amortized_cost"] = {{"AC", ac}, {"passed", cost_ok}};
    out.ledger = sim.ledger;
  }

  // LIBSVM round trip.
  {
    const SvmData d = synthetic_svm(20, 5, cfg.seed);
    std::stringstream ss;
    libsvm_write(ss, d);
    const SvmData back = libsvm_parse(ss, false, d.dim());
    const bool same = (Matrix(back.features) - Matrix(d.features)).cwiseAbs().maxCoeff() == 0.0 && back.labels == d.labels;
    checks["libsvm_round_trip"] = {{"passed", same}};
  }

  out.passed = true;
  for (const auto& [name, c] : checks.items()) out.passed = out.passed && c.at("passed").get<bool>();
  out.resolved = cfg.to_json();
  out.summary["experiment"] = "selftest";
  out.summary["checks"] = checks;
  out.summary["passed"] = out.passed;
  return out;
}

inline ExperimentOutput run_experiment(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.experiment == "lp") return lp_run(cfg);
  if (cfg.experiment == "svm") return svm_run(cfg);
  if (cfg.experiment == "custom") return custom_run(cfg);
  return selftest(cfg);
}

}  // namespace mtpdhg
