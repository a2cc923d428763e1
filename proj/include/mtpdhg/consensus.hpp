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

// Lifting of a sum of m local objectives to the consensus saddle problem:
// consensus operators, projectors, similarity-aware penalty levels and the
// warm-start initialization.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "mtpdhg/problem.hpp"
#include "mtpdhg/sliding.hpp"

namespace mtpdhg {

/// Rooted tree; internal nodes are dual agents, leaves are primal agents.
class Tree {
 public:
  struct Node {
    long id;
    long parent;  // -1 for the root
    bool primal;
  };

  Tree() = default;

  explicit Tree(std::vector<Node> nodes) : nodes_(std::move(nodes)) { build(); }

  /// Complete `branching`-ary tree with `dual_layers` layers of dual agents.
  /// Node ids follow breadth-first order, so internal nodes are listed layer
  /// by layer from the root.
  static Tree balanced(int branching, int dual_layers) {
    require(branching >= 2, "balanced tree: branching must be >= 2");
    require(dual_layers >= 1, "balanced tree: need at least one dual layer");
    std::vector<Node> nodes;
    nodes.push_back({0, -1, false});
    std::vector<long> frontier{0};
    long next = 1;
    for (int layer = 1; layer <= dual_layers; ++layer) {
      const bool leaves = layer == dual_layers;
      std::vector<long> children;
      for (long p : frontier) {
        for (int c = 0; c < branching; ++c) {
          nodes.push_back({next, p, leaves});
          children.push_back(next++);
        }
      }
      frontier = std::move(children);
    }
    return Tree(std::move(nodes));
  }

  /// Text format: one node per line, "node_id parent_id kind" with kind in
  /// {dual, primal}; the root has parent -1. '#' starts a comment.
  static Tree parse(std::istream& in) {
    std::vector<Node> nodes;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
      std::istringstream ss(line);
      long id = 0, parent = 0;
      std::string kind;
      if (!(ss >> id)) continue;
      if (!(ss >> parent >> kind) || (kind != "dual" && kind != "primal")) {
        throw InvalidArgument("tree file line " + std::to_string(lineno) + ": expected 'node_id parent_id dual|primal'");
      }
      nodes.push_back({id, parent, kind == "primal"});
    }
    return Tree(std::move(nodes));
  }

  static Tree load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open tree file " + path);
    return parse(in);
  }

  Index num_primal() const { return static_cast<Index>(leaves_.size()); }
  Index num_dual() const { return static_cast<Index>(internal_.size()); }

  /// Internal node ids in block order.
  const std::vector<long>& dual_nodes() const { return internal_; }
  /// Leaf ids in agent order.
  const std::vector<long>& primal_nodes() const { return leaves_; }

  const std::vector<long>& children(long id) const { return children_.at(id); }
  /// Agent indices (0-based) of the leaves below id.
  const std::vector<Index>& descendants(long id) const { return des_.at(id); }
  int depth(long id) const { return depth_.at(id); }

 private:
  void build() {
    require(!nodes_.empty(), "tree is empty");
    std::map<long, const Node*> by_id;
    long root = -1;
    for (const auto& n : nodes_) {
      if (!by_id.emplace(n.id, &n).second) throw InvalidArgument("tree: duplicate node id " + std::to_string(n.id));
      if (n.parent == -1) {
        if (root != -1) throw InvalidArgument("tree: more than one root");
        root = n.id;
      }
    }
    if (root == -1) throw InvalidArgument("tree: no root (parent -1)");
    for (const auto& n : nodes_) {
      children_[n.id];
      if (n.parent != -1) {
        if (!by_id.count(n.parent)) throw InvalidArgument("tree: unknown parent " + std::to_string(n.parent));
        if (by_id[n.parent]->primal) throw InvalidArgument("tree: primal node " + std::to_string(n.parent) + " has children");
        children_[n.parent].push_back(n.id);
      }
    }
    // Node ids ascending fix both orders.
    for (const auto& [id, n] : by_id) {
      if (n->primal) {
        leaves_.push_back(id);
      } else {
        internal_.push_back(id);
        if (children_[id].size() < 2) {
          throw InvalidArgument("tree: dual node " + std::to_string(id) + " has fewer than 2 children");
        }
      }
    }
    std::map<long, Index> agent;
    for (std::size_t i = 0; i < leaves_.size(); ++i) agent[leaves_[i]] = static_cast<Index>(i);
    // Depth-first walk from the root, also detecting cycles/unreachable nodes.
    std::vector<long> order;
    std::vector<long> stack{root};
    depth_[root] = 0;
    while (!stack.empty()) {
      long id = stack.back();
      stack.pop_back();
      order.push_back(id);
      for (long c : children_[id]) {
        if (depth_.count(c)) throw InvalidArgument("tree: cycle through node " + std::to_string(c));
        depth_[c] = depth_[id] + 1;
        stack.push_back(c);
      }
    }
    if (order.size() != nodes_.size()) throw InvalidArgument("tree: some nodes are not reachable from the root");
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      auto& d = des_[*it];
      if (by_id[*it]->primal) {
        d.push_back(agent[*it]);
      } else {
        for (long c : children_[*it]) d.insert(d.end(), des_[c].begin(), des_[c].end());
        std::sort(d.begin(), d.end());
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<long> internal_;
  std::vector<long> leaves_;
  std::map<long, std::vector<long>> children_;
  std::map<long, std::vector<Index>> des_;
  std::map<long, int> depth_;
};

enum class TopologyKind { AverageDeviation, DoublyStochastic, HierarchicalTree };

inline const char* to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::AverageDeviation: return "average_deviation";
    case TopologyKind::DoublyStochastic: return "doubly_stochastic";
    case TopologyKind::HierarchicalTree: return "hierarchical_tree";
  }
  return "?";
}

/// Consensus operators (K_s) on the lifted space R^{m * dbar}; agent v owns
/// coordinates [v * dbar, (v + 1) * dbar).
struct Topology {
  TopologyKind kind = TopologyKind::AverageDeviation;
  Index m = 0;
  Index dbar = 1;
  std::vector<LinearOperator> blocks;
  std::optional<Tree> tree;
  Matrix W;

  Index num_blocks() const { return static_cast<Index>(blocks.size()); }
  Index lifted_dimension() const { return m * dbar; }
};

inline SparseMatrix kron_identity(const SparseMatrix& base, Index dbar) {
  if (dbar == 1) return base;
  std::vector<Eigen::Triplet<double>> trips;
  for (Index r = 0; r < base.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(base, r); it; ++it) {
      for (Index c = 0; c < dbar; ++c) trips.emplace_back(r * dbar + c, it.col() * dbar + c, it.value());
    }
  }
  SparseMatrix out(base.rows() * dbar, base.cols() * dbar);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

/// K = I - Pi with S = 1.
inline Topology average_deviation_topology(Index m, Index dbar) {
  require(m >= 2 && dbar >= 1, "average deviation topology needs m >= 2 and dbar >= 1");
  Matrix base = Matrix::Identity(m, m) - Matrix::Constant(m, m, 1.0 / m);
  Topology t;
  t.kind = TopologyKind::AverageDeviation;
  t.m = m;
  t.dbar = dbar;
  SparseMatrix sb = base.sparseView();
  t.blocks.push_back(LinearOperator::from_sparse(kron_identity(sb, dbar)));
  return t;
}

/// K_s = row s of (I - W), Kronecker I_dbar; S = m.
inline Topology doubly_stochastic_topology(const Matrix& W, Index dbar) {
  const Index m = W.rows();
  require(m >= 2 && W.cols() == m, "doubly stochastic topology: W must be square with m >= 2");
  const double row_err = (W.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_err = (W.colwise().sum().array() - 1.0).abs().maxCoeff();
  require(row_err <= 1e-12 && col_err <= 1e-12, "doubly stochastic topology: row/column sums must be 1");
  const Matrix L = Matrix::Identity(m, m) - W;
  Eigen::JacobiSVD<Matrix> svd(L);
  const auto sv = svd.singularValues();  // descending
  require(sv[m - 2] > 1e-10, "doubly stochastic topology: ker(I - W) must be span(1)");
  Topology t;
  t.kind = TopologyKind::DoublyStochastic;
  t.m = m;
  t.dbar = dbar;
  t.W = W;
  for (Index s = 0; s < m; ++s) {
    SparseMatrix row = L.row(s).sparseView();
    t.blocks.push_back(LinearOperator::from_sparse(kron_identity(row, dbar)));
  }
  return t;
}

/// Ring-graph Metropolis weights (each node averaged with its two neighbours).
inline Matrix ring_weights(Index m) {
  require(m >= 3, "ring weights need m >= 3");
  Matrix W = Matrix::Zero(m, m);
  for (Index v = 0; v < m; ++v) {
    W(v, v) = 1.0 / 3.0;
    W(v, (v + 1) % m) = 1.0 / 3.0;
    W(v, (v + m - 1) % m) = 1.0 / 3.0;
  }
  return W;
}

/// Reads "dense m" followed by m rows, or "sparse m" followed by "i j value"
/// triplets (0-based).
inline Matrix load_weight_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open weight matrix file " + path);
  std::string kind;
  Index m = 0;
  if (!(in >> kind >> m) || m <= 0) throw InvalidArgument("weight matrix file: bad header");
  Matrix W = Matrix::Zero(m, m);
  if (kind == "dense") {
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j)
        if (!(in >> W(i, j))) throw InvalidArgument("weight matrix file: truncated dense matrix");
  } else if (kind == "sparse") {
    Index i = 0, j = 0;
    double v = 0;
    while (in >> i >> j >> v) {
      require(i >= 0 && i < m && j >= 0 && j < m, "weight matrix file: index out of range");
      W(i, j) = v;
    }
  } else {
    throw InvalidArgument("weight matrix file: header must be 'dense m' or 'sparse m'");
  }
  return W;
}

/// Base (dbar = 1) rows of K_s for tree node s: (K_s X)_i = xbar_i - xbar_s.
inline SparseMatrix tree_block_base(const Tree& tree, long s) {
  const auto& chi = tree.children(s);
  const auto& des_s = tree.descendants(s);
  const double ws = 1.0 / static_cast<double>(des_s.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t r = 0; r < chi.size(); ++r) {
    const auto& des_i = tree.descendants(chi[r]);
    const double wi = 1.0 / static_cast<double>(des_i.size());
    std::vector<double> row(tree.num_primal(), 0.0);
    for (Index j : des_i) row[j] += wi;
    for (Index j : des_s) row[j] -= ws;
    for (Index j : des_s) {
      if (row[j] != 0.0) trips.emplace_back(static_cast<Index>(r), j, row[j]);
    }
  }
  SparseMatrix out(static_cast<Index>(chi.size()), tree.num_primal());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline std::vector<LinearOperator> build_hierarchical_K(const Tree& tree, Index dbar) {
  require(dbar >= 1, "dbar must be >= 1");
  std::vector<LinearOperator> out;
  for (long s : tree.dual_nodes()) out.push_back(LinearOperator::from_sparse(kron_identity(tree_block_base(tree, s), dbar)));
  return out;
}

inline Topology hierarchical_topology(const Tree& tree, Index dbar) {
  Topology t;
  t.kind = TopologyKind::HierarchicalTree;
  t.m = tree.num_primal();
  t.dbar = dbar;
  t.blocks = build_hierarchical_K(tree, dbar);
  t.tree = tree;
  return t;
}

/// Smallest nonzero singular value of K.
inline double sigma_min_plus(const LinearOperator& K) {
  require(K.max_abs() > 0.0, "sigma_min_plus: zero operator");
  const Index small = std::min(K.rows(), K.cols());
  if (small <= 2000) {
    Matrix dense = K.to_dense();
    Matrix gram = K.rows() <= K.cols() ? Matrix(dense * dense.transpose()) : Matrix(dense.transpose() * dense);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double tol = 1e-10 * std::max(1.0, ev.maxCoeff());
    for (Index i = 0; i < ev.size(); ++i) {
      if (ev[i] > tol) return std::sqrt(ev[i]);
    }
    throw InvalidArgument("sigma_min_plus: operator has no nonzero singular value");
  }
  // Lanczos with full reorthogonalization on the smaller Gram matrix,
  // started inside its range so the kernel is never explored.
  SparseMatrix Ks = K.to_sparse();
  const bool wide = Ks.rows() <= Ks.cols();
  auto gram = [&](const Vector& x) -> Vector {
    return wide ? Vector(Ks * (Ks.transpose() * x)) : Vector(Ks.transpose() * (Ks * x));
  };
  std::mt19937_64 rng(0x73696d70ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector q(small);
  for (Index i = 0; i < small; ++i) q[i] = normal(rng);
  q = gram(q);
  require(q.norm() > 0.0, "sigma_min_plus: operator has no nonzero singular value");
  q.normalize();
  const int max_steps = static_cast<int>(std::min<Index>(small, 1500));
  Matrix Q(small, max_steps);
  std::vector<double> alpha, beta;
  double prev = std::numeric_limits<double>::infinity();
  double top = 0.0;
  for (int j = 0; j < max_steps; ++j) {
    Q.col(j) = q;
    Vector w = gram(q);
    alpha.push_back(q.dot(w));
    // Two passes of Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
    const double b = w.norm();
    if ((j + 1) % 10 == 0 || b <= 1e-12 * std::max(1.0, top) || j + 1 == max_steps) {
      Vector diag = Eigen::Map<const Vector>(alpha.data(), j + 1);
      Vector sub = j > 0 ? Vector(Eigen::Map<const Vector>(beta.data(), j)) : Vector();
      Eigen::SelfAdjointEigenSolver<Matrix> eig;
      eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
      const auto& ev = eig.eigenvalues();
      top = std::max(top, ev.maxCoeff());
      const double tol = 1e-10 * std::max(1.0, top);
      double smallest = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > tol) {
          smallest = ev[i];
          break;
        }
      }
      if (b <= 1e-12 * std::max(1.0, top) || std::abs(smallest - prev) <= 1e-13 * top) return std::sqrt(smallest);
      prev = smallest;
    }
    beta.push_back(b);
    q = w / b;
  }
  return std::sqrt(prev);
}

/// sigma_min_plus of the stacked operator K = (K_1; ...; K_S).
inline double sigma_min_plus(const std::vector<LinearOperator>& blocks) {
  require(!blocks.empty(), "sigma_min_plus: no blocks");
  std::vector<Eigen::Triplet<double>> trips;
  Index row = 0;
  for (const auto& b : blocks) {
    SparseMatrix s = b.to_sparse();
    for (Index r = 0; r < s.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(s, r); it; ++it) trips.emplace_back(row + r, it.col(), it.value());
    row += s.rows();
  }
  SparseMatrix all(row, blocks.front().cols());
  all.setFromTriplets(trips.begin(), trips.end());
  return sigma_min_plus(LinearOperator::from_sparse(std::move(all)));
}

/// Consensus projection Pi X: every agent receives the agent average.
inline Vector consensus_average(const Vector& X, Index m, Index dbar) {
  require_same_size(X.size(), m * dbar, "consensus projection");
  Vector mean = Vector::Zero(dbar);
  for (Index v = 0; v < m; ++v) mean += X.segment(v * dbar, dbar);
  mean /= static_cast<double>(m);
  Vector out(X.size());
  for (Index v = 0; v < m; ++v) out.segment(v * dbar, dbar) = mean;
  return out;
}

/// (I - Pi) X.
inline Vector deviation_apply(const Topology& topo, const Vector& X) {
  return X - consensus_average(X, topo.m, topo.dbar);
}

/// Pi_s X = K_s^* (K_s K_s^*)^+ K_s X. Trees use K_s^T diag(|Des(i)|) K_s.
inline Vector projector_apply(const Topology& topo, Index s, const Vector& X) {
  require(s >= 0 && s < topo.num_blocks(), "projector_apply: block index out of range");
  const auto& K = topo.blocks[s];
  if (topo.kind == TopologyKind::HierarchicalTree) {
    const auto& chi = topo.tree->children(topo.tree->dual_nodes()[s]);
    Vector y = K.apply(X);
    for (std::size_t i = 0; i < chi.size(); ++i) {
      y.segment(static_cast<Index>(i) * topo.dbar, topo.dbar) *=
          static_cast<double>(topo.tree->descendants(chi[i]).size());
    }
    return K.apply_adjoint(y);
  }
  if (topo.kind == TopologyKind::AverageDeviation) return deviation_apply(topo, X);
  Matrix Kd = K.to_dense();
  Matrix gram = Kd * Kd.transpose();
  // the default rank threshold can keep a roundoff-sized null eigenvalue
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(1e-10);
  cod.compute(gram);
  return Kd.transpose() * cod.pseudoInverse() * (Kd * X);
}

/// Largest |entry| of K_s K_{s'}^T over s != s'.
inline double max_cross_product(const std::vector<LinearOperator>& blocks) {
  double worst = 0.0;
  for (std::size_t a = 0; a < blocks.size(); ++a) {
    SparseMatrix A = blocks[a].to_sparse();
    for (std::size_t b = a + 1; b < blocks.size(); ++b) {
      SparseMatrix B = blocks[b].to_sparse();
      SparseMatrix P = A * SparseMatrix(B.transpose());
      for (Index k = 0; k < P.nonZeros(); ++k) worst = std::max(worst, std::abs(P.valuePtr()[k]));
    }
  }
  return worst;
}

enum class SimilarityKind { Global, PerBlock };
enum class SimilarityRule { LipschitzBound, DataOverlap, SubtreeSize, UserSupplied };

/// Bounds a_s (PerBlock) or a_hat_1 (Global) on ||Pi_s grad F|| over the
/// consensus set.
struct SimilarityModel {
  SimilarityKind kind = SimilarityKind::Global;
  SimilarityRule rule = SimilarityRule::UserSupplied;
  std::vector<double> a;

  static SimilarityModel lipschitz(Index m, double M_f) {
    require(M_f >= 0.0, "similarity: M_f must be >= 0");
    return {SimilarityKind::Global, SimilarityRule::LipschitzBound, {2.0 * std::sqrt(double(m)) * M_f}};
  }
  static SimilarityModel data_overlap(Index m, double gamma) {
    require(gamma > 0.0 && gamma <= 1.0, "similarity: gamma must lie in (0, 1]");
    return {SimilarityKind::Global, SimilarityRule::DataOverlap, {2.0 * gamma * std::sqrt(double(m))}};
  }
  /// a_s = scale * 2 sqrt(|Des(s)|) for every dual node of a tree.
  static SimilarityModel subtree_size(const Tree& tree, double scale = 1.0) {
    SimilarityModel out{SimilarityKind::PerBlock, SimilarityRule::SubtreeSize, {}};
    for (long s : tree.dual_nodes()) out.a.push_back(scale * 2.0 * std::sqrt(double(tree.descendants(s).size())));
    return out;
  }
  static SimilarityModel global(double a_hat) {
    require(a_hat >= 0.0, "similarity: a must be >= 0");
    return {SimilarityKind::Global, SimilarityRule::UserSupplied, {a_hat}};
  }
  static SimilarityModel per_block(std::vector<double> a) {
    for (double x : a) require(x >= 0.0, "similarity: a_s must be >= 0");
    return {SimilarityKind::PerBlock, SimilarityRule::UserSupplied, std::move(a)};
  }

  /// a_tilde: a_hat_1 (Global) or sqrt(sum a_s^2) (PerBlock).
  double a_tilde() const {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
  }
};

enum class PenaltyMode { CCV, PRJ };

struct PenaltyPlan {
  PenaltyMode mode = PenaltyMode::PRJ;
  bool per_block = false;
  double xi = 1.0;
  std::vector<double> lambda;
  /// sigma_min_plus(K_s) (per block) and of the stacked K.
  std::vector<double> sigma;
  double sigma_global = 0.0;
  std::vector<double> norms;
  /// Constant A of the complexity bound (general convex case) and the
  /// A_0 / A_1 split used by the strongly convex case.
  double A = 0.0;
  double A0 = 0.0;
  double A1 = 0.0;
  /// Block weights proposed alongside A.
  std::vector<double> rho_hint;
};

/// Per-block ScaledNorm levels:
///   CCV: (xi + a_s) / sigma_s      PRJ: (1 + xi) a_s / sigma_s
/// and the same with a_hat_1, sigma(K) for global similarity.
inline PenaltyPlan make_penalties(const Topology& topo, const SimilarityModel& sim, double xi, PenaltyMode mode) {
  require(xi > 0.0, "make_penalties: xi must be positive");
  const Index S = topo.num_blocks();
  PenaltyPlan plan;
  plan.mode = mode;
  plan.xi = xi;
  plan.per_block = sim.kind == SimilarityKind::PerBlock;
  for (const auto& K : topo.blocks) {
    plan.sigma.push_back(sigma_min_plus(K));
    plan.norms.push_back(operator_norm_estimate(K, kKappaPowerIterations) / 1.01);
  }
  plan.sigma_global = sigma_min_plus(topo.blocks);
  const double norm_sum = std::accumulate(plan.norms.begin(), plan.norms.end(), 0.0);
  if (plan.per_block) {
    require(static_cast<Index>(sim.a.size()) == S, "make_penalties: need one a_s per block");
    const double cross = max_cross_product(topo.blocks);
    if (cross > 1e-10) {
      throw InvalidArgument("make_penalties: per-block similarity needs K_s K_s'^T = 0 (max entry " +
                            std::to_string(cross) + "); use a global similarity");
    }
    double weight_sum = 0.0;
    for (Index s = 0; s < S; ++s) {
      const double a = sim.a[s];
      if (mode == PenaltyMode::PRJ && !(a > 0.0)) {
        throw InvalidArgument("make_penalties: PRJ needs a_s > 0 for every block; use CCV or a global similarity");
      }
      const double lvl = mode == PenaltyMode::CCV ? (xi + a) / plan.sigma[s] : (1.0 + xi) * a / plan.sigma[s];
      plan.lambda.push_back(lvl);
      const double w = mode == PenaltyMode::CCV ? (xi + a) / plan.sigma[s] : a / plan.sigma[s];
      plan.rho_hint.push_back(w);
      weight_sum += w;
      plan.A0 += (mode == PenaltyMode::CCV ? (xi + a) : (1.0 + xi) * a) * plan.norms[s] / plan.sigma[s];
    }
    for (double& w : plan.rho_hint) w /= weight_sum;
    plan.A1 = sim.a_tilde();
  } else {
    require(sim.a.size() == 1, "make_penalties: global similarity carries a single a_hat_1");
    const double a = sim.a[0];
    if (mode == PenaltyMode::PRJ && !(a > 0.0)) {
      throw InvalidArgument("make_penalties: PRJ needs a_hat_1 > 0; use CCV");
    }
    const double lvl = mode == PenaltyMode::CCV ? (xi + a) / plan.sigma_global : (1.0 + xi) * a / plan.sigma_global;
    plan.lambda.assign(S, lvl);
    for (Index s = 0; s < S; ++s) plan.rho_hint.push_back(plan.norms[s] / norm_sum);
    plan.A0 = (mode == PenaltyMode::CCV ? (xi + a) : (1.0 + xi) * a) * norm_sum / plan.sigma_global;
    plan.A1 = a;
  }
  plan.A = plan.A0;
  return plan;
}

/// A lifted consensus problem together with the per-agent pieces.
struct LiftedProblem {
  SaddleProblem problem;
  Topology topology;
  std::vector<ObjectiveOracle> local;
  /// Set when every f_v is linear.
  std::optional<std::vector<Vector>> local_linear;
  ConvexDomain local_domain;
  double mu_f = 0.0;
  double M_f = 0.0;
};

/// F(X) = sum_v f_v(x_v) over the product of local domains, with one
/// ScaledNorm block per consensus operator (or CharZero when lambda is empty).
inline LiftedProblem lift_problem(std::vector<ObjectiveOracle> local, const Topology& topo,
                                  const std::vector<double>& lambda, ConvexDomain local_domain,
                                  double mu_f, double M_f,
                                  std::optional<std::vector<Vector>> local_linear = std::nullopt) {
  const Index m = topo.m, dbar = topo.dbar;
  require(static_cast<Index>(local.size()) == m, "lift_problem: need one local objective per agent");
  require(lambda.empty() || static_cast<Index>(lambda.size()) == topo.num_blocks(),
          "lift_problem: need one penalty level per block");
  LiftedProblem out;
  out.topology = topo;
  out.local = local;
  out.local_domain = local_domain;
  out.mu_f = mu_f;
  out.M_f = M_f;
  out.local_linear = local_linear;

  SaddleProblem& p = out.problem;
  p.dimension = m * dbar;
  p.mu = mu_f;
  p.M = std::sqrt(double(m)) * M_f;
  // Lift the local domain to the product domain.
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ConvexDomain::FreeSpace>) {
          p.primal_domain = ConvexDomain::free_space();
        } else if constexpr (std::is_same_v<K, ConvexDomain::NonnegativeOrthant>) {
          p.primal_domain = ConvexDomain::nonnegative_orthant();
        } else if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
          require(k.center.isZero(0.0), "lift_problem: local ball must be centred at the origin");
          p.primal_domain = ConvexDomain::product_ball(dbar, k.radius);
        } else if constexpr (std::is_same_v<K, ConvexDomain::Box>) {
          Vector lo(m * dbar), hi(m * dbar);
          for (Index v = 0; v < m; ++v) {
            lo.segment(v * dbar, dbar) = k.lower;
            hi.segment(v * dbar, dbar) = k.upper;
          }
          p.primal_domain = ConvexDomain::box(lo, hi);
        } else {
          throw InvalidArgument("lift_problem: unsupported local domain");
        }
      },
      local_domain.kind());

  p.objective = [local, m, dbar](const Vector& X) {
    require_same_size(X.size(), m * dbar, "lifted objective");
    OracleValue out{0.0, Vector(X.size())};
    for (Index v = 0; v < m; ++v) {
      OracleValue ov = local[v](X.segment(v * dbar, dbar));
      out.value += ov.value;
      out.subgradient.segment(v * dbar, dbar) = ov.subgradient;
    }
    return out;
  };
  if (local_linear) {
    require(static_cast<Index>(local_linear->size()) == m, "lift_problem: need one linear coefficient per agent");
    Vector c(m * dbar);
    for (Index v = 0; v < m; ++v) c.segment(v * dbar, dbar) = (*local_linear)[v];
    p.linear_coefficient = c;
  }
  for (Index s = 0; s < topo.num_blocks(); ++s) {
    if (lambda.empty()) {
      p.blocks.push_back(DualBlock::char_zero(topo.blocks[s]));
    } else {
      p.blocks.push_back(DualBlock::scaled_norm(topo.blocks[s], lambda[s]));
    }
  }
  p.validate();
  return out;
}

struct WarmStart {
  Vector X_init;
  int T = 0;
  double eta = 0.0;
  std::vector<int> oracle_calls;
};

/// Independent per-agent gradient sliding (strongly convex schedule) from
/// x0_v with T >= 8 C M_f^2 m / (eps0 mu) and eta = (eps0 / 2) / (m D_x).
inline WarmStart warm_start(const std::vector<ObjectiveOracle>& local, const ConvexDomain& local_domain,
                            const BregmanGeometry& local_geom, double D_x, double eps0, double mu_f,
                            double M_f, const std::vector<Vector>& x0 = {}) {
  require(mu_f > 0.0, "warm_start: mu_f must be positive (use zero init otherwise)");
  require(eps0 > 0.0 && D_x > 0.0, "warm_start: eps0 and D_x must be positive");
  const Index m = static_cast<Index>(local.size());
  const Index dbar = local_geom.dimension;
  const double C = local_geom.curvature;
  WarmStart out;
  const double T_real = std::ceil(8.0 * C * M_f * M_f * double(m) / (eps0 * mu_f));
  require(T_real < 1e8, "warm_start: inner iteration count too large");
  out.T = std::max(1, static_cast<int>(T_real));
  out.eta = (eps0 / 2.0) / (double(m) * D_x);
  out.X_init.resize(m * dbar);
  const SlidingSchedule schedule = SlidingSchedule::strongly_convex(out.T, mu_f, out.eta, C);
  const Vector zero = Vector::Zero(dbar);
  for (Index v = 0; v < m; ++v) {
    const Vector start = x0.empty() ? zero : x0[v];
    const WeightedPoint center{out.eta, start};
    SlidingResult r = gradient_slide(local[v], local_domain, local_geom, schedule,
                                     std::span<const WeightedPoint>(&center, 1), zero, start);
    out.X_init.segment(v * dbar, dbar) = r.u_hat_T;
    out.oracle_calls.push_back(r.inner_oracle_calls);
  }
  return out;
}

}  // namespace mtpdhg
