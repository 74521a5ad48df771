#pragma once

#include <cmath>
#include <vector>

#include "fairsample/graph.hpp"
#include "fairsample/rng.hpp"
#include "fairsample/tensor.hpp"

namespace fairsample {

/// K-step random-walk matrix and the per-group walk statistics.
/// The single-step matrix is the self-loop-augmented row-normalized
/// adjacency T = (D+I)^{-1}(A+I); row v spreads mass 1/(deg(v)+1) over
/// Gamma_v and v itself, so every row sums to 1.
struct RandomWalkStats {
  DenseTensor walk;                 // n x n, row-stochastic
  std::vector<double> beta_same;    // beta[a, a]
  std::vector<double> beta_cross;   // beta[!=a, a]
  int steps = 0;
};

inline DenseTensor one_step_walk_matrix(const AttributedGraph& g) {
  const int n = g.node_count();
  DenseTensor t(n, n);
  for (int v = 0; v < n; ++v) {
    const double w = 1.0 / (g.degree(v) + 1);
    t.at(v, v) = w;
    for (int u : g.neighbors(v)) t.at(v, u) = w;
  }
  return t;
}

inline RandomWalkStats random_walk_matrix(const AttributedGraph& g, int steps) {
  detail::require(steps >= 0, "random_walk_matrix: steps must be >= 0");
  const int n = g.node_count();
  RandomWalkStats stats;
  stats.steps = steps;
  stats.walk = DenseTensor::identity(n);
  if (steps > 0) {
    const DenseTensor t = one_step_walk_matrix(g);
    for (int s = 0; s < steps; ++s) stats.walk = matmul(stats.walk, t);
  }

  const int zeta = g.sensitive_domain();
  stats.beta_same.assign(zeta, 0.0);
  stats.beta_cross.assign(zeta, 0.0);
  for (int a = 0; a < zeta; ++a) {
    const auto& inside = g.group_members(a);
    double same = 0.0, cross = 0.0;
    for (int i = 0; i < n; ++i) {
      double mass = 0.0;
      for (int j : inside) mass += stats.walk.at(i, j);
      if (g.group_of(i) == a)
        same += mass;
      else
        cross += mass;
    }
    const std::size_t outside = static_cast<std::size_t>(n) - inside.size();
    stats.beta_same[a] = inside.empty() ? 0.0 : same / static_cast<double>(inside.size());
    stats.beta_cross[a] = outside == 0 ? 0.0 : cross / static_cast<double>(outside);
  }
  return stats;
}

/// Group feature statistics feeding the bound: group means, means of the
/// complements, and the worst per-coordinate deviation within each side.
struct GroupFeatureStats {
  std::vector<std::vector<double>> mu;        // mean feature vector of V_a
  std::vector<std::vector<double>> mu_rest;   // mean feature vector of V_{!=a}
  std::vector<double> dev;                    // max_v ||x_v - mu_a||_inf over V_a
  std::vector<double> dev_rest;
  std::vector<double> delta;                  // max(dev, dev_rest)
};

inline GroupFeatureStats group_feature_stats(const AttributedGraph& g) {
  const int zeta = g.sensitive_domain();
  const int d = g.feature_dim();
  GroupFeatureStats s;
  s.mu.assign(zeta, std::vector<double>(d, 0.0));
  s.mu_rest.assign(zeta, std::vector<double>(d, 0.0));
  s.dev.assign(zeta, 0.0);
  s.dev_rest.assign(zeta, 0.0);
  s.delta.assign(zeta, 0.0);
  for (int a = 0; a < zeta; ++a) {
    detail::require(!g.group_members(a).empty(), "group_feature_stats: empty group " + std::to_string(a));
    detail::require(g.group_members(a).size() < static_cast<std::size_t>(g.node_count()),
                    "group_feature_stats: group " + std::to_string(a) + " has empty complement");
    int count_rest = 0;
    for (int v = 0; v < g.node_count(); ++v) {
      auto& acc = (g.group_of(v) == a) ? s.mu[a] : s.mu_rest[a];
      if (g.group_of(v) != a) ++count_rest;
      for (int j = 0; j < d; ++j) acc[j] += g.features().at(v, j);
    }
    for (int j = 0; j < d; ++j) {
      s.mu[a][j] /= static_cast<double>(g.group_members(a).size());
      s.mu_rest[a][j] /= static_cast<double>(count_rest);
    }
    for (int v = 0; v < g.node_count(); ++v) {
      const bool in = g.group_of(v) == a;
      const auto& mean = in ? s.mu[a] : s.mu_rest[a];
      double gap = 0.0;
      for (int j = 0; j < d; ++j) gap = std::max(gap, std::fabs(g.features().at(v, j) - mean[j]));
      (in ? s.dev[a] : s.dev_rest[a]) = std::max(in ? s.dev[a] : s.dev_rest[a], gap);
    }
    s.delta[a] = std::max(s.dev[a], s.dev_rest[a]);
  }
  return s;
}

/// Largest singular value via power iteration on W^T W.
inline double spectral_norm(const DenseTensor& w, int max_iters = 100, double tol = 1e-10) {
  const DenseTensor gram = matmul(transpose(w), w);
  const int d = gram.rows();
  if (d == 0) return 0.0;
  Rng rng(0x5eedb07d1234ULL);
  std::vector<double> v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.uniform(0.5, 1.0);
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> next(d, 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) next[i] += gram.at(i, j) * v[j];
    const double norm = l2_norm(next);
    if (norm == 0.0) return 0.0;
    for (double& x : next) x /= norm;
    double estimate = 0.0;
    for (int i = 0; i < d; ++i) {
      double row = 0.0;
      for (int j = 0; j < d; ++j) row += gram.at(i, j) * next[j];
      estimate += next[i] * row;
    }
    v = std::move(next);
    if (std::fabs(estimate - lambda) <= tol) {
      lambda = estimate;
      break;
    }
    lambda = estimate;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

/// Linear-GCN logits: (walk^K X) W for every node.
inline DenseTensor sgcn_logits(const AttributedGraph& g, const DenseTensor& w, int steps) {
  const RandomWalkStats stats = random_walk_matrix(g, steps);
  return matmul(matmul(stats.walk, g.features()), w);
}

/// Empirical disparity of mean logits between each group and its complement,
/// summed over groups.
inline double empirical_dp(const AttributedGraph& g, const DenseTensor& w, int steps) {
  const DenseTensor logits = sgcn_logits(g, w, steps);
  const int zeta = g.sensitive_domain();
  double total = 0.0;
  for (int a = 0; a < zeta; ++a) {
    const auto& inside = g.group_members(a);
    detail::require(!inside.empty(), "empirical_dp: empty group " + std::to_string(a));
    detail::require(inside.size() < static_cast<std::size_t>(g.node_count()),
                    "empirical_dp: group " + std::to_string(a) + " has empty complement");
    std::vector<double> gap(logits.cols(), 0.0);
    const double n_in = static_cast<double>(inside.size());
    const double n_out = static_cast<double>(g.node_count()) - n_in;
    for (int v = 0; v < g.node_count(); ++v) {
      const double scale = (g.group_of(v) == a) ? 1.0 / n_in : -1.0 / n_out;
      for (int c = 0; c < logits.cols(); ++c) gap[c] += scale * logits.at(v, c);
    }
    total += l2_norm(gap);
  }
  return total;
}

/// Closed-form upper bound on empirical_dp for linear GCNs:
///   sum_a ||W||_2 ( |beta[a,a] - beta[!=a,a]| ||mu_a - mu_!=a||_2
///                   + 2 sqrt(d) sum_{a'} delta_{a'} )
inline double dp_upper_bound(const AttributedGraph& g, const DenseTensor& w, int steps) {
  const RandomWalkStats walk = random_walk_matrix(g, steps);
  const GroupFeatureStats feats = group_feature_stats(g);
  const double w_norm = spectral_norm(w);
  const double sqrt_d = std::sqrt(static_cast<double>(g.feature_dim()));
  double delta_sum = 0.0;
  for (double dl : feats.delta) delta_sum += dl;
  double bound = 0.0;
  for (int a = 0; a < g.sensitive_domain(); ++a) {
    std::vector<double> mu_gap(g.feature_dim());
    for (int j = 0; j < g.feature_dim(); ++j) mu_gap[j] = feats.mu[a][j] - feats.mu_rest[a][j];
    bound += w_norm * (std::fabs(walk.beta_same[a] - walk.beta_cross[a]) * l2_norm(mu_gap) +
                       2.0 * sqrt_d * delta_sum);
  }
  return bound;
}

/// Per-node spread of neighbor counts across groups (max minus min over the
/// whole sensitive domain), plus the graph-level mean. Zero everywhere means
/// every neighborhood is balanced.
struct BalancednessReport {
  std::vector<int> per_node_gap;
  double mean_gap = 0.0;
};

inline BalancednessReport balancedness(const AttributedGraph& g) {
  BalancednessReport rep;
  rep.per_node_gap.resize(g.node_count());
  double total = 0.0;
  for (int v = 0; v < g.node_count(); ++v) {
    int lo = g.neighbor_group_count(v, 0), hi = lo;
    for (int a = 1; a < g.sensitive_domain(); ++a) {
      lo = std::min(lo, g.neighbor_group_count(v, a));
      hi = std::max(hi, g.neighbor_group_count(v, a));
    }
    rep.per_node_gap[v] = hi - lo;
    total += hi - lo;
  }
  rep.mean_gap = total / g.node_count();
  return rep;
}

}  // namespace fairsample
