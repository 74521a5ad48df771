#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <vector>

#include "fairsample/gcn.hpp"
#include "fairsample/graph.hpp"
#include "fairsample/rng.hpp"

namespace fairsample {

/// High-confidence predicted labels for nodes whose true label is unknown.
struct PseudoLabelSet {
  struct Entry {
    int label = -1;
    double confidence = 0.0;
  };
  std::vector<std::optional<Entry>> entries;  // per node; engaged only off the known set
  double threshold = 0.0;

  int kept() const {
    int n = 0;
    for (const auto& e : entries) n += e.has_value();
    return n;
  }
};

/// Predict labels for every node outside `known_labeled` with the given GCN
/// and keep the ones whose softmax confidence exceeds tau.
inline PseudoLabelSet pseudo_label(const AttributedGraph& g, const GcnParams& predictor, double tau,
                                   const std::vector<int>& known_labeled) {
  detail::require(tau > 0.5 && tau < 1.0, "pseudo_label: tau must lie in (0.5, 1)");
  PseudoLabelSet out;
  out.threshold = tau;
  out.entries.assign(g.node_count(), std::nullopt);
  std::vector<bool> known(g.node_count(), false);
  for (int v : known_labeled) {
    g.check_node(v);
    known[v] = true;
  }
  const DenseTensor probs = full_forward_probabilities(g, predictor);
  for (int v = 0; v < g.node_count(); ++v) {
    if (known[v]) continue;
    const int label = probs.at(v, 1) > probs.at(v, 0) ? 1 : 0;
    const double confidence = probs.at(v, label);
    if (confidence > tau) out.entries[v] = PseudoLabelSet::Entry{label, confidence};
  }
  return out;
}

/// Labeling used by the injector: true labels on the known set plus kept
/// pseudo labels elsewhere. -1 = unusable node.
inline std::vector<int> injector_labeling(const AttributedGraph& g, const std::vector<int>& known_labeled,
                                          const PseudoLabelSet& pseudo) {
  std::vector<int> labels(g.node_count(), -1);
  for (int v : known_labeled) labels[v] = g.label(v);
  for (int v = 0; v < g.node_count(); ++v)
    if (labels[v] == -1 && pseudo.entries[v].has_value()) labels[v] = pseudo.entries[v]->label;
  return labels;
}

/// Candidate endpoints for v: labeled nodes within h hops sharing v's label,
/// from a different group (homophilic mode) or the same group (heterophilic
/// mode); v itself and existing neighbors excluded.
inline std::vector<int> candidate_set(const AttributedGraph& g, int v, const std::vector<int>& labels,
                                      int hops, HomophilyMode mode) {
  g.check_node(v);
  detail::require(hops >= 1, "candidate_set: h must be >= 1");
  detail::require(labels[v] != -1, "candidate_set: node " + std::to_string(v) + " is unlabeled");
  const auto& nbrs = g.neighbors(v);
  std::vector<int> out;
  for (int u : k_hop_neighbors(g, v, hops)) {
    if (labels[u] == -1 || labels[u] != labels[v]) continue;
    const bool same_group = g.group_of(u) == g.group_of(v);
    if (mode == HomophilyMode::Homophilic ? same_group : !same_group) continue;
    if (std::binary_search(nbrs.begin(), nbrs.end(), u)) continue;
    out.push_back(u);
  }
  return out;
}

struct InjectionReport {
  struct Edge {
    int u = -1;  // initiator
    int v = -1;
    int hop_distance = 0;
    int label = -1;
    int group_u = -1;
    int group_v = -1;
  };
  std::vector<Edge> added;
  std::vector<int> initiated_count;  // per node, <= budget
  int budget = 0;
  int hops = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  int pseudo_labels_kept = 0;
  HomophilyMode mode = HomophilyMode::Homophilic;
};

/// Phase-1 graph enrichment. Candidates come from the pre-injection graph;
/// nodes are visited in ascending id order and each draws up to `budget`
/// candidates uniformly without replacement. The result is a new graph with
/// rebuilt indices; budget 0 returns the input unchanged.
inline std::pair<AttributedGraph, InjectionReport> inject(const AttributedGraph& g, int budget, int hops,
                                                          double tau, const GcnParams& predictor,
                                                          HomophilyMode mode,
                                                          const std::vector<int>& known_labeled,
                                                          std::uint64_t seed) {
  detail::require(budget >= 0, "inject: budget must be >= 0");
  InjectionReport report;
  report.budget = budget;
  report.hops = hops;
  report.tau = tau;
  report.seed = seed;
  report.mode = mode;
  report.initiated_count.assign(g.node_count(), 0);
  if (budget == 0) return {g, report};

  const PseudoLabelSet pseudo = pseudo_label(g, predictor, tau, known_labeled);
  report.pseudo_labels_kept = pseudo.kept();
  const std::vector<int> labels = injector_labeling(g, known_labeled, pseudo);

  // hop distances for the report come from the pre-injection graph
  std::set<std::pair<int, int>> edge_set;
  for (const auto& [u, v] : g.edges()) edge_set.insert(std::minmax(u, v));

  std::vector<std::pair<int, int>> new_edges = g.edges();
  Rng rng(derive_seed(seed, {0x1271ec7ULL}));
  std::vector<int> dist(g.node_count());
  for (int v = 0; v < g.node_count(); ++v) {
    if (labels[v] == -1) continue;
    std::vector<int> candidates = candidate_set(g, v, labels, hops, mode);
    if (candidates.empty()) continue;

    // hop distances from v in the pre-injection graph, for the report
    std::fill(dist.begin(), dist.end(), -1);
    dist[v] = 0;
    std::deque<int> queue{v};
    while (!queue.empty()) {
      const int x = queue.front();
      queue.pop_front();
      if (dist[x] == hops) continue;
      for (int y : g.neighbors(x))
        if (dist[y] == -1) {
          dist[y] = dist[x] + 1;
          queue.push_back(y);
        }
    }

    const int take = std::min<int>(budget, static_cast<int>(candidates.size()));
    // partial Fisher-Yates: uniform draw without replacement
    for (int t = 0; t < take; ++t) {
      const int j = t + rng.next_int(static_cast<int>(candidates.size()) - t);
      std::swap(candidates[t], candidates[j]);
      const int u = candidates[t];
      ++report.initiated_count[v];
      if (!edge_set.insert(std::minmax(v, u)).second) continue;  // proposed from both ends; keep one
      new_edges.emplace_back(v, u);
      report.added.push_back({v, u, dist[u], labels[v], g.group_of(v), g.group_of(u)});
    }
  }

  std::vector<int> raw_labels = g.raw_labels();
  std::vector<std::string> ids;
  for (int v = 0; v < g.node_count(); ++v) ids.push_back(g.node_id(v));
  AttributedGraph out(std::move(ids), std::move(new_edges), g.features(), g.sensitive(),
                      std::move(raw_labels), g.sensitive_domain(), g.name());
  return {std::move(out), std::move(report)};
}

}  // namespace fairsample
