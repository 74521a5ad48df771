#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fairsample/tensor.hpp"

namespace fairsample {

/// Immutable attributed graph: undirected edges, per-node features, one
/// sensitive value per node, optional binary labels. Indices (adjacency,
/// group membership, per-node group counts) are built once at construction
/// and the object is safe to share across readers.
class AttributedGraph {
 public:
  AttributedGraph(std::vector<std::string> node_ids, std::vector<std::pair<int, int>> edges,
                  DenseTensor features, std::vector<int> sensitive, std::vector<int> labels,
                  int sensitive_domain, std::string name = "")
      : node_ids_(std::move(node_ids)),
        edges_(std::move(edges)),
        features_(std::move(features)),
        sensitive_(std::move(sensitive)),
        labels_(std::move(labels)),
        sensitive_domain_(sensitive_domain),
        name_(std::move(name)) {
    validate_and_index();
  }

  int node_count() const { return static_cast<int>(node_ids_.size()); }
  int feature_dim() const { return features_.cols(); }
  int sensitive_domain() const { return sensitive_domain_; }
  const std::string& name() const { return name_; }

  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  const DenseTensor& features() const { return features_; }
  std::vector<double> feature_row(int v) const { return features_.row(v); }

  int group_of(int v) const { return sensitive_[v]; }
  const std::vector<int>& sensitive() const { return sensitive_; }

  bool has_label(int v) const { return labels_[v] >= 0; }
  int label(int v) const {
    detail::require(has_label(v), "label: node " + std::to_string(v) + " is unlabeled");
    return labels_[v];
  }
  const std::vector<int>& raw_labels() const { return labels_; }
  std::vector<int> labeled_nodes() const {
    std::vector<int> out;
    for (int v = 0; v < node_count(); ++v)
      if (has_label(v)) out.push_back(v);
    return out;
  }

  const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }
  int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }

  const std::vector<int>& group_members(int a) const { return group_nodes_[a]; }

  /// |Gamma_v intersect V_a|
  int neighbor_group_count(int v, int a) const { return neighbor_group_count_[v][a]; }

  const std::string& node_id(int v) const { return node_ids_[v]; }

  void check_node(int v) const {
    detail::require(v >= 0 && v < node_count(), "unknown node id " + std::to_string(v));
  }

 private:
  void validate_and_index() {
    const int n = node_count();
    detail::require(n > 0, "graph must contain at least one node");
    detail::require(sensitive_domain_ >= 2, "sensitive domain must contain at least 2 values");
    detail::require(features_.rows() == n, "feature matrix row count must equal node count");
    detail::require(static_cast<int>(sensitive_.size()) == n, "one sensitive value per node required");
    detail::require(static_cast<int>(labels_.size()) == n, "label vector size must equal node count");
    detail::require(features_.all_finite(), "non-finite feature value");
    for (int v = 0; v < n; ++v) {
      detail::require(sensitive_[v] >= 0 && sensitive_[v] < sensitive_domain_,
                      "node " + node_ids_[v] + ": sensitive value out of domain");
      detail::require(labels_[v] == -1 || labels_[v] == 0 || labels_[v] == 1,
                      "node " + node_ids_[v] + ": label must be 0, 1, or absent");
    }

    adjacency_.assign(n, {});
    std::set<std::pair<int, int>> seen;
    for (const auto& [u, v] : edges_) {
      detail::require(u >= 0 && u < n && v >= 0 && v < n, "edge references unknown node");
      detail::require(u != v, "self-loop rejected: (" + node_ids_[u] + "," + node_ids_[u] + ")");
      auto key = std::minmax(u, v);
      detail::require(seen.insert(key).second,
                      "duplicate edge rejected: (" + node_ids_[u] + "," + node_ids_[v] + ")");
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());

    group_nodes_.assign(sensitive_domain_, {});
    for (int v = 0; v < n; ++v) group_nodes_[sensitive_[v]].push_back(v);

    neighbor_group_count_.assign(n, std::vector<int>(sensitive_domain_, 0));
    for (int v = 0; v < n; ++v)
      for (int u : adjacency_[v]) ++neighbor_group_count_[v][sensitive_[u]];
  }

  std::vector<std::string> node_ids_;
  std::vector<std::pair<int, int>> edges_;
  DenseTensor features_;
  std::vector<int> sensitive_;
  std::vector<int> labels_;  // -1 = unlabeled
  int sensitive_domain_;
  std::string name_;

  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> group_nodes_;
  std::vector<std::vector<int>> neighbor_group_count_;
};

struct DataSplit {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
  std::uint64_t seed = 0;

  void validate(const AttributedGraph& g) const {
    std::set<int> all;
    for (const auto* part : {&train, &validation, &test})
      for (int v : *part) {
        g.check_node(v);
        detail::require(g.has_label(v), "split member " + std::to_string(v) + " is unlabeled");
        detail::require(all.insert(v).second, "split parts must be pairwise disjoint");
      }
  }
};

inline double intra_group_edge_ratio(const AttributedGraph& g) {
  detail::require(g.edge_count() >= 1, "intra_group_edge_ratio: empty edge set");
  std::size_t intra = 0;
  for (const auto& [u, v] : g.edges())
    if (g.group_of(u) == g.group_of(v)) ++intra;
  return static_cast<double>(intra) / static_cast<double>(g.edge_count());
}

enum class HomophilyMode { Homophilic, Heterophilic };

inline const char* to_string(HomophilyMode m) {
  return m == HomophilyMode::Homophilic ? "homophilic" : "heterophilic";
}

// Ties count as homophilic.
inline HomophilyMode homophily_mode(const AttributedGraph& g) {
  return intra_group_edge_ratio(g) >= 0.5 ? HomophilyMode::Homophilic : HomophilyMode::Heterophilic;
}

/// Nodes at shortest-path distance in [1, h] from v; v itself excluded.
inline std::vector<int> k_hop_neighbors(const AttributedGraph& g, int v, int h) {
  g.check_node(v);
  detail::require(h >= 1, "k_hop_neighbors: h must be >= 1");
  std::vector<int> dist(g.node_count(), -1);
  std::deque<int> queue{v};
  dist[v] = 0;
  std::vector<int> out;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (dist[u] == h) continue;
    for (int w : g.neighbors(u)) {
      if (dist[w] != -1) continue;
      dist[w] = dist[u] + 1;
      out.push_back(w);
      queue.push_back(w);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fairsample
