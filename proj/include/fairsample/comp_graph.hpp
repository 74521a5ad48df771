#pragma once

#include <cmath>
#include <vector>

#include "fairsample/graph.hpp"
#include "fairsample/rng.hpp"

namespace fairsample {

/// Child-sampling policy: a distribution over the neighbors of a node, in
/// neighbor-list order. Implemented by the sampler module; comp-graph only
/// needs the probabilities.
class ChildSampler {
 public:
  virtual ~ChildSampler() = default;
  virtual std::vector<double> child_probabilities(const AttributedGraph& g, int parent) const = 0;
};

/// One node of a computation tree. Levels count down from the root (level K)
/// to the leaves (level 0); children of a level-l position sit at level l-1.
struct TreePosition {
  int node = -1;
  int level = 0;
  std::vector<int> children;      // indices into ComputationGraph::positions
  std::vector<int> drawn;         // raw draw multiset (node ids), before dedupe
  std::vector<double> probs;      // distribution over neighbors(node) used for the draw
};

struct ComputationGraph {
  int root = 0;  // index of the root position (always 0)
  int depth = 0; // K
  std::vector<TreePosition> positions;

  const TreePosition& at(int i) const { return positions[i]; }
  std::size_t size() const { return positions.size(); }
};

/// Full computation tree: every position fans out to all neighbors.
inline ComputationGraph build_full(const AttributedGraph& g, int root, int depth) {
  g.check_node(root);
  detail::require(depth >= 1, "build_full: depth must be >= 1");
  ComputationGraph cg;
  cg.depth = depth;
  cg.positions.push_back({root, depth, {}, {}, {}});
  // breadth-first expansion
  for (std::size_t i = 0; i < cg.positions.size(); ++i) {
    const int level = cg.positions[i].level;
    const int node = cg.positions[i].node;
    if (level == 0) continue;
    for (int u : g.neighbors(node)) {
      cg.positions[i].children.push_back(static_cast<int>(cg.positions.size()));
      cg.positions.push_back({u, level - 1, {}, {}, {}});
    }
  }
  return cg;
}

/// Down-sampled computation tree: per position, k i.i.d. draws from the
/// policy's distribution over the neighbors, duplicates discarded.
inline ComputationGraph build_sampled(const AttributedGraph& g, int root, int depth, int fanout,
                                      const ChildSampler& policy, Rng& rng) {
  g.check_node(root);
  detail::require(depth >= 1, "build_sampled: depth must be >= 1");
  detail::require(fanout >= 1, "build_sampled: fanout must be >= 1");
  ComputationGraph cg;
  cg.depth = depth;
  cg.positions.push_back({root, depth, {}, {}, {}});
  for (std::size_t i = 0; i < cg.positions.size(); ++i) {
    const int level = cg.positions[i].level;
    const int node = cg.positions[i].node;
    if (level == 0) continue;
    const auto& nbrs = g.neighbors(node);
    if (nbrs.empty()) continue;  // self term alone covers this position

    std::vector<double> probs = policy.child_probabilities(g, node);
    detail::require(probs.size() == nbrs.size(), "sampling policy returned wrong distribution size");
    double total = 0.0;
    for (double p : probs) {
      detail::require(p >= 0.0, "sampling policy returned negative mass");
      total += p;
    }
    detail::require(std::fabs(total - 1.0) <= 1e-9, "sampling policy distribution not normalized");

    std::vector<int> drawn;
    drawn.reserve(fanout);
    for (int t = 0; t < fanout; ++t) drawn.push_back(nbrs[rng.categorical(probs)]);

    std::vector<int> distinct;
    for (int u : drawn) {
      bool dup = false;
      for (int w : distinct) dup = dup || (w == u);
      if (!dup) distinct.push_back(u);
    }

    cg.positions[i].drawn = std::move(drawn);
    cg.positions[i].probs = std::move(probs);
    for (int u : distinct) {
      cg.positions[i].children.push_back(static_cast<int>(cg.positions.size()));
      cg.positions.push_back({u, level - 1, {}, {}, {}});
    }
  }
  return cg;
}

/// Expected position count of the full tree, by independent recursion
/// (used as an oracle and for capacity planning).
inline std::size_t full_tree_size(const AttributedGraph& g, int root, int depth) {
  if (depth == 0) return 1;
  std::size_t total = 1;
  for (int u : g.neighbors(root)) total += full_tree_size(g, u, depth - 1);
  return total;
}

}  // namespace fairsample
