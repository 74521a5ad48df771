#pragma once

#include <vector>

#include "fairsample/comp_graph.hpp"
#include "fairsample/graph.hpp"
#include "fairsample/sampler.hpp"
#include "fairsample/tensor.hpp"
#include "fairsample/theory.hpp"

namespace fairsample {

/// K-layer GCN weights plus the 2-class head. K = 0 is legal and reduces the
/// model to logistic regression on raw features.
struct GcnParams {
  std::vector<DenseTensor> layers;  // W_1 .. W_K, shapes d_{l-1} x d_l
  DenseTensor classifier;           // d_K x 2

  int depth() const { return static_cast<int>(layers.size()); }

  static GcnParams make(int feature_dim, const std::vector<int>& hidden_dims, Rng& rng) {
    GcnParams p;
    int in = feature_dim;
    for (int out : hidden_dims) {
      p.layers.push_back(glorot_init(in, out, rng));
      in = out;
    }
    p.classifier = glorot_init(in, 2, rng);
    return p;
  }

  void check_shapes(int feature_dim) const {
    int in = feature_dim;
    for (const auto& w : layers) {
      detail::require(w.rows() == in, "GcnParams: layer shape chain broken");
      in = w.cols();
    }
    detail::require(classifier.rows() == in && classifier.cols() == 2,
                    "GcnParams: classifier head shape mismatch");
  }
};

/// Registered tape ids for one training step's parameters.
struct GcnTapeParams {
  std::vector<GradTape::NodeId> layers;
  GradTape::NodeId classifier = -1;

  static GcnTapeParams registered(GradTape& tape, const GcnParams& params) {
    GcnTapeParams ids;
    for (const auto& w : params.layers) ids.layers.push_back(tape.parameter(w));
    ids.classifier = tape.parameter(params.classifier);
    return ids;
  }
};

/// Result of evaluating one computation tree on a tape.
struct TreeForward {
  GradTape::NodeId logits = -1;                 // 1 x 2, pre-softmax
  std::vector<int> level1_positions;            // indices into cg.positions
  std::vector<GradTape::NodeId> level1_h1;      // tape node of h^1 per level-1 position
};

namespace gcn_detail {

// Embedding stack for a tree position: ids[j] holds h^j for 0 <= j <= level.
// h^j aggregates the position's children at j-1 together with its own h^{j-1},
// so a full tree reproduces the whole-graph propagation rule exactly.
inline std::vector<GradTape::NodeId> eval_position(GradTape& tape, const AttributedGraph& g,
                                                   const ComputationGraph& cg, int pos,
                                                   const GcnTapeParams& params,
                                                   std::vector<std::vector<GradTape::NodeId>>& memo) {
  if (!memo[pos].empty()) return memo[pos];
  const TreePosition& p = cg.at(pos);
  std::vector<GradTape::NodeId> stack;
  stack.push_back(tape.constant(DenseTensor::row_vector(g.feature_row(p.node))));
  for (int j = 1; j <= p.level; ++j) {
    std::vector<GradTape::NodeId> rows;
    rows.reserve(p.children.size() + 1);
    for (int child : p.children) rows.push_back(eval_position(tape, g, cg, child, params, memo)[j - 1]);
    rows.push_back(stack[j - 1]);  // self term
    GradTape::NodeId agg = rows.size() == 1 ? rows[0] : tape.mean_rows(tape.stack_rows(rows));
    stack.push_back(tape.relu(tape.matmul(agg, params.layers[j - 1])));
  }
  memo[pos] = std::move(stack);
  return memo[pos];
}

}  // namespace gcn_detail

/// Evaluate a computation tree bottom-up on the tape and return the root's
/// pre-softmax logits, together with the level-1 embedding handles the
/// sampler's gradient estimator needs.
inline TreeForward forward_tree(GradTape& tape, const AttributedGraph& g, const ComputationGraph& cg,
                                const GcnParams& values, const GcnTapeParams& params) {
  detail::require(cg.depth == values.depth(), "forward_tree: tree depth differs from layer count");
  std::vector<std::vector<GradTape::NodeId>> memo(cg.size());
  TreeForward out;
  auto root_stack = gcn_detail::eval_position(tape, g, cg, cg.root, params, memo);
  out.logits = tape.matmul(root_stack[cg.depth], params.classifier);
  for (std::size_t i = 0; i < cg.size(); ++i) {
    if (cg.at(i).level == 1 && !memo[i].empty()) {
      out.level1_positions.push_back(static_cast<int>(i));
      out.level1_h1.push_back(memo[i][1]);
    }
  }
  return out;
}

namespace gcn_detail {

// Tape-free tree evaluation; same recursion as eval_position on raw vectors.
inline std::vector<std::vector<double>> eval_position_plain(const AttributedGraph& g,
                                                            const ComputationGraph& cg, int pos,
                                                            const GcnParams& params) {
  const TreePosition& p = cg.at(pos);
  std::vector<std::vector<double>> stack;
  stack.push_back(g.feature_row(p.node));
  std::vector<std::vector<std::vector<double>>> child_stacks;
  for (int child : p.children) child_stacks.push_back(eval_position_plain(g, cg, child, params));
  for (int j = 1; j <= p.level; ++j) {
    std::vector<double> agg = stack[j - 1];
    for (const auto& cs : child_stacks)
      for (std::size_t c = 0; c < agg.size(); ++c) agg[c] += cs[j - 1][c];
    const double inv = 1.0 / (child_stacks.size() + 1);
    for (double& x : agg) x *= inv;
    DenseTensor h = relu(matmul(DenseTensor::row_vector(agg), params.layers[j - 1]));
    stack.push_back(h.row(0));
  }
  return stack;
}

}  // namespace gcn_detail

/// Root class probabilities of one computation tree, without a tape.
inline std::vector<double> tree_probabilities(const AttributedGraph& g, const ComputationGraph& cg,
                                              const GcnParams& params) {
  detail::require(cg.depth == params.depth(), "tree_probabilities: tree depth differs from layer count");
  const auto stack = gcn_detail::eval_position_plain(g, cg, cg.root, params);
  return softmax_rows(matmul(DenseTensor::row_vector(stack[cg.depth]), params.classifier)).row(0);
}

/// Whole-graph propagation without sampling or tape:
///   H^l = relu( M (H^{l-1} W_l) ),  M row v = mean over Gamma_v and v.
/// Equals evaluating every node's full computation tree; used for validation,
/// test metrics, and pseudo-label inference.
inline DenseTensor full_forward_embeddings(const AttributedGraph& g, const GcnParams& params) {
  params.check_shapes(g.feature_dim());
  DenseTensor h = g.features();
  for (const auto& w : params.layers) {
    DenseTensor z = matmul(h, w);
    DenseTensor agg(z.rows(), z.cols());
    for (int v = 0; v < g.node_count(); ++v) {
      const double inv = 1.0 / (g.degree(v) + 1);
      for (int c = 0; c < z.cols(); ++c) agg.at(v, c) = z.at(v, c);
      for (int u : g.neighbors(v))
        for (int c = 0; c < z.cols(); ++c) agg.at(v, c) += z.at(u, c);
      for (int c = 0; c < z.cols(); ++c) agg.at(v, c) *= inv;
    }
    h = relu(agg);
  }
  return h;
}

inline DenseTensor full_forward_probabilities(const AttributedGraph& g, const GcnParams& params) {
  return softmax_rows(matmul(full_forward_embeddings(g, params), params.classifier));
}

/// Linear-GCN per-node logits (walk^K X) W; W may have any output width.
inline DenseTensor sgcn_forward(const AttributedGraph& g, const DenseTensor& w, int steps) {
  detail::require(w.rows() == g.feature_dim(), "sgcn_forward: weight rows must equal feature dim");
  return sgcn_logits(g, w, steps);
}

/// Hard labels from row-normalized probabilities; ties go to label 0.
inline std::vector<int> predict(const DenseTensor& probabilities) {
  std::vector<int> out(probabilities.rows());
  for (int i = 0; i < probabilities.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < probabilities.cols(); ++j) sum += probabilities.at(i, j);
    detail::require(std::fabs(sum - 1.0) <= 1e-9, "predict: row " + std::to_string(i) + " is not normalized");
    int best = 0;
    for (int j = 1; j < probabilities.cols(); ++j)
      if (probabilities.at(i, j) > probabilities.at(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

}  // namespace fairsample
