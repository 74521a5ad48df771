#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fairsample/comp_graph.hpp"
#include "fairsample/graph.hpp"
#include "fairsample/tensor.hpp"

namespace fairsample {

enum class SamplerVariant { FairSample, Uniform, Stratified };

inline const char* to_string(SamplerVariant v) {
  switch (v) {
    case SamplerVariant::FairSample: return "fairsample";
    case SamplerVariant::Uniform: return "uniform";
    case SamplerVariant::Stratified: return "stratified";
  }
  return "?";
}

inline SamplerVariant sampler_variant_from_string(const std::string& s) {
  if (s == "fairsample") return SamplerVariant::FairSample;
  if (s == "uniform") return SamplerVariant::Uniform;
  if (s == "stratified") return SamplerVariant::Stratified;
  throw std::runtime_error("unknown sampler variant '" + s + "'");
}

/// Reciprocal of the count of v_i's neighbors sharing v_j's sensitive value.
/// Boosts neighbors from groups that are rare in the neighborhood.
inline double q_fair(const AttributedGraph& g, int v_i, int v_j) {
  const auto& nbrs = g.neighbors(v_i);
  detail::require(std::binary_search(nbrs.begin(), nbrs.end(), v_j),
                  "q_fair: " + std::to_string(v_j) + " is not a neighbor of " + std::to_string(v_i));
  return 1.0 / g.neighbor_group_count(v_i, g.group_of(v_j));
}

// Softmax over raw scores; shared by the plain and taped policy paths.
inline std::vector<double> softmax(const std::vector<double>& scores) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> out(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    z += out[i];
  }
  for (double& p : out) p /= z;
  return out;
}

/// Per-step cache of x_v W_s rows; owned by the caller and thread-confined.
/// Reset whenever W_s changes.
struct FeatureTransformCache {
  std::vector<std::vector<double>> rows;

  void reset(int node_count) { rows.assign(node_count, {}); }
  bool empty() const { return rows.empty(); }
};

/// Child-sampling policy over neighbor lists. The fairsample variant scores
/// each neighbor by an attention-weighted blend of feature similarity
/// (q_sim) and group-balance (q_fair) and normalizes with a softmax; the
/// uniform and stratified variants are parameter-free references.
class SamplerPolicy : public ChildSampler {
 public:
  SamplerVariant variant = SamplerVariant::Uniform;
  DenseTensor w_s;        // d x d_s feature transform (fairsample only)
  DenseTensor attention;  // 1 x 2: weights of (q_sim, q_fair)

  SamplerPolicy() = default;

  static SamplerPolicy make(SamplerVariant variant, int feature_dim, int transformed_dim, Rng& rng) {
    SamplerPolicy p;
    p.variant = variant;
    if (variant == SamplerVariant::FairSample) {
      p.w_s = glorot_init(feature_dim, transformed_dim, rng);
      p.attention = DenseTensor(1, 2, 1.0);  // both components active at start
    }
    return p;
  }

  bool learnable() const { return variant == SamplerVariant::FairSample; }

  /// (x_i W_s) . (x_j W_s)
  double q_sim(const AttributedGraph& g, int v_i, int v_j) const {
    detail::require(learnable(), "q_sim: only defined for the fairsample variant");
    const DenseTensor ti = matmul(DenseTensor::row_vector(g.feature_row(v_i)), w_s);
    const DenseTensor tj = matmul(DenseTensor::row_vector(g.feature_row(v_j)), w_s);
    double dot = 0.0;
    for (int c = 0; c < ti.cols(); ++c) dot += ti.at(0, c) * tj.at(0, c);
    return dot;
  }

  std::vector<double> child_probabilities(const AttributedGraph& g, int parent) const override {
    return child_probabilities(g, parent, nullptr);
  }

  std::vector<double> child_probabilities(const AttributedGraph& g, int parent,
                                          FeatureTransformCache* cache) const {
    const auto& nbrs = g.neighbors(parent);
    detail::require(!nbrs.empty(), "child_probabilities: node has no neighbors");
    const std::size_t n = nbrs.size();
    switch (variant) {
      case SamplerVariant::Uniform:
        return std::vector<double>(n, 1.0 / static_cast<double>(n));
      case SamplerVariant::Stratified: {
        // 1 / (#groups present * |Gamma ∩ V_{s_j}|): equal mass per present group.
        int present = 0;
        for (int a = 0; a < g.sensitive_domain(); ++a)
          if (g.neighbor_group_count(parent, a) > 0) ++present;
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i)
          out[i] = 1.0 / (static_cast<double>(present) * g.neighbor_group_count(parent, g.group_of(nbrs[i])));
        return out;
      }
      case SamplerVariant::FairSample: {
        const std::vector<double> tp = transformed(g, parent, cache);  // copy: scratch is reused below
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
          const std::vector<double>& tc = transformed(g, nbrs[i], cache);
          double sim = 0.0;
          for (std::size_t c = 0; c < tp.size(); ++c) sim += tp[c] * tc[c];
          scores[i] = attention.at(0, 0) * sim + attention.at(0, 1) * q_fair(g, parent, nbrs[i]);
        }
        return softmax(scores);
      }
    }
    throw std::runtime_error("child_probabilities: bad variant");
  }

 private:
  const std::vector<double>& transformed(const AttributedGraph& g, int v,
                                         FeatureTransformCache* cache) const {
    if (cache != nullptr) {
      if (cache->rows[v].empty()) cache->rows[v] = matmul(DenseTensor::row_vector(g.feature_row(v)), w_s).row(0);
      return cache->rows[v];
    }
    scratch_ = matmul(DenseTensor::row_vector(g.feature_row(v)), w_s).row(0);
    return scratch_;
  }

  mutable std::vector<double> scratch_;
};

/// Thin adapter binding a policy to a per-step transform cache so tree
/// construction does not recompute x W_s per pair.
class CachedPolicy : public ChildSampler {
 public:
  CachedPolicy(const SamplerPolicy& policy, FeatureTransformCache& cache)
      : policy_(policy), cache_(cache) {}

  std::vector<double> child_probabilities(const AttributedGraph& g, int parent) const override {
    return policy_.child_probabilities(g, parent, &cache_);
  }

 private:
  const SamplerPolicy& policy_;
  FeatureTransformCache& cache_;
};

/// One first-layer tree position with its sampled children and the loss
/// gradient w.r.t. that position's level-1 embedding (a constant here).
struct LevelOneRecord {
  int parent = -1;
  std::vector<int> children;      // deduped sampled child node ids
  std::vector<double> upstream;   // dL/dh1 for this position
};

struct PolicyGradient {
  DenseTensor w_s;
  DenseTensor attention;
  double surrogate = 0.0;
};

/// Build the log-derivative surrogate
///   S = (1/|T1|) sum_i < dL/dh1_i, (1/|p(v_i)|) sum_{j in p(v_i)} log P(j|i) (x_j W1) >
/// on the given tape. Returns the scalar node; `w_s_node` / `attn_node` must
/// already be registered parameters on the tape. W1 enters as a constant.
inline GradTape::NodeId build_policy_surrogate(GradTape& tape, const AttributedGraph& g,
                                               GradTape::NodeId w_s_node, GradTape::NodeId attn_node,
                                               const std::vector<LevelOneRecord>& records,
                                               const DenseTensor& w1) {
  std::map<int, GradTape::NodeId> transformed;  // node -> tape id of x_v W_s
  auto transform = [&](int v) {
    auto it = transformed.find(v);
    if (it != transformed.end()) return it->second;
    GradTape::NodeId t = tape.matmul(tape.constant(DenseTensor::row_vector(g.feature_row(v))), w_s_node);
    transformed.emplace(v, t);
    return t;
  };
  std::map<int, std::vector<double>> projected;  // node -> x_v W1 (plain)
  auto project = [&](int v) -> const std::vector<double>& {
    auto it = projected.find(v);
    if (it == projected.end())
      it = projected.emplace(v, matmul(DenseTensor::row_vector(g.feature_row(v)), w1).row(0)).first;
    return it->second;
  };

  std::vector<GradTape::NodeId> terms;
  for (const auto& rec : records) {
    const auto& nbrs = g.neighbors(rec.parent);
    if (nbrs.empty() || rec.children.empty()) {
      terms.push_back(tape.constant(DenseTensor(1, 1, 0.0)));  // still counts toward |T1|
      continue;
    }
    std::vector<GradTape::NodeId> rows;
    rows.reserve(nbrs.size());
    for (int u : nbrs) rows.push_back(transform(u));
    GradTape::NodeId sim = tape.matmul(transform(rec.parent), tape.transpose(tape.stack_rows(rows)));

    DenseTensor fair(1, static_cast<int>(nbrs.size()));
    for (std::size_t i = 0; i < nbrs.size(); ++i) fair.at(0, static_cast<int>(i)) = q_fair(g, rec.parent, nbrs[i]);

    GradTape::NodeId scores = tape.matmul(attn_node, tape.stack_rows({sim, tape.constant(fair)}));
    GradTape::NodeId log_probs = tape.log_softmax_rows(scores);

    DenseTensor weights(static_cast<int>(nbrs.size()), 1, 0.0);
    for (int child : rec.children) {
      const std::vector<double>& xw = project(child);
      double dot = 0.0;
      for (std::size_t c = 0; c < xw.size(); ++c) dot += rec.upstream[c] * xw[c];
      const auto pos = std::lower_bound(nbrs.begin(), nbrs.end(), child);
      detail::require(pos != nbrs.end() && *pos == child, "surrogate: sampled child not in neighbor list");
      weights.at(static_cast<int>(pos - nbrs.begin()), 0) += dot / static_cast<double>(rec.children.size());
    }
    terms.push_back(tape.matmul(log_probs, tape.constant(weights)));
  }
  detail::require(!terms.empty(), "build_policy_surrogate: no level-1 records");
  return tape.mean_rows(tape.stack_rows(terms));
}

/// Gradient of the surrogate w.r.t. the policy parameters. Non-learnable
/// variants get exact zeros.
inline PolicyGradient policy_gradient_step(const SamplerPolicy& policy, const AttributedGraph& g,
                                           const std::vector<LevelOneRecord>& records,
                                           const DenseTensor& w1) {
  PolicyGradient out;
  if (!policy.learnable()) {
    out.w_s = DenseTensor(policy.w_s.rows(), policy.w_s.cols(), 0.0);
    out.attention = DenseTensor(policy.attention.rows(), policy.attention.cols(), 0.0);
    return out;
  }
  if (records.empty()) {
    out.w_s = DenseTensor(policy.w_s.rows(), policy.w_s.cols(), 0.0);
    out.attention = DenseTensor(1, 2, 0.0);
    return out;
  }
  GradTape tape;
  GradTape::NodeId w_s_node = tape.parameter(policy.w_s);
  GradTape::NodeId attn_node = tape.parameter(policy.attention);
  GradTape::NodeId s = build_policy_surrogate(tape, g, w_s_node, attn_node, records, w1);
  out.surrogate = tape.value(s).scalar();
  tape.backward(s);
  out.w_s = tape.gradient(w_s_node);
  out.attention = tape.gradient(attn_node);
  return out;
}

}  // namespace fairsample
