#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fairsample/comp_graph.hpp"
#include "fairsample/gcn.hpp"
#include "fairsample/graph.hpp"
#include "fairsample/metrics.hpp"
#include "fairsample/sampler.hpp"
#include "fairsample/tensor.hpp"

namespace fairsample {

struct TrainConfig {
  double alpha = 1.0;          // weight of the fairness regularizer
  int layers = 2;              // K
  int fanout = 10;             // k, distinct children cap per tree position
  int hidden_dim = 32;
  int sampler_dim = 16;        // d_s
  double learning_rate = 1e-2;
  int batch_size = 64;
  int max_epochs = 300;
  int patience = 20;           // epochs without validation-loss improvement
  std::uint64_t seed = 1;

  // phase-1 edge injection
  int inject_budget = 10;      // m, edges initiated per node
  int inject_hops = 2;         // h
  double inject_tau = 0.8;
  std::string inject_mode = "auto";  // auto | homophilic | heterophilic

  std::string sampler = "fairsample";  // fairsample | uniform | stratified
  bool freeze_attention = false;
  std::optional<std::pair<double, double>> attention_init;

  // ablation switches, independent of the fields above
  bool disable_injector = false;     // train on the raw graph
  bool disable_regularizer = false;  // cross-entropy only
  bool uniform_sampling = false;     // override the sampler with uniform draws

  SamplerVariant effective_sampler() const {
    return uniform_sampling ? SamplerVariant::Uniform : sampler_variant_from_string(sampler);
  }
  double effective_alpha() const { return disable_regularizer ? 0.0 : alpha; }
  bool injector_enabled() const { return !disable_injector && inject_budget > 0; }

  void validate() const {
    detail::require(alpha >= 0.0, "config: alpha must be >= 0");
    detail::require(layers >= 0, "config: layers must be >= 0");
    detail::require(fanout >= 1, "config: fanout must be >= 1");
    detail::require(hidden_dim >= 1 && sampler_dim >= 1, "config: dims must be >= 1");
    detail::require(learning_rate > 0.0, "config: learning_rate must be > 0");
    detail::require(batch_size >= 1, "config: batch_size must be >= 1");
    detail::require(max_epochs >= 1, "config: max_epochs must be >= 1");
    detail::require(patience >= 1, "config: patience must be >= 1");
    detail::require(inject_budget >= 0, "config: inject_budget must be >= 0");
    detail::require(inject_hops >= 1, "config: inject_hops must be >= 1");
    detail::require(inject_tau > 0.5 && inject_tau < 1.0, "config: inject_tau must lie in (0.5, 1)");
    detail::require(inject_mode == "auto" || inject_mode == "homophilic" || inject_mode == "heterophilic",
                    "config: bad inject_mode");
    sampler_variant_from_string(sampler);
  }
};

struct EpochTrace {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_delta_dp = 0.0;
};

struct RunReport {
  std::vector<EpochTrace> epochs;
  int best_epoch = 0;            // 1-based epoch restored at the end
  int epochs_run = 0;
  double val_accuracy = 0.0;     // at the restored epoch
  double val_delta_dp = 0.0;
  double test_accuracy = 0.0;    // computed once, after restoration
  double test_delta_dp = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  GcnParams params;
  SamplerPolicy policy;
  RunReport report;
};

// ---------------------------------------------------------------------------

struct AdamState {
  DenseTensor m, v;
  int t = 0;
};

inline void adam_step(DenseTensor& param, const DenseTensor& grad, AdamState& st, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (st.t == 0) {
    st.m = DenseTensor(param.rows(), param.cols(), 0.0);
    st.v = DenseTensor(param.rows(), param.cols(), 0.0);
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(beta1, st.t);
  const double c2 = 1.0 - std::pow(beta2, st.t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    param[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
  }
}

/// Demographic-parity regularizer over a column of positive-class
/// probabilities: sum over groups of |mean in group - mean outside group|.
/// Groups without members on both sides are skipped; when nothing remains the
/// term is zero (and flagged once via `warned`).
inline GradTape::NodeId dp_regularizer(GradTape& tape, GradTape::NodeId positive_probs,
                                       const std::vector<int>& groups, int sensitive_domain,
                                       bool* warned = nullptr) {
  const DenseTensor& p = tape.value(positive_probs);
  detail::require(p.cols() == 1, "dp_regularizer: expected a single probability column");
  detail::require(static_cast<int>(groups.size()) == p.rows(), "dp_regularizer: one group per row required");
  std::vector<GradTape::NodeId> terms;
  for (int a = 0; a < sensitive_domain; ++a) {
    std::vector<int> inside, outside;
    for (std::size_t i = 0; i < groups.size(); ++i)
      (groups[i] == a ? inside : outside).push_back(static_cast<int>(i));
    if (inside.empty() || outside.empty()) continue;
    terms.push_back(tape.abs_mean_diff(tape.gather_rows(positive_probs, inside),
                                       tape.gather_rows(positive_probs, outside)));
  }
  if (terms.empty()) {
    if (warned != nullptr && !*warned) {
      std::fprintf(stderr, "[fairsample] warning: batch contains a single sensitive group; "
                           "regularizer contributes 0\n");
      *warned = true;
    }
    return tape.constant(DenseTensor(1, 1, 0.0));
  }
  return tape.sum_all(tape.stack_rows(terms));
}

namespace trainer_detail {

struct SoftMetrics {
  double ce = 0.0;
  double ldp = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
  double delta_dp = 0.0;
};

// Validation-style metrics from per-node probabilities (row i of `probs`
// belongs to nodes[i]): cross-entropy and a soft regularizer term for the
// loss, hard predictions for accuracy and the parity gap.
inline SoftMetrics soft_metrics(const AttributedGraph& g, const DenseTensor& probs,
                                const std::vector<int>& nodes, double alpha) {
  SoftMetrics out;
  detail::require(!nodes.empty(), "soft_metrics: empty node set");
  detail::require(probs.rows() == static_cast<int>(nodes.size()), "soft_metrics: one row per node");
  int correct = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int v = nodes[i];
    out.ce -= std::log(std::max(probs.at(static_cast<int>(i), g.label(v)), 1e-300));
    const int pred = probs.at(static_cast<int>(i), 1) > probs.at(static_cast<int>(i), 0) ? 1 : 0;
    correct += pred == g.label(v);
  }
  out.ce /= static_cast<double>(nodes.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(nodes.size());

  const int zeta = g.sensitive_domain();
  std::vector<double> soft_sum(zeta, 0.0);
  std::vector<int> count(zeta, 0), hard_sum(zeta, 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int v = nodes[i];
    const int a = g.group_of(v);
    soft_sum[a] += probs.at(static_cast<int>(i), 1);
    hard_sum[a] += probs.at(static_cast<int>(i), 1) > probs.at(static_cast<int>(i), 0) ? 1 : 0;
    ++count[a];
  }
  double total_soft = 0.0;
  int total_count = 0;
  for (int a = 0; a < zeta; ++a) {
    total_soft += soft_sum[a];
    total_count += count[a];
  }
  for (int a = 0; a < zeta; ++a) {
    if (count[a] == 0 || count[a] == total_count) continue;
    const double mean_in = soft_sum[a] / count[a];
    const double mean_out = (total_soft - soft_sum[a]) / (total_count - count[a]);
    out.ldp += std::fabs(mean_in - mean_out);
  }
  for (int a = 0; a < zeta; ++a) {
    if (count[a] == 0) continue;
    for (int b = a + 1; b < zeta; ++b) {
      if (count[b] == 0) continue;
      out.delta_dp = std::max(out.delta_dp, std::fabs(static_cast<double>(hard_sum[a]) / count[a] -
                                                      static_cast<double>(hard_sum[b]) / count[b]));
    }
  }
  out.loss = out.ce + alpha * out.ldp;
  return out;
}

inline ComputationGraph trivial_tree(int root) {
  ComputationGraph cg;
  cg.depth = 0;
  cg.positions.push_back({root, 0, {}, {}, {}});
  return cg;
}

// Per-node class probabilities over sampled computation trees, the same way
// the model aggregates at deployment. Tree seeds depend only on (seed, tag,
// node), so validation losses are comparable across epochs.
inline DenseTensor sampled_probabilities(const AttributedGraph& g, const GcnParams& params,
                                         const SamplerPolicy& policy, const std::vector<int>& nodes,
                                         int fanout, std::uint64_t seed, std::uint64_t tag) {
  DenseTensor probs(static_cast<int>(nodes.size()), 2);
  FeatureTransformCache cache;
  if (policy.learnable()) cache.reset(g.node_count());
  CachedPolicy sampling(policy, cache);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Rng rng(derive_seed(seed, {tag, static_cast<std::uint64_t>(nodes[i])}));
    const ComputationGraph cg = params.depth() == 0
                                    ? trivial_tree(nodes[i])
                                    : build_sampled(g, nodes[i], params.depth(), fanout, sampling, rng);
    const std::vector<double> row = tree_probabilities(g, cg, params);
    probs.at(static_cast<int>(i), 0) = row[0];
    probs.at(static_cast<int>(i), 1) = row[1];
  }
  return probs;
}

}  // namespace trainer_detail

/// Mini-batch training of the classifier and, when learnable, the sampling
/// policy. Per batch: sample computation trees with the current policy, take
/// cross-entropy plus the weighted parity regularizer, backpropagate into the
/// GCN weights, then update the policy from the log-derivative surrogate.
/// Early stopping watches the validation loss at the same alpha; the best
/// checkpoint is restored before the single test evaluation.
///
/// Expects edge injection (when wanted) to have been applied already; see
/// harness.hpp for the two-phase pipeline.
inline TrainResult train(const AttributedGraph& g, const DataSplit& split, const TrainConfig& cfg) {
  cfg.validate();
  split.validate(g);
  detail::require(!split.train.empty(), "train: empty training set");
  detail::require(!split.validation.empty(), "train: empty validation set");
  const auto t_start = std::chrono::steady_clock::now();

  const double alpha = cfg.effective_alpha();
  const SamplerVariant variant = cfg.effective_sampler();
  const int zeta = g.sensitive_domain();

  Rng init_rng(derive_seed(cfg.seed, {0x617ULL}));
  GcnParams params = GcnParams::make(g.feature_dim(), std::vector<int>(cfg.layers, cfg.hidden_dim), init_rng);
  Rng policy_rng(derive_seed(cfg.seed, {0x9a7ULL}));
  SamplerPolicy policy = SamplerPolicy::make(variant, g.feature_dim(), cfg.sampler_dim, policy_rng);
  if (policy.learnable() && cfg.attention_init.has_value()) {
    policy.attention.at(0, 0) = cfg.attention_init->first;
    policy.attention.at(0, 1) = cfg.attention_init->second;
  }

  std::vector<AdamState> layer_opt(params.layers.size());
  AdamState classifier_opt, w_s_opt, attention_opt;

  RunReport report;
  report.seed = cfg.seed;
  GcnParams best_params = params;
  SamplerPolicy best_policy = policy;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  bool warned_single_group = false;
  FeatureTransformCache cache;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<int> order = split.train;
    Rng shuffle_rng(derive_seed(cfg.seed, {0x5bffULL, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      GradTape tape;
      GcnTapeParams param_ids = GcnTapeParams::registered(tape, params);
      if (policy.learnable()) cache.reset(g.node_count());
      CachedPolicy sampling(policy, cache);

      std::vector<GradTape::NodeId> logit_rows;
      std::vector<int> labels, groups;
      std::vector<LevelOneRecord> records;
      std::vector<GradTape::NodeId> record_h1;
      for (std::size_t i = start; i < end; ++i) {
        const int root = order[i];
        Rng tree_rng(derive_seed(cfg.seed, {0xeb0cULL, static_cast<std::uint64_t>(epoch),
                                            static_cast<std::uint64_t>(root)}));
        ComputationGraph cg = cfg.layers == 0
                                  ? trainer_detail::trivial_tree(root)
                                  : build_sampled(g, root, cfg.layers, cfg.fanout, sampling, tree_rng);
        TreeForward fwd = forward_tree(tape, g, cg, params, param_ids);
        logit_rows.push_back(fwd.logits);
        labels.push_back(g.label(root));
        groups.push_back(g.group_of(root));
        for (std::size_t r = 0; r < fwd.level1_positions.size(); ++r) {
          const TreePosition& pos = cg.at(fwd.level1_positions[r]);
          LevelOneRecord rec;
          rec.parent = pos.node;
          for (int child : pos.children) rec.children.push_back(cg.at(child).node);
          records.push_back(std::move(rec));
          record_h1.push_back(fwd.level1_h1[r]);
        }
      }

      GradTape::NodeId batch_logits = tape.stack_rows(logit_rows);
      GradTape::NodeId loss = tape.softmax_cross_entropy(batch_logits, labels);
      if (alpha > 0.0) {
        GradTape::NodeId positive = tape.gather_cols(tape.softmax_rows(batch_logits), {1});
        GradTape::NodeId ldp = dp_regularizer(tape, positive, groups, zeta, &warned_single_group);
        loss = tape.add(loss, tape.scale(ldp, alpha));
      }
      const double loss_value = tape.value(loss).scalar();
      epoch_loss += loss_value * static_cast<double>(end - start);
      epoch_count += static_cast<int>(end - start);

      tape.backward(loss);
      std::vector<DenseTensor> layer_grads;
      for (auto id : param_ids.layers) layer_grads.push_back(tape.gradient(id));
      DenseTensor classifier_grad = tape.gradient(param_ids.classifier);
      for (std::size_t r = 0; r < records.size(); ++r)
        records[r].upstream = tape.gradient(record_h1[r]).row(0);

      PolicyGradient pg;
      const bool update_policy = policy.learnable() && cfg.layers > 0;
      if (update_policy) pg = policy_gradient_step(policy, g, records, params.layers[0]);

      for (std::size_t l = 0; l < params.layers.size(); ++l)
        adam_step(params.layers[l], layer_grads[l], layer_opt[l], cfg.learning_rate);
      adam_step(params.classifier, classifier_grad, classifier_opt, cfg.learning_rate);
      if (update_policy) {
        adam_step(policy.w_s, pg.w_s, w_s_opt, cfg.learning_rate);
        if (!cfg.freeze_attention) adam_step(policy.attention, pg.attention, attention_opt, cfg.learning_rate);
      }
    }

    const DenseTensor probs = trainer_detail::sampled_probabilities(
        g, params, policy, split.validation, cfg.fanout, cfg.seed, 0xe7a1ULL);
    const auto val = trainer_detail::soft_metrics(g, probs, split.validation, alpha);
    EpochTrace trace;
    trace.train_loss = epoch_loss / epoch_count;
    trace.val_loss = val.loss;
    trace.val_accuracy = val.accuracy;
    trace.val_delta_dp = val.delta_dp;
    report.epochs.push_back(trace);
    report.epochs_run = epoch;

    if (val.loss < best_val_loss) {
      best_val_loss = val.loss;
      report.best_epoch = epoch;
      report.val_accuracy = val.accuracy;
      report.val_delta_dp = val.delta_dp;
      best_params = params;
      best_policy = policy;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  TrainResult result;
  result.params = std::move(best_params);
  result.policy = std::move(best_policy);
  if (!split.test.empty()) {
    const DenseTensor probs = trainer_detail::sampled_probabilities(
        g, result.params, result.policy, split.test, cfg.fanout, cfg.seed, 0x7e57ULL);
    const auto test = trainer_detail::soft_metrics(g, probs, split.test, alpha);
    report.test_accuracy = test.accuracy;
    report.test_delta_dp = test.delta_dp;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  result.report = std::move(report);
  return result;
}

}  // namespace fairsample
