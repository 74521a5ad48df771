#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fairsample/comp_graph.hpp"
#include "fairsample/gcn.hpp"
#include "fairsample/graph.hpp"
#include "fairsample/sampler.hpp"

namespace fairsample {

struct EvalResult {
  double accuracy = 0.0;
  double delta_dp = 0.0;
  std::vector<double> group_positive_rate;  // -1 for groups absent from the node set
  std::vector<int> group_count;
};

struct EvalMode {
  bool sampled = false;
  int fanout = 10;
  std::uint64_t seed = 0;

  static EvalMode full() { return {}; }
  static EvalMode sample(int fanout, std::uint64_t seed) { return {true, fanout, seed}; }
};

/// Accuracy over the labeled members of `nodes` and the demographic-parity
/// gap (max pairwise difference of positive-prediction rates) over all of
/// them. Hard predictions; full computation graphs unless a sampled mode is
/// requested.
inline EvalResult evaluate(const AttributedGraph& g, const GcnParams& params,
                           const std::vector<int>& nodes, const EvalMode& mode = EvalMode::full()) {
  detail::require(!nodes.empty(), "evaluate: empty node set");
  for (int v : nodes) g.check_node(v);

  std::vector<int> preds(nodes.size());
  if (!mode.sampled) {
    const DenseTensor probs = full_forward_probabilities(g, params);
    std::vector<int> rows(nodes.begin(), nodes.end());
    DenseTensor sub(static_cast<int>(nodes.size()), probs.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (int c = 0; c < probs.cols(); ++c) sub.at(static_cast<int>(i), c) = probs.at(nodes[i], c);
    preds = predict(sub);
  } else {
    SamplerPolicy uniform;
    uniform.variant = SamplerVariant::Uniform;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      GradTape tape;
      GcnTapeParams ids = GcnTapeParams::registered(tape, params);
      Rng rng(derive_seed(mode.seed, {0xe7a1ULL, static_cast<std::uint64_t>(nodes[i])}));
      ComputationGraph cg = params.depth() == 0
                                ? ComputationGraph{0, 0, {TreePosition{nodes[i], 0, {}, {}, {}}}}
                                : build_sampled(g, nodes[i], params.depth(), mode.fanout, uniform, rng);
      TreeForward fwd = forward_tree(tape, g, cg, params, ids);
      preds[i] = predict(tape.value(tape.softmax_rows(fwd.logits)))[0];
    }
  }

  EvalResult out;
  int labeled = 0, correct = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!g.has_label(nodes[i])) continue;
    ++labeled;
    if (preds[i] == g.label(nodes[i])) ++correct;
  }
  detail::require(labeled > 0, "evaluate: no labeled nodes in evaluation set");
  out.accuracy = static_cast<double>(correct) / labeled;

  const int zeta = g.sensitive_domain();
  out.group_count.assign(zeta, 0);
  std::vector<int> positives(zeta, 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int a = g.group_of(nodes[i]);
    ++out.group_count[a];
    positives[a] += preds[i];
  }
  out.group_positive_rate.assign(zeta, -1.0);
  for (int a = 0; a < zeta; ++a)
    if (out.group_count[a] > 0)
      out.group_positive_rate[a] = static_cast<double>(positives[a]) / out.group_count[a];

  // max pairwise gap over the groups present
  out.delta_dp = 0.0;
  for (int a = 0; a < zeta; ++a) {
    if (out.group_count[a] == 0) continue;
    for (int b = a + 1; b < zeta; ++b) {
      if (out.group_count[b] == 0) continue;
      out.delta_dp = std::max(out.delta_dp, std::fabs(out.group_positive_rate[a] - out.group_positive_rate[b]));
    }
  }
  return out;
}

/// One hyperparameter setting's validation summary (already averaged over
/// repetitions).
struct RunSummary {
  std::string config_id;
  double mean_val_accuracy = 0.0;
  double mean_val_delta_dp = 0.0;
};

/// Two-step selection: keep the settings whose mean validation accuracy
/// reaches 95% of the best, then take the smallest mean validation gap.
/// Ties break toward the lexicographically smallest config id.
inline RunSummary select_hyperparameters(const std::vector<RunSummary>& runs) {
  detail::require(!runs.empty(), "select_hyperparameters: empty run list");
  double best_acc = runs[0].mean_val_accuracy;
  for (const auto& r : runs) best_acc = std::max(best_acc, r.mean_val_accuracy);
  const double threshold = best_acc * 0.95;

  const RunSummary* chosen = nullptr;
  for (const auto& r : runs) {
    if (r.mean_val_accuracy < threshold) continue;
    if (chosen == nullptr || r.mean_val_delta_dp < chosen->mean_val_delta_dp ||
        (r.mean_val_delta_dp == chosen->mean_val_delta_dp && r.config_id < chosen->config_id))
      chosen = &r;
  }
  if (chosen == nullptr) {
    for (const auto& r : runs) {
      if (chosen == nullptr || r.mean_val_accuracy > chosen->mean_val_accuracy ||
          (r.mean_val_accuracy == chosen->mean_val_accuracy && r.config_id < chosen->config_id))
        chosen = &r;
    }
  }
  return *chosen;
}

/// Indices of the runs not dominated by any other run. Run j dominates i when
/// j has accuracy >= i and gap <= i with at least one strict inequality.
inline std::vector<std::size_t> pareto_frontier(const std::vector<std::pair<double, double>>& runs) {
  detail::require(!runs.empty(), "pareto_frontier: empty run list");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < runs.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool better_acc = runs[j].first >= runs[i].first;
      const bool better_dp = runs[j].second <= runs[i].second;
      const bool strict = runs[j].first > runs[i].first || runs[j].second < runs[i].second;
      dominated = better_acc && better_dp && strict;
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

}  // namespace fairsample
