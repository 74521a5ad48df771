#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairsample/graph.hpp"
#include "fairsample/rng.hpp"

namespace fairsample {

/// Stochastic-block-model benchmark generator. The per-group-pair edge
/// probabilities set the intra-group edge ratio (structure bias); the
/// per-(label, group) feature means set the attribute bias; per-group label
/// rates correlate labels with groups so an accurate classifier has a parity
/// gap to fight.
struct SbmSpec {
  int n = 2000;
  std::vector<int> group_sizes = {1000, 1000};
  std::vector<std::vector<double>> edge_prob = {{0.009, 0.001}, {0.001, 0.009}};
  int feature_dim = 16;
  // means[label][group][dim]; built from the two signal knobs when empty
  std::vector<std::vector<std::vector<double>>> class_means;
  double label_signal = 1.0;  // +/- on the first half of the dims by label
  double group_signal = 1.0;  // +/- on the second half of the dims by group
  double noise = 1.0;         // uniform +/- noise per dim
  std::vector<double> label_rate = {0.7, 0.3};  // P(y = 1 | group)
  double labeled_fraction = 0.15;
  double train_fraction = 0.5;  // of the labeled nodes; validation/test split the rest
  double val_fraction = 0.25;
  std::uint64_t seed = 1;
  std::string name = "sbm";

  int groups() const { return static_cast<int>(group_sizes.size()); }

  void validate() const {
    detail::require(n >= 2, "sbm: n must be >= 2");
    detail::require(groups() >= 2, "sbm: at least two groups required");
    int total = 0;
    for (int s : group_sizes) {
      detail::require(s >= 1, "sbm: group sizes must be positive");
      total += s;
    }
    detail::require(total == n, "sbm: group sizes must sum to n");
    detail::require(static_cast<int>(edge_prob.size()) == groups(), "sbm: edge_prob must be groups x groups");
    for (const auto& row : edge_prob) {
      detail::require(static_cast<int>(row.size()) == groups(), "sbm: edge_prob must be groups x groups");
      for (double p : row) detail::require(p >= 0.0 && p <= 1.0, "sbm: edge probability outside [0,1]");
    }
    detail::require(feature_dim >= 1, "sbm: feature_dim must be >= 1");
    detail::require(static_cast<int>(label_rate.size()) == groups(), "sbm: one label rate per group");
    for (double r : label_rate) detail::require(r >= 0.0 && r <= 1.0, "sbm: label rate outside [0,1]");
    detail::require(noise >= 0.0, "sbm: noise must be >= 0");
    detail::require(labeled_fraction > 0.0 && labeled_fraction <= 1.0, "sbm: labeled_fraction in (0,1]");
    detail::require(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0,
                    "sbm: train/validation fractions must be positive and leave room for a test set");
    if (!class_means.empty()) {
      detail::require(class_means.size() == 2, "sbm: class_means must cover labels 0 and 1");
      for (const auto& per_group : class_means) {
        detail::require(static_cast<int>(per_group.size()) == groups(), "sbm: class_means per group");
        for (const auto& mean : per_group)
          detail::require(static_cast<int>(mean.size()) == feature_dim, "sbm: class mean dim mismatch");
      }
    }
  }

  std::vector<double> mean_for(int label, int group) const {
    if (!class_means.empty()) return class_means[label][group];
    std::vector<double> mean(feature_dim, 0.0);
    const int half = feature_dim / 2;
    for (int j = 0; j < half; ++j) mean[j] = label == 1 ? label_signal : -label_signal;
    for (int j = half; j < feature_dim; ++j) mean[j] = group == 0 ? group_signal : -group_signal;
    return mean;
  }
};

inline std::pair<AttributedGraph, DataSplit> generate(const SbmSpec& spec) {
  spec.validate();
  const int n = spec.n;
  const int zeta = spec.groups();

  std::vector<int> group(n);
  {
    int v = 0;
    for (int a = 0; a < zeta; ++a)
      for (int i = 0; i < spec.group_sizes[a]; ++i) group[v++] = a;
  }

  Rng label_rng(derive_seed(spec.seed, {0x1abe1ULL}));
  std::vector<int> truth(n);
  for (int v = 0; v < n; ++v) truth[v] = label_rng.next_double() < spec.label_rate[group[v]] ? 1 : 0;

  Rng feat_rng(derive_seed(spec.seed, {0xfea7ULL}));
  DenseTensor features(n, spec.feature_dim);
  for (int v = 0; v < n; ++v) {
    const std::vector<double> mean = spec.mean_for(truth[v], group[v]);
    for (int j = 0; j < spec.feature_dim; ++j)
      features.at(v, j) = mean[j] + feat_rng.uniform(-spec.noise, spec.noise);
  }

  Rng edge_rng(derive_seed(spec.seed, {0xed6eULL}));
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge_rng.next_double() < spec.edge_prob[group[i]][group[j]]) edges.emplace_back(i, j);

  Rng labeled_rng(derive_seed(spec.seed, {0x0b5eULL}));
  std::vector<int> ids(n);
  for (int v = 0; v < n; ++v) ids[v] = v;
  labeled_rng.shuffle(ids);
  const int labeled_count = std::max(1, static_cast<int>(std::lround(spec.labeled_fraction * n)));
  std::vector<int> labeled(ids.begin(), ids.begin() + labeled_count);

  std::vector<int> labels(n, -1);
  for (int v : labeled) labels[v] = truth[v];

  std::vector<std::string> node_ids(n);
  for (int v = 0; v < n; ++v) node_ids[v] = std::to_string(v);
  AttributedGraph graph(std::move(node_ids), std::move(edges), std::move(features), std::move(group),
                        std::move(labels), zeta, spec.name);

  DataSplit split;
  split.seed = spec.seed;
  Rng split_rng(derive_seed(spec.seed, {0x5917ULL}));
  split_rng.shuffle(labeled);
  const int n_train = std::max(1, static_cast<int>(std::lround(spec.train_fraction * labeled_count)));
  const int n_val = std::max(1, static_cast<int>(std::lround(spec.val_fraction * labeled_count)));
  detail::require(n_train + n_val < labeled_count, "sbm: split leaves no test nodes");
  split.train.assign(labeled.begin(), labeled.begin() + n_train);
  split.validation.assign(labeled.begin() + n_train, labeled.begin() + n_train + n_val);
  split.test.assign(labeled.begin() + n_train + n_val, labeled.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return {std::move(graph), std::move(split)};
}

inline void to_json(nlohmann::json& j, const SbmSpec& s) {
  j = nlohmann::json{{"n", s.n},
                     {"group_sizes", s.group_sizes},
                     {"edge_prob", s.edge_prob},
                     {"feature_dim", s.feature_dim},
                     {"label_signal", s.label_signal},
                     {"group_signal", s.group_signal},
                     {"noise", s.noise},
                     {"label_rate", s.label_rate},
                     {"labeled_fraction", s.labeled_fraction},
                     {"train_fraction", s.train_fraction},
                     {"val_fraction", s.val_fraction},
                     {"seed", s.seed},
                     {"name", s.name}};
  if (!s.class_means.empty()) j["class_means"] = s.class_means;
}

inline void from_json(const nlohmann::json& j, SbmSpec& s) {
  SbmSpec defaults;
  s.n = j.value("n", defaults.n);
  s.group_sizes = j.value("group_sizes", defaults.group_sizes);
  s.edge_prob = j.value("edge_prob", defaults.edge_prob);
  s.feature_dim = j.value("feature_dim", defaults.feature_dim);
  s.class_means = j.value("class_means", defaults.class_means);
  s.label_signal = j.value("label_signal", defaults.label_signal);
  s.group_signal = j.value("group_signal", defaults.group_signal);
  s.noise = j.value("noise", defaults.noise);
  s.label_rate = j.value("label_rate", defaults.label_rate);
  s.labeled_fraction = j.value("labeled_fraction", defaults.labeled_fraction);
  s.train_fraction = j.value("train_fraction", defaults.train_fraction);
  s.val_fraction = j.value("val_fraction", defaults.val_fraction);
  s.seed = j.value("seed", defaults.seed);
  s.name = j.value("name", defaults.name);
}

}  // namespace fairsample
