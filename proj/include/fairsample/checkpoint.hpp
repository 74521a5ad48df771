#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairsample/edge_injector.hpp"
#include "fairsample/gcn.hpp"
#include "fairsample/graph_io.hpp"
#include "fairsample/metrics.hpp"
#include "fairsample/sampler.hpp"
#include "fairsample/trainer.hpp"

namespace fairsample {

// Tensors serialize as {"rows", "cols", "data"} with row-major data; doubles
// keep shortest-round-trip precision, so save/load is lossless.
inline void to_json(nlohmann::json& j, const DenseTensor& t) {
  j = nlohmann::json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.values()}};
}

inline void from_json(const nlohmann::json& j, DenseTensor& t) {
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  const std::vector<double> data = j.at("data").get<std::vector<double>>();
  detail::require(static_cast<std::size_t>(rows) * cols == data.size(), "tensor: data size mismatch");
  t = DenseTensor(rows, cols);
  for (std::size_t i = 0; i < data.size(); ++i) t[i] = data[i];
}

inline void to_json(nlohmann::json& j, const GcnParams& p) {
  j = nlohmann::json{{"layers", p.layers}, {"classifier", p.classifier}};
}

inline void from_json(const nlohmann::json& j, GcnParams& p) {
  p.layers = j.at("layers").get<std::vector<DenseTensor>>();
  p.classifier = j.at("classifier").get<DenseTensor>();
}

inline void to_json(nlohmann::json& j, const SamplerPolicy& p) {
  j = nlohmann::json{{"variant", to_string(p.variant)}};
  if (p.learnable()) {
    j["w_s"] = p.w_s;
    j["attention"] = p.attention;
  }
}

inline void from_json(const nlohmann::json& j, SamplerPolicy& p) {
  p.variant = sampler_variant_from_string(j.at("variant").get<std::string>());
  if (p.learnable()) {
    p.w_s = j.at("w_s").get<DenseTensor>();
    p.attention = j.at("attention").get<DenseTensor>();
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"alpha", c.alpha},
                     {"layers", c.layers},
                     {"fanout", c.fanout},
                     {"hidden_dim", c.hidden_dim},
                     {"sampler_dim", c.sampler_dim},
                     {"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"seed", c.seed},
                     {"inject_budget", c.inject_budget},
                     {"inject_hops", c.inject_hops},
                     {"inject_tau", c.inject_tau},
                     {"inject_mode", c.inject_mode},
                     {"sampler", c.sampler},
                     {"freeze_attention", c.freeze_attention},
                     {"disable_injector", c.disable_injector},
                     {"disable_regularizer", c.disable_regularizer},
                     {"uniform_sampling", c.uniform_sampling}};
  if (c.attention_init.has_value())
    j["attention_init"] = std::vector<double>{c.attention_init->first, c.attention_init->second};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig defaults;
  c.alpha = j.value("alpha", defaults.alpha);
  c.layers = j.value("layers", defaults.layers);
  c.fanout = j.value("fanout", defaults.fanout);
  c.hidden_dim = j.value("hidden_dim", defaults.hidden_dim);
  c.sampler_dim = j.value("sampler_dim", defaults.sampler_dim);
  c.learning_rate = j.value("learning_rate", defaults.learning_rate);
  c.batch_size = j.value("batch_size", defaults.batch_size);
  c.max_epochs = j.value("max_epochs", defaults.max_epochs);
  c.patience = j.value("patience", defaults.patience);
  c.seed = j.value("seed", defaults.seed);
  c.inject_budget = j.value("inject_budget", defaults.inject_budget);
  c.inject_hops = j.value("inject_hops", defaults.inject_hops);
  c.inject_tau = j.value("inject_tau", defaults.inject_tau);
  c.inject_mode = j.value("inject_mode", defaults.inject_mode);
  c.sampler = j.value("sampler", defaults.sampler);
  c.freeze_attention = j.value("freeze_attention", defaults.freeze_attention);
  c.disable_injector = j.value("disable_injector", defaults.disable_injector);
  c.disable_regularizer = j.value("disable_regularizer", defaults.disable_regularizer);
  c.uniform_sampling = j.value("uniform_sampling", defaults.uniform_sampling);
  if (j.contains("attention_init")) {
    auto v = j.at("attention_init").get<std::vector<double>>();
    detail::require(v.size() == 2, "config: attention_init must have 2 entries");
    c.attention_init = {v[0], v[1]};
  } else {
    c.attention_init.reset();
  }
}

inline void to_json(nlohmann::json& j, const EpochTrace& t) {
  j = nlohmann::json{{"train_loss", t.train_loss},
                     {"val_loss", t.val_loss},
                     {"val_accuracy", t.val_accuracy},
                     {"val_delta_dp", t.val_delta_dp}};
}

inline void from_json(const nlohmann::json& j, EpochTrace& t) {
  t.train_loss = j.at("train_loss").get<double>();
  t.val_loss = j.at("val_loss").get<double>();
  t.val_accuracy = j.at("val_accuracy").get<double>();
  t.val_delta_dp = j.at("val_delta_dp").get<double>();
}

inline void to_json(nlohmann::json& j, const RunReport& r) {
  j = nlohmann::json{{"epochs", r.epochs},
                     {"best_epoch", r.best_epoch},
                     {"epochs_run", r.epochs_run},
                     {"val_accuracy", r.val_accuracy},
                     {"val_delta_dp", r.val_delta_dp},
                     {"test_accuracy", r.test_accuracy},
                     {"test_delta_dp", r.test_delta_dp},
                     {"wall_seconds", r.wall_seconds},
                     {"seed", r.seed}};
}

inline void from_json(const nlohmann::json& j, RunReport& r) {
  r.epochs = j.at("epochs").get<std::vector<EpochTrace>>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.epochs_run = j.at("epochs_run").get<int>();
  r.val_accuracy = j.at("val_accuracy").get<double>();
  r.val_delta_dp = j.at("val_delta_dp").get<double>();
  r.test_accuracy = j.at("test_accuracy").get<double>();
  r.test_delta_dp = j.at("test_delta_dp").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(nlohmann::json& j, const InjectionReport::Edge& e) {
  j = nlohmann::json{{"u", e.u},         {"v", e.v},
                     {"hop_distance", e.hop_distance}, {"label", e.label},
                     {"group_u", e.group_u}, {"group_v", e.group_v}};
}

inline void to_json(nlohmann::json& j, const InjectionReport& r) {
  j = nlohmann::json{{"added", r.added},
                     {"initiated_count", r.initiated_count},
                     {"budget", r.budget},
                     {"hops", r.hops},
                     {"tau", r.tau},
                     {"seed", r.seed},
                     {"pseudo_labels_kept", r.pseudo_labels_kept},
                     {"mode", to_string(r.mode)}};
}

inline void to_json(nlohmann::json& j, const EvalResult& r) {
  j = nlohmann::json{{"accuracy", r.accuracy},
                     {"delta_dp", r.delta_dp},
                     {"group_positive_rate", r.group_positive_rate},
                     {"group_count", r.group_count}};
}

// ---------------------------------------------------------------------------

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  detail::require(out.good(), "cannot write " + path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), "cannot open " + path);
  return nlohmann::json::parse(in);
}

inline void save_checkpoint(const GcnParams& params, const SamplerPolicy& policy, const std::string& path) {
  nlohmann::json j;
  j["gcn"] = params;
  j["sampler"] = policy;
  write_json_file(j, path);
}

inline std::pair<GcnParams, SamplerPolicy> load_checkpoint(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  return {j.at("gcn").get<GcnParams>(), j.at("sampler").get<SamplerPolicy>()};
}

/// Apply `key=value` strings on top of a config JSON object. Values parse as
/// bool, number, or string, in that order.
inline nlohmann::json apply_overrides(nlohmann::json base, const std::vector<std::string>& overrides) {
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    detail::require(eq != std::string::npos && eq > 0, "override must look like key=value: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (value == "true" || value == "false") {
      base[key] = value == "true";
      continue;
    }
    try {
      std::size_t used = 0;
      const double num = std::stod(value, &used);
      if (used == value.size()) {
        if (num == static_cast<long long>(num) && value.find_first_of(".eE") == std::string::npos)
          base[key] = static_cast<long long>(num);
        else
          base[key] = num;
        continue;
      }
    } catch (const std::exception&) {
    }
    base[key] = value;
  }
  return base;
}

inline void write_epoch_trace_csv(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  detail::require(out.good(), "cannot write " + path);
  out << "epoch,train_loss,val_loss,val_accuracy,val_delta_dp\n";
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const auto& t = report.epochs[e];
    out << (e + 1) << ',' << format_double(t.train_loss) << ',' << format_double(t.val_loss) << ','
        << format_double(t.val_accuracy) << ',' << format_double(t.val_delta_dp) << '\n';
  }
}

}  // namespace fairsample
