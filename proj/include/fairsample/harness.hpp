#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fairsample/checkpoint.hpp"
#include "fairsample/edge_injector.hpp"
#include "fairsample/graph_io.hpp"
#include "fairsample/metrics.hpp"
#include "fairsample/synth.hpp"
#include "fairsample/theory.hpp"
#include "fairsample/trainer.hpp"

namespace fairsample {

inline HomophilyMode resolve_inject_mode(const AttributedGraph& g, const std::string& mode) {
  if (mode == "homophilic") return HomophilyMode::Homophilic;
  if (mode == "heterophilic") return HomophilyMode::Heterophilic;
  detail::require(mode == "auto", "unknown injection mode '" + mode + "'");
  return homophily_mode(g);
}

/// Train the auxiliary label predictor: a plain 2-layer GCN with the run's
/// optimizer settings, no regularizer, uniform sampling, on the raw graph.
inline TrainConfig predictor_config(const TrainConfig& cfg) {
  TrainConfig p = cfg;
  p.alpha = 0.0;
  p.sampler = "uniform";
  p.uniform_sampling = false;
  p.freeze_attention = false;
  p.attention_init.reset();
  p.disable_regularizer = false;
  p.disable_injector = true;
  p.inject_budget = 0;
  p.layers = 2;
  p.seed = derive_seed(cfg.seed, {0x9ced1c7ULL});
  return p;
}

struct PreparedData {
  AttributedGraph graph;
  std::optional<InjectionReport> injection;
};

/// Phase 1: when injection is enabled, train the pseudo-label predictor and
/// return the enriched graph; otherwise pass the input through.
inline PreparedData prepare_data(const AttributedGraph& g, const DataSplit& split, const TrainConfig& cfg) {
  if (!cfg.injector_enabled()) return {g, std::nullopt};
  const TrainConfig pcfg = predictor_config(cfg);
  TrainResult predictor = train(g, split, pcfg);
  const HomophilyMode mode = resolve_inject_mode(g, cfg.inject_mode);
  auto [enriched, report] = inject(g, cfg.inject_budget, cfg.inject_hops, cfg.inject_tau,
                                   predictor.params, mode, split.train,
                                   derive_seed(cfg.seed, {0x13ec7ULL}));
  return {std::move(enriched), std::move(report)};
}

struct PipelineResult {
  TrainResult trained;
  std::optional<InjectionReport> injection;
  std::optional<AttributedGraph> enriched_graph;  // set when injection ran; the model's graph
};

/// Phase 1 + phase 2 end to end.
inline PipelineResult run_pipeline(const AttributedGraph& g, const DataSplit& split, const TrainConfig& cfg) {
  PreparedData data = prepare_data(g, split, cfg);
  PipelineResult out;
  out.injection = std::move(data.injection);
  out.trained = train(data.graph, split, cfg);
  if (out.injection.has_value()) out.enriched_graph = std::move(data.graph);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment suites

struct SuiteMethod {
  std::string id;
  std::string family;          // selection pool; defaults to the id
  nlohmann::json overrides;    // TrainConfig fields layered over the base
};

struct SuiteConfig {
  SbmSpec sbm;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  TrainConfig base;
  std::vector<SuiteMethod> methods;
};

inline void from_json(const nlohmann::json& j, SuiteMethod& m) {
  m.id = j.at("id").get<std::string>();
  m.family = j.value("family", m.id);
  m.overrides = j.value("overrides", nlohmann::json::object());
}

inline void from_json(const nlohmann::json& j, SuiteConfig& s) {
  s.sbm = j.value("sbm", SbmSpec{});
  s.seeds = j.value("seeds", s.seeds);
  if (j.contains("base")) s.base = j.at("base").get<TrainConfig>();
  s.methods = j.at("methods").get<std::vector<SuiteMethod>>();
  detail::require(!s.methods.empty(), "suite: no methods listed");
  detail::require(!s.seeds.empty(), "suite: no seeds listed");
}

struct CellResult {
  std::string method_id;
  std::string family;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double val_accuracy = 0.0;
  double val_delta_dp = 0.0;
  double test_accuracy = 0.0;
  double test_delta_dp = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
  nlohmann::json config;
};

inline void to_json(nlohmann::json& j, const CellResult& c) {
  j = nlohmann::json{{"method_id", c.method_id}, {"family", c.family},
                     {"seed", c.seed},           {"failed", c.failed},
                     {"error", c.error},         {"val_accuracy", c.val_accuracy},
                     {"val_delta_dp", c.val_delta_dp}, {"test_accuracy", c.test_accuracy},
                     {"test_delta_dp", c.test_delta_dp}, {"epochs_run", c.epochs_run},
                     {"best_epoch", c.best_epoch}, {"config", c.config}};
}

inline void from_json(const nlohmann::json& j, CellResult& c) {
  c.method_id = j.at("method_id").get<std::string>();
  c.family = j.at("family").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.failed = j.at("failed").get<bool>();
  c.error = j.at("error").get<std::string>();
  c.val_accuracy = j.at("val_accuracy").get<double>();
  c.val_delta_dp = j.at("val_delta_dp").get<double>();
  c.test_accuracy = j.at("test_accuracy").get<double>();
  c.test_delta_dp = j.at("test_delta_dp").get<double>();
  c.epochs_run = j.at("epochs_run").get<int>();
  c.best_epoch = j.at("best_epoch").get<int>();
  c.config = j.value("config", nlohmann::json::object());
}

inline TrainConfig method_config(const TrainConfig& base, const SuiteMethod& method, std::uint64_t seed) {
  nlohmann::json merged = nlohmann::json(base);
  for (auto it = method.overrides.begin(); it != method.overrides.end(); ++it) merged[it.key()] = it.value();
  TrainConfig cfg = merged.get<TrainConfig>();
  cfg.seed = seed;
  return cfg;
}

/// Run every (method x seed) cell. Cells sharing a seed and identical
/// injector inputs reuse one prepared graph; tasks are independent and may
/// run on several threads. Per-cell failures are recorded and the suite
/// continues.
inline std::vector<CellResult> run_suite(const SuiteConfig& suite, int jobs = 1, bool verbose = false) {
  struct Task {
    std::uint64_t seed;
    std::string prep_key;
    std::vector<std::size_t> method_indices;
  };

  auto prep_key_of = [&](const TrainConfig& cfg) {
    if (!cfg.injector_enabled()) return std::string("none");
    std::ostringstream key;
    key << cfg.inject_budget << '/' << cfg.inject_hops << '/' << cfg.inject_tau << '/' << cfg.inject_mode
        << '/' << cfg.layers << '/' << cfg.hidden_dim << '/' << cfg.learning_rate << '/' << cfg.batch_size
        << '/' << cfg.max_epochs << '/' << cfg.patience;
    return key.str();
  };

  std::vector<Task> tasks;
  for (std::uint64_t seed : suite.seeds) {
    std::map<std::string, std::size_t> by_key;
    for (std::size_t m = 0; m < suite.methods.size(); ++m) {
      const TrainConfig cfg = method_config(suite.base, suite.methods[m], seed);
      const std::string key = prep_key_of(cfg);
      auto it = by_key.find(key);
      if (it == by_key.end()) {
        by_key.emplace(key, tasks.size());
        tasks.push_back({seed, key, {m}});
      } else {
        tasks[it->second].method_indices.push_back(m);
      }
    }
  }

  std::vector<CellResult> results(suite.methods.size() * suite.seeds.size());
  auto slot = [&](std::size_t method_index, std::uint64_t seed) -> CellResult& {
    std::size_t seed_index = 0;
    while (suite.seeds[seed_index] != seed) ++seed_index;
    return results[seed_index * suite.methods.size() + method_index];
  };

  std::atomic<std::size_t> next_task{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next_task.fetch_add(1);
      if (t >= tasks.size()) return;
      const Task& task = tasks[t];
      SbmSpec spec = suite.sbm;
      spec.seed = task.seed;
      auto [graph, split] = generate(spec);
      std::optional<PreparedData> prepared;
      for (std::size_t m : task.method_indices) {
        const SuiteMethod& method = suite.methods[m];
        CellResult& cell = slot(m, task.seed);
        cell.method_id = method.id;
        cell.family = method.family;
        cell.seed = task.seed;
        try {
          const TrainConfig cfg = method_config(suite.base, method, task.seed);
          cell.config = nlohmann::json(cfg);
          if (!prepared.has_value()) prepared = prepare_data(graph, split, cfg);
          // non-injecting methods in an injecting task would be wrong; keys prevent that
          TrainResult trained = train(prepared->graph, split, cfg);
          cell.val_accuracy = trained.report.val_accuracy;
          cell.val_delta_dp = trained.report.val_delta_dp;
          cell.test_accuracy = trained.report.test_accuracy;
          cell.test_delta_dp = trained.report.test_delta_dp;
          cell.epochs_run = trained.report.epochs_run;
          cell.best_epoch = trained.report.best_epoch;
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        if (verbose) {
          std::lock_guard<std::mutex> lock(log_mutex);
          std::fprintf(stderr, "[suite] %s seed=%llu %s acc=%.3f dp=%.3f\n", method.id.c_str(),
                       static_cast<unsigned long long>(task.seed), cell.failed ? "FAILED" : "ok",
                       cell.test_accuracy, cell.test_delta_dp);
        }
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

// ---------------------------------------------------------------------------
// Aggregation and reporting

struct MethodAggregate {
  std::string method_id;
  std::string family;
  int runs = 0;
  double mean_val_accuracy = 0.0, std_val_accuracy = 0.0;
  double mean_val_delta_dp = 0.0, std_val_delta_dp = 0.0;
  double mean_test_accuracy = 0.0, std_test_accuracy = 0.0;
  double mean_test_delta_dp = 0.0, std_test_delta_dp = 0.0;
};

inline std::vector<MethodAggregate> aggregate_cells(const std::vector<CellResult>& cells) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CellResult*>> grouped;
  for (const auto& c : cells) {
    if (c.failed) continue;
    if (grouped.find(c.method_id) == grouped.end()) order.push_back(c.method_id);
    grouped[c.method_id].push_back(&c);
  }
  std::vector<MethodAggregate> out;
  for (const std::string& id : order) {
    const auto& runs = grouped[id];
    MethodAggregate agg;
    agg.method_id = id;
    agg.family = runs.front()->family;
    agg.runs = static_cast<int>(runs.size());
    auto mean_std = [&](auto getter, double& mean, double& stddev) {
      double s = 0.0;
      for (const CellResult* c : runs) s += getter(*c);
      mean = s / runs.size();
      double q = 0.0;
      for (const CellResult* c : runs) q += (getter(*c) - mean) * (getter(*c) - mean);
      stddev = runs.size() > 1 ? std::sqrt(q / (runs.size() - 1)) : 0.0;
    };
    mean_std([](const CellResult& c) { return c.val_accuracy; }, agg.mean_val_accuracy, agg.std_val_accuracy);
    mean_std([](const CellResult& c) { return c.val_delta_dp; }, agg.mean_val_delta_dp, agg.std_val_delta_dp);
    mean_std([](const CellResult& c) { return c.test_accuracy; }, agg.mean_test_accuracy, agg.std_test_accuracy);
    mean_std([](const CellResult& c) { return c.test_delta_dp; }, agg.mean_test_delta_dp, agg.std_test_delta_dp);
    out.push_back(agg);
  }
  return out;
}

inline void write_summary_csv(const std::vector<MethodAggregate>& aggs, const std::string& path) {
  std::ofstream out(path);
  detail::require(out.good(), "cannot write " + path);
  out << "method,family,runs,mean_val_acc,std_val_acc,mean_val_dp,std_val_dp,"
         "mean_test_acc,std_test_acc,mean_test_dp,std_test_dp\n";
  for (const auto& a : aggs) {
    out << a.method_id << ',' << a.family << ',' << a.runs << ',' << format_double(a.mean_val_accuracy)
        << ',' << format_double(a.std_val_accuracy) << ',' << format_double(a.mean_val_delta_dp) << ','
        << format_double(a.std_val_delta_dp) << ',' << format_double(a.mean_test_accuracy) << ','
        << format_double(a.std_test_accuracy) << ',' << format_double(a.mean_test_delta_dp) << ','
        << format_double(a.std_test_delta_dp) << '\n';
  }
}

/// The two-step rule applied per family over its settings.
inline std::map<std::string, RunSummary> select_per_family(const std::vector<MethodAggregate>& aggs) {
  std::map<std::string, std::vector<RunSummary>> pools;
  for (const auto& a : aggs)
    pools[a.family].push_back({a.method_id, a.mean_val_accuracy, a.mean_val_delta_dp});
  std::map<std::string, RunSummary> out;
  for (auto& [family, runs] : pools) out[family] = select_hyperparameters(runs);
  return out;
}

inline void write_selection_csv(const std::vector<MethodAggregate>& aggs, const std::string& path) {
  auto chosen = select_per_family(aggs);
  std::ofstream out(path);
  detail::require(out.good(), "cannot write " + path);
  out << "family,chosen_method,mean_val_acc,mean_val_dp,mean_test_acc,mean_test_dp\n";
  for (const auto& [family, pick] : chosen) {
    const MethodAggregate* agg = nullptr;
    for (const auto& a : aggs)
      if (a.method_id == pick.config_id) agg = &a;
    out << family << ',' << pick.config_id << ',' << format_double(pick.mean_val_accuracy) << ','
        << format_double(pick.mean_val_delta_dp) << ',' << format_double(agg->mean_test_accuracy) << ','
        << format_double(agg->mean_test_delta_dp) << '\n';
  }
}

inline void write_pareto_csv(const std::vector<MethodAggregate>& aggs, const std::string& path) {
  std::map<std::string, std::vector<const MethodAggregate*>> families;
  for (const auto& a : aggs) families[a.family].push_back(&a);
  std::ofstream out(path);
  detail::require(out.good(), "cannot write " + path);
  out << "family,method,mean_test_acc,mean_test_dp,on_frontier\n";
  for (const auto& [family, members] : families) {
    std::vector<std::pair<double, double>> points;
    for (const auto* a : members) points.emplace_back(a->mean_test_accuracy, a->mean_test_delta_dp);
    const std::vector<std::size_t> frontier = pareto_frontier(points);
    std::vector<bool> on(points.size(), false);
    for (std::size_t i : frontier) on[i] = true;
    for (std::size_t i = 0; i < members.size(); ++i)
      out << family << ',' << members[i]->method_id << ',' << format_double(points[i].first) << ','
          << format_double(points[i].second) << ',' << (on[i] ? 1 : 0) << '\n';
  }
}

inline void write_suite_outputs(const std::vector<CellResult>& cells, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "cells");
  for (const auto& c : cells) {
    const std::string name = c.method_id + "_s" + std::to_string(c.seed) + ".json";
    write_json_file(nlohmann::json(c), (fs::path(out_dir) / "cells" / name).string());
  }
  const auto aggs = aggregate_cells(cells);
  write_summary_csv(aggs, (fs::path(out_dir) / "summary.csv").string());
  write_selection_csv(aggs, (fs::path(out_dir) / "selection.csv").string());
  write_pareto_csv(aggs, (fs::path(out_dir) / "pareto.csv").string());
}

inline std::vector<CellResult> read_suite_cells(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(fs::path(dir) / "cells"))
    if (entry.path().extension() == ".json") paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<CellResult> cells;
  for (const auto& p : paths) cells.push_back(read_json_file(p).get<CellResult>());
  return cells;
}

// ---------------------------------------------------------------------------
// Bound verification trials

struct BoundTrial {
  int trial = 0;
  int nodes = 0;
  int steps = 0;
  double empirical = 0.0;
  double bound = 0.0;
  double slack = 0.0;
};

inline AttributedGraph random_small_graph(Rng& rng, int max_nodes = 12, int max_dim = 4) {
  const int n = 4 + rng.next_int(max_nodes - 3);
  const int d = 1 + rng.next_int(max_dim);
  std::vector<int> groups(n);
  for (;;) {
    int ones = 0;
    for (int v = 0; v < n; ++v) {
      groups[v] = rng.next_double() < 0.5 ? 1 : 0;
      ones += groups[v];
    }
    if (ones > 0 && ones < n) break;
  }
  const double p_edge = rng.uniform(0.2, 0.6);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.next_double() < p_edge) edges.emplace_back(i, j);
  DenseTensor features(n, d);
  for (std::size_t i = 0; i < features.size(); ++i) features[i] = rng.uniform(-2.0, 2.0);
  std::vector<std::string> ids(n);
  for (int v = 0; v < n; ++v) ids[v] = std::to_string(v);
  return AttributedGraph(std::move(ids), std::move(edges), std::move(features), std::move(groups),
                         std::vector<int>(n, -1), 2, "trial");
}

/// Random linear-GCN instances comparing the empirical disparity against its
/// closed-form bound.
inline std::vector<BoundTrial> verify_bound_trials(int trials, std::uint64_t seed) {
  detail::require(trials >= 1, "verify-bound: trials must be >= 1");
  std::vector<BoundTrial> out;
  Rng rng(derive_seed(seed, {0xb0b0ULL}));
  for (int t = 0; t < trials; ++t) {
    const AttributedGraph g = random_small_graph(rng);
    const int steps = 1 + rng.next_int(2);
    DenseTensor w(g.feature_dim(), 2);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.5, 1.5);
    BoundTrial trial;
    trial.trial = t;
    trial.nodes = g.node_count();
    trial.steps = steps;
    trial.empirical = empirical_dp(g, w, steps);
    trial.bound = dp_upper_bound(g, w, steps);
    trial.slack = trial.bound - trial.empirical;
    out.push_back(trial);
  }
  return out;
}

inline void write_bound_csv(const std::vector<BoundTrial>& trials, std::ostream& out) {
  out << "trial,nodes,steps,empirical_dp,upper_bound,slack\n";
  for (const auto& t : trials)
    out << t.trial << ',' << t.nodes << ',' << t.steps << ',' << format_double(t.empirical) << ','
        << format_double(t.bound) << ',' << format_double(t.slack) << '\n';
}

}  // namespace fairsample
