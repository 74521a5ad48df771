// Command-line front end: synthetic data, edge injection, training,
// evaluation, bound verification, and experiment suites.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairsample/checkpoint.hpp"
#include "fairsample/edge_injector.hpp"
#include "fairsample/graph_io.hpp"
#include "fairsample/harness.hpp"
#include "fairsample/metrics.hpp"
#include "fairsample/synth.hpp"
#include "fairsample/theory.hpp"
#include "fairsample/trainer.hpp"

namespace fs = std::filesystem;
using namespace fairsample;

namespace {

std::optional<std::uint64_t> env_seed_override() {
  const char* raw = std::getenv("FAIRSAMPLE_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  return static_cast<std::uint64_t>(std::stoull(raw));
}

AttributedGraph load_graph_prefix(const std::string& prefix) {
  return load_graph(GraphFiles::from_prefix(prefix));
}

TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json j = path.empty() ? nlohmann::json(TrainConfig{}) : read_json_file(path);
  j = apply_overrides(j, overrides);
  TrainConfig cfg = j.get<TrainConfig>();
  if (auto seed = env_seed_override()) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

int cmd_synth(const std::string& spec_path, const std::string& out_prefix, bool print_spec) {
  SbmSpec spec;
  if (!spec_path.empty()) spec = read_json_file(spec_path).get<SbmSpec>();
  if (auto seed = env_seed_override()) spec.seed = *seed;
  if (print_spec) {
    std::cout << nlohmann::json(spec).dump(2) << '\n';
    return 0;
  }
  auto [graph, split] = generate(spec);
  if (!fs::path(out_prefix).parent_path().empty())
    fs::create_directories(fs::path(out_prefix).parent_path());
  save_graph(graph, GraphFiles::from_prefix(out_prefix));
  save_split(split, out_prefix + ".split.json");
  std::cerr << "wrote " << out_prefix << ".{edges.tsv,features.csv,meta.json,split.json}; "
            << graph.node_count() << " nodes, " << graph.edge_count() << " edges, intra ratio "
            << intra_group_edge_ratio(graph) << "\n";
  return 0;
}

int cmd_inject(const std::string& graph_prefix, const std::string& split_path,
               const std::string& out_prefix, const std::string& report_path, int budget, int hops,
               double tau, const std::string& mode, std::uint64_t seed,
               const std::string& predictor_path, const std::string& config_path,
               const std::vector<std::string>& overrides) {
  AttributedGraph graph = load_graph_prefix(graph_prefix);
  DataSplit split = load_split(split_path);
  split.validate(graph);
  std::uint64_t effective_seed = seed;
  if (auto env = env_seed_override()) effective_seed = *env;

  GcnParams predictor;
  if (!predictor_path.empty()) {
    predictor = load_checkpoint(predictor_path).first;
  } else {
    TrainConfig cfg = load_config(config_path, overrides);
    cfg.seed = effective_seed;
    std::cerr << "training pseudo-label predictor...\n";
    predictor = train(graph, split, predictor_config(cfg)).params;
  }

  const HomophilyMode resolved = resolve_inject_mode(graph, mode);
  auto [enriched, report] =
      inject(graph, budget, hops, tau, predictor, resolved, split.train, effective_seed);
  if (!fs::path(out_prefix).parent_path().empty())
    fs::create_directories(fs::path(out_prefix).parent_path());
  save_graph(enriched, GraphFiles::from_prefix(out_prefix));
  save_split(split, out_prefix + ".split.json");
  if (!report_path.empty()) write_json_file(nlohmann::json(report), report_path);
  std::cerr << "mode " << to_string(resolved) << ": added " << report.added.size()
            << " edges (pseudo labels kept: " << report.pseudo_labels_kept << "); intra ratio "
            << intra_group_edge_ratio(graph) << " -> " << intra_group_edge_ratio(enriched) << "\n";
  return 0;
}

int cmd_train(const std::string& graph_prefix, const std::string& split_path,
              const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir) {
  AttributedGraph graph = load_graph_prefix(graph_prefix);
  DataSplit split = load_split(split_path);
  const TrainConfig cfg = load_config(config_path, overrides);

  PipelineResult result = run_pipeline(graph, split, cfg);
  fs::create_directories(out_dir);
  nlohmann::json report(result.trained.report);
  report["config"] = cfg;
  write_json_file(report, (fs::path(out_dir) / "report.json").string());
  write_epoch_trace_csv(result.trained.report, (fs::path(out_dir) / "trace.csv").string());
  save_checkpoint(result.trained.params, result.trained.policy,
                  (fs::path(out_dir) / "checkpoint.json").string());
  if (result.injection.has_value()) {
    write_json_file(nlohmann::json(*result.injection), (fs::path(out_dir) / "injection.json").string());
    // the checkpoint aggregates over this graph; evaluate against it
    save_graph(*result.enriched_graph, GraphFiles::from_prefix((fs::path(out_dir) / "enriched").string()));
  }
  std::cerr << "epochs " << result.trained.report.epochs_run << " (best "
            << result.trained.report.best_epoch << "); val acc " << result.trained.report.val_accuracy
            << " dp " << result.trained.report.val_delta_dp << "; test acc "
            << result.trained.report.test_accuracy << " dp " << result.trained.report.test_delta_dp
            << "\n";
  return 0;
}

int cmd_eval(const std::string& graph_prefix, const std::string& split_path,
             const std::string& checkpoint_path, const std::string& which, int sampled_fanout,
             std::uint64_t sampled_seed) {
  AttributedGraph graph = load_graph_prefix(graph_prefix);
  DataSplit split = load_split(split_path);
  split.validate(graph);
  auto [params, policy] = load_checkpoint(checkpoint_path);
  (void)policy;  // evaluation is sampler-free

  std::vector<int> nodes;
  if (which == "train") {
    nodes = split.train;
  } else if (which == "validation") {
    nodes = split.validation;
  } else if (which == "test") {
    nodes = split.test;
  } else if (which == "all") {
    for (int v = 0; v < graph.node_count(); ++v)
      if (graph.has_label(v)) nodes.push_back(v);
  } else {
    throw std::runtime_error("--set must be train, validation, test, or all");
  }
  const EvalMode mode = sampled_fanout > 0 ? EvalMode::sample(sampled_fanout, sampled_seed)
                                           : EvalMode::full();
  const EvalResult result = evaluate(graph, params, nodes, mode);
  std::cout << nlohmann::json(result).dump(2) << '\n';
  return 0;
}

int cmd_verify_bound(int trials, std::uint64_t seed, const std::string& out_path) {
  if (auto env = env_seed_override()) seed = *env;
  const auto results = verify_bound_trials(trials, seed);
  int violations = 0;
  for (const auto& t : results) violations += t.empirical > t.bound + 1e-8;
  if (out_path.empty()) {
    write_bound_csv(results, std::cout);
  } else {
    std::ofstream out(out_path);
    detail::require(out.good(), "cannot write " + out_path);
    write_bound_csv(results, out);
  }
  std::cerr << trials << " trials, " << violations << " violations\n";
  return violations == 0 ? 0 : 1;
}

int cmd_suite(const std::string& grid_path, const std::string& out_dir, int jobs, bool verbose) {
  SuiteConfig suite = read_json_file(grid_path).get<SuiteConfig>();
  if (auto seed = env_seed_override()) suite.seeds = {*seed};
  const std::vector<CellResult> cells = run_suite(suite, jobs, verbose);
  fs::create_directories(out_dir);
  write_suite_outputs(cells, out_dir);
  int failures = 0;
  for (const auto& c : cells) failures += c.failed;
  std::cerr << cells.size() << " cells (" << failures << " failed); outputs in " << out_dir << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_report(const std::string& in_dir, const std::string& out_path) {
  const std::vector<CellResult> cells = read_suite_cells(in_dir);
  detail::require(!cells.empty(), "no cell results under " + in_dir);
  const auto aggs = aggregate_cells(cells);
  write_summary_csv(aggs, out_path);
  std::cerr << "aggregated " << cells.size() << " cells into " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairness-aware GCN training engine and benchmark harness"};
  app.require_subcommand(1);
  // --h is a real option below, so help stays on --help only
  app.set_help_flag("--help", "print help");

  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark graph");
  synth->set_help_flag("--help", "print help");
  std::string synth_spec, synth_out = "data/sbm";
  bool synth_print = false;
  synth->add_option("--spec", synth_spec, "SBM spec JSON (defaults when omitted)");
  synth->add_option("--out-prefix", synth_out, "output file prefix");
  synth->add_flag("--print-spec", synth_print, "print the effective spec and exit");

  auto* injectc = app.add_subcommand("inject-edges", "phase-1 edge injection");
  injectc->set_help_flag("--help", "print help");
  std::string inj_graph, inj_split, inj_out, inj_report, inj_mode = "auto", inj_predictor, inj_config;
  std::vector<std::string> inj_overrides;
  int inj_m = 10, inj_h = 2;
  double inj_tau = 0.8;
  std::uint64_t inj_seed = 1;
  injectc->add_option("--graph", inj_graph, "input graph prefix")->required();
  injectc->add_option("--split", inj_split, "split JSON path")->required();
  injectc->add_option("--out-prefix", inj_out, "output graph prefix")->required();
  injectc->add_option("--report", inj_report, "write the injection report JSON here");
  injectc->add_option("--m", inj_m, "edges initiated per node");
  injectc->add_option("--h", inj_h, "hop limit for candidates");
  injectc->add_option("--tau", inj_tau, "pseudo-label confidence threshold");
  injectc->add_option("--mode", inj_mode, "auto | homophilic | heterophilic");
  injectc->add_option("--seed", inj_seed, "injection seed");
  injectc->add_option("--predictor", inj_predictor, "checkpoint of a trained predictor (else trained now)");
  injectc->add_option("--config", inj_config, "train config JSON for the internal predictor");
  injectc->add_option("--override", inj_overrides, "config overrides key=value");

  auto* trainc = app.add_subcommand("train", "two-phase training pipeline");
  trainc->set_help_flag("--help", "print help");
  std::string tr_graph, tr_split, tr_config, tr_out = "runs/latest";
  std::vector<std::string> tr_overrides;
  trainc->add_option("--graph", tr_graph, "graph prefix")->required();
  trainc->add_option("--split", tr_split, "split JSON path")->required();
  trainc->add_option("--config", tr_config, "train config JSON (defaults when omitted)");
  trainc->add_option("--override", tr_overrides, "config overrides key=value");
  trainc->add_option("--out-dir", tr_out, "run output directory");

  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
  evalc->set_help_flag("--help", "print help");
  std::string ev_graph, ev_split, ev_ckpt, ev_set = "test";
  int ev_fanout = 0;
  std::uint64_t ev_seed = 1;
  evalc->add_option("--graph", ev_graph, "graph prefix")->required();
  evalc->add_option("--split", ev_split, "split JSON path")->required();
  evalc->add_option("--checkpoint", ev_ckpt, "checkpoint JSON path")->required();
  evalc->add_option("--set", ev_set, "train | validation | test | all");
  evalc->add_option("--sampled-fanout", ev_fanout, "evaluate on sampled trees with this fanout (0 = full)");
  evalc->add_option("--sampled-seed", ev_seed, "seed for sampled evaluation");

  auto* verify = app.add_subcommand("verify-bound", "disparity bound trials on random instances");
  verify->set_help_flag("--help", "print help");
  int vb_trials = 200;
  std::uint64_t vb_seed = 1;
  std::string vb_out;
  verify->add_option("--trials", vb_trials, "number of random instances");
  verify->add_option("--seed", vb_seed, "trial stream seed");
  verify->add_option("--out", vb_out, "CSV output path (stdout when omitted)");

  auto* suitec = app.add_subcommand("suite", "run a method/hyperparameter grid");
  suitec->set_help_flag("--help", "print help");
  std::string su_grid, su_out = "suite_out";
  int su_jobs = 1;
  bool su_verbose = false;
  suitec->add_option("--grid", su_grid, "suite grid JSON")->required();
  suitec->add_option("--out", su_out, "output directory");
  suitec->add_option("--jobs", su_jobs, "parallel preparation/training tasks");
  suitec->add_flag("--verbose", su_verbose, "log each cell");

  auto* reportc = app.add_subcommand("report", "re-aggregate suite cells into a table");
  reportc->set_help_flag("--help", "print help");
  std::string rp_in, rp_out = "table.csv";
  reportc->add_option("--in", rp_in, "suite output directory")->required();
  reportc->add_option("--out", rp_out, "summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out, synth_print);
    if (injectc->parsed())
      return cmd_inject(inj_graph, inj_split, inj_out, inj_report, inj_m, inj_h, inj_tau, inj_mode,
                        inj_seed, inj_predictor, inj_config, inj_overrides);
    if (trainc->parsed()) return cmd_train(tr_graph, tr_split, tr_config, tr_overrides, tr_out);
    if (evalc->parsed()) return cmd_eval(ev_graph, ev_split, ev_ckpt, ev_set, ev_fanout, ev_seed);
    if (verify->parsed()) return cmd_verify_bound(vb_trials, vb_seed, vb_out);
    if (suitec->parsed()) return cmd_suite(su_grid, su_out, su_jobs, su_verbose);
    if (reportc->parsed()) return cmd_report(rp_in, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
