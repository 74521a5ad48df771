#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "fairsample/edge_injector.hpp"
#include "fairsample/harness.hpp"
#include "fairsample/synth.hpp"
#include "test_support.hpp"

using namespace fairsample;

namespace {

// K = 0 predictor whose confidence is a direct function of the first
// feature: logits (c * x0, 0), so softmax confidence is controllable.
GcnParams direct_predictor(double scale, int feature_dim = 1) {
  GcnParams p;
  p.classifier = DenseTensor(feature_dim, 2, 0.0);
  p.classifier.at(0, 0) = scale;
  return p;
}

AttributedGraph homophilic_sbm(std::uint64_t seed, int n = 300) {
  SbmSpec spec;
  spec.n = n;
  spec.group_sizes = {n / 2, n - n / 2};
  spec.edge_prob = {{0.09, 0.01}, {0.01, 0.09}};
  spec.feature_dim = 6;
  spec.labeled_fraction = 0.5;
  spec.seed = seed;
  return generate(spec).first;
}

}  // namespace

TEST_CASE("confidence threshold keeps and discards as stated", "[injector]") {
  // two isolated nodes; features chosen so softmax confidences are 0.9 and 0.75
  const double x_conf90 = std::log(9.0);
  const double x_conf75 = std::log(3.0);
  AttributedGraph g({"keep", "drop"}, {}, DenseTensor::from_rows({{x_conf90}, {x_conf75}}),
                    {0, 1}, {-1, -1}, 2);
  const PseudoLabelSet out = pseudo_label(g, direct_predictor(1.0), 0.8, {});
  REQUIRE(out.entries[0].has_value());
  CHECK(out.entries[0]->label == 0);
  CHECK(out.entries[0]->confidence == Catch::Approx(0.9));
  CHECK_FALSE(out.entries[1].has_value());
}

TEST_CASE("pseudo labels never cover the known set", "[injector]") {
  AttributedGraph g({"a", "b"}, {}, DenseTensor::from_rows({{5.0}, {5.0}}), {0, 1}, {1, -1}, 2);
  const PseudoLabelSet out = pseudo_label(g, direct_predictor(1.0), 0.8, {0});
  CHECK_FALSE(out.entries[0].has_value());
  CHECK(out.entries[1].has_value());
}

TEST_CASE("kept count is non-increasing in the threshold", "[injector]") {
  SbmSpec spec;
  spec.n = 100;
  spec.group_sizes = {50, 50};
  spec.edge_prob = {{0.1, 0.02}, {0.02, 0.1}};
  spec.feature_dim = 4;
  spec.labeled_fraction = 0.6;
  spec.seed = 12;
  auto [g, split] = generate(spec);

  TrainConfig cfg;
  cfg.alpha = 0.0;
  cfg.sampler = "uniform";
  cfg.disable_injector = true;
  cfg.max_epochs = 25;
  cfg.patience = 25;
  cfg.hidden_dim = 8;
  cfg.seed = 7;
  const TrainResult predictor = train(g, split, cfg);

  int previous = g.node_count() + 1;
  for (double tau : {0.55, 0.65, 0.75, 0.85, 0.95}) {
    const int kept = pseudo_label(g, predictor.params, tau, split.train).kept();
    CHECK(kept <= previous);
    previous = kept;
  }
}

TEST_CASE("two-hop same-label cross-group node is a candidate", "[injector]") {
  // chain v1 - v2 - v5: v5 is two hops from v1, same class, different group
  AttributedGraph g({"v1", "v2", "v5"}, {{0, 1}, {1, 2}},
                    DenseTensor::from_rows({{0.0}, {0.0}, {0.0}}), {0, 0, 1}, {1, -1, 1}, 2);
  const std::vector<int> labels = {1, -1, 1};
  const auto cands = candidate_set(g, 0, labels, 2, HomophilyMode::Homophilic);
  CHECK(cands == std::vector<int>{2});
  CHECK_THROWS_WITH(candidate_set(g, 1, labels, 2, HomophilyMode::Homophilic),
                    Catch::Matchers::ContainsSubstring("unlabeled"));
}

TEST_CASE("all same-group neighborhood leaves no homophilic candidates", "[injector]") {
  AttributedGraph g({"a", "b", "c"}, {{0, 1}, {1, 2}}, DenseTensor(3, 1, 0.0),
                    {0, 0, 0}, {1, 1, 1}, 2);
  const std::vector<int> labels = {1, 1, 1};
  CHECK(candidate_set(g, 0, labels, 2, HomophilyMode::Homophilic).empty());
}

TEST_CASE("candidate set matches the brute-force predicate", "[injector]") {
  AttributedGraph g = homophilic_sbm(77, 120);
  std::vector<int> labels(g.node_count(), -1);
  Rng rng(5);
  for (int v = 0; v < g.node_count(); ++v)
    if (rng.next_double() < 0.7) labels[v] = rng.next_int(2);

  for (HomophilyMode mode : {HomophilyMode::Homophilic, HomophilyMode::Heterophilic}) {
    for (int v = 0; v < g.node_count(); ++v) {
      if (labels[v] == -1) continue;
      const auto got = candidate_set(g, v, labels, 2, mode);
      std::vector<int> expected;
      const auto ball = k_hop_neighbors(g, v, 2);
      const auto& nbrs = g.neighbors(v);
      for (int u : ball) {
        if (labels[u] == -1 || labels[u] != labels[v]) continue;
        const bool same = g.group_of(u) == g.group_of(v);
        if (mode == HomophilyMode::Homophilic ? same : !same) continue;
        if (std::binary_search(nbrs.begin(), nbrs.end(), u)) continue;
        expected.push_back(u);
      }
      CHECK(got == expected);
    }
  }
}

TEST_CASE("zero budget is a no-op", "[injector]") {
  AttributedGraph g = homophilic_sbm(3, 120);
  auto [out, report] = inject(g, 0, 2, 0.8, direct_predictor(1.0, 6), HomophilyMode::Homophilic,
                              g.labeled_nodes(), 42);
  CHECK(out.edges() == g.edges());
  CHECK(report.added.empty());
}

TEST_CASE("injected edges satisfy the candidate predicate", "[injector]") {
  AttributedGraph g = homophilic_sbm(21);
  const std::vector<int> known = g.labeled_nodes();
  const int budget = 4;
  auto [out, report] = inject(g, budget, 2, 0.8, direct_predictor(0.7, 6), HomophilyMode::Homophilic,
                              known, 1234);

  const PseudoLabelSet pseudo = pseudo_label(g, direct_predictor(0.7, 6), 0.8, known);
  const std::vector<int> labels = injector_labeling(g, known, pseudo);

  CHECK(!report.added.empty());
  CHECK(out.edge_count() == g.edge_count() + report.added.size());
  std::set<std::pair<int, int>> seen;
  for (const auto& [u, v] : g.edges()) seen.insert(std::minmax(u, v));
  for (const auto& e : report.added) {
    CHECK(labels[e.u] != -1);
    CHECK(labels[e.v] != -1);
    CHECK(labels[e.u] == labels[e.v]);
    CHECK(g.group_of(e.u) != g.group_of(e.v));  // homophilic mode adds cross-group edges
    CHECK(e.hop_distance >= 2);
    CHECK(e.hop_distance <= 2);
    CHECK(seen.insert(std::minmax(e.u, e.v)).second);  // no duplicates, not preexisting
  }
  for (int v = 0; v < g.node_count(); ++v) CHECK(report.initiated_count[v] <= budget);
}

TEST_CASE("injection is deterministic under a fixed seed", "[injector]") {
  AttributedGraph g = homophilic_sbm(8, 160);
  auto run = [&] {
    return inject(g, 3, 2, 0.8, direct_predictor(0.5, 6), HomophilyMode::Homophilic, g.labeled_nodes(), 99)
        .second;
  };
  const InjectionReport a = run();
  const InjectionReport b = run();
  REQUIRE(a.added.size() == b.added.size());
  for (std::size_t i = 0; i < a.added.size(); ++i) {
    CHECK(a.added[i].u == b.added[i].u);
    CHECK(a.added[i].v == b.added[i].v);
  }
}

TEST_CASE("mode direction on the intra-group ratio", "[injector]") {
  AttributedGraph g = homophilic_sbm(31);
  const double before = intra_group_edge_ratio(g);
  CHECK(before > 0.7);  // construction sanity

  auto [homo, r1] = inject(g, 10, 2, 0.8, direct_predictor(0.6, 6), HomophilyMode::Homophilic,
                           g.labeled_nodes(), 5);
  REQUIRE(!r1.added.empty());
  CHECK(intra_group_edge_ratio(homo) < before);

  auto [hetero, r2] = inject(g, 10, 2, 0.8, direct_predictor(0.6, 6), HomophilyMode::Heterophilic,
                             g.labeled_nodes(), 5);
  REQUIRE(!r2.added.empty());
  CHECK(intra_group_edge_ratio(hetero) > before);
}
