#include <catch2/catch_amalgamated.hpp>

#include "fairsample/harness.hpp"
#include "fairsample/theory.hpp"
#include "test_support.hpp"

using namespace fairsample;

namespace {

// Exhaustive walk enumeration: every K-step path, stepping uniformly over
// closed neighborhoods, accumulated into the terminal node. Independent of
// the matrix-power implementation.
void walk_paths(const AttributedGraph& g, int from, int steps_left, double prob, int start,
                DenseTensor& out) {
  if (steps_left == 0) {
    out.at(start, from) += prob;
    return;
  }
  const double step = prob / (g.degree(from) + 1);
  walk_paths(g, from, steps_left - 1, step, start, out);
  for (int u : g.neighbors(from)) walk_paths(g, u, steps_left - 1, step, start, out);
}

DenseTensor enumerate_walk(const AttributedGraph& g, int steps) {
  DenseTensor out(g.node_count(), g.node_count());
  for (int v = 0; v < g.node_count(); ++v) walk_paths(g, v, steps, 1.0, v, out);
  return out;
}

AttributedGraph random_graph(Rng& rng, int n, int d, double p_edge) {
  std::vector<int> groups(n);
  for (;;) {
    int ones = 0;
    for (int v = 0; v < n; ++v) {
      groups[v] = rng.next_double() < 0.5;
      ones += groups[v];
    }
    if (ones > 0 && ones < n) break;
  }
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.next_double() < p_edge) edges.emplace_back(i, j);
  DenseTensor features(n, d);
  for (std::size_t i = 0; i < features.size(); ++i) features[i] = rng.uniform(-2.0, 2.0);
  std::vector<std::string> ids(n);
  for (int v = 0; v < n; ++v) ids[v] = std::to_string(v);
  return AttributedGraph(std::move(ids), std::move(edges), std::move(features), std::move(groups),
                         std::vector<int>(n, -1), 2);
}

}  // namespace

TEST_CASE("zero-step walk is the identity and cannot cross groups", "[theory]") {
  AttributedGraph g = testsupport::six_node_graph();
  const RandomWalkStats stats = random_walk_matrix(g, 0);
  CHECK(stats.walk == DenseTensor::identity(6));
  for (int a = 0; a < 2; ++a) CHECK(stats.beta_cross[a] == 0.0);
}

TEST_CASE("single edge between singleton groups splits mass evenly", "[theory]") {
  AttributedGraph g({"a", "b"}, {{0, 1}}, DenseTensor(2, 1, 0.0), {0, 1}, {-1, -1}, 2);
  const RandomWalkStats stats = random_walk_matrix(g, 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(stats.walk.at(i, j) == Catch::Approx(0.5));
  for (int a = 0; a < 2; ++a) {
    CHECK(stats.beta_same[a] == Catch::Approx(0.5));
    CHECK(stats.beta_cross[a] == Catch::Approx(0.5));
  }
}

TEST_CASE("walk matrix matches exhaustive path enumeration", "[theory]") {
  Rng rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    AttributedGraph g = random_graph(rng, 8, 2, rng.uniform(0.2, 0.5));
    for (int steps : {1, 2, 3}) {
      const DenseTensor walk = random_walk_matrix(g, steps).walk;
      const DenseTensor oracle = enumerate_walk(g, steps);
      for (std::size_t i = 0; i < walk.size(); ++i)
        CHECK(walk[i] == Catch::Approx(oracle[i]).margin(1e-12));
    }
  }
}

TEST_CASE("walk rows are stochastic and beta halves sum to one", "[theory]") {
  Rng rng(55);
  AttributedGraph g = random_graph(rng, 10, 3, 0.3);
  for (int steps : {0, 1, 2, 3}) {
    const RandomWalkStats stats = random_walk_matrix(g, steps);
    for (int v = 0; v < g.node_count(); ++v) {
      double row = 0.0;
      for (int u = 0; u < g.node_count(); ++u) {
        CHECK(stats.walk.at(v, u) >= 0.0);
        row += stats.walk.at(v, u);
      }
      CHECK(row == Catch::Approx(1.0).margin(1e-9));
    }
    // beta[a, !=a] computed directly from the matrix
    for (int a = 0; a < 2; ++a) {
      double cross_from_inside = 0.0;
      const auto& inside = g.group_members(a);
      for (int i : inside)
        for (int j = 0; j < g.node_count(); ++j)
          if (g.group_of(j) != a) cross_from_inside += stats.walk.at(i, j);
      cross_from_inside /= static_cast<double>(inside.size());
      CHECK(stats.beta_same[a] + cross_from_inside == Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("spectral norm against the closed 2x2 form", "[theory]") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + rng.next_int(4);
    DenseTensor w(d, 2);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-2.0, 2.0);
    const DenseTensor gram = matmul(transpose(w), w);
    const double p = gram.at(0, 0), q = gram.at(0, 1), r = gram.at(1, 1);
    const double lambda = 0.5 * ((p + r) + std::sqrt((p - r) * (p - r) + 4.0 * q * q));
    CHECK(spectral_norm(w) == Catch::Approx(std::sqrt(lambda)).margin(1e-8));
  }
}

TEST_CASE("bound scales linearly with the weight matrix", "[theory]") {
  Rng rng(31);
  AttributedGraph g = random_graph(rng, 9, 3, 0.4);
  DenseTensor w(3, 2);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
  const double base = dp_upper_bound(g, w, 2);
  const double scaled = dp_upper_bound(g, scale(w, 3.0), 2);
  CHECK(scaled == Catch::Approx(3.0 * base).epsilon(1e-9));
}

TEST_CASE("empirical disparity special cases", "[theory]") {
  Rng rng(42);
  SECTION("identical features everywhere") {
    AttributedGraph g({"a", "b", "c", "d"}, {{0, 1}, {2, 3}, {1, 2}},
                      DenseTensor(4, 2, 0.7), {0, 0, 1, 1}, std::vector<int>(4, -1), 2);
    DenseTensor w(2, 2);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
    CHECK(empirical_dp(g, w, 2) == Catch::Approx(0.0).margin(1e-12));
    CHECK(dp_upper_bound(g, w, 2) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("zero weights") {
    AttributedGraph g = random_graph(rng, 7, 2, 0.4);
    CHECK(empirical_dp(g, DenseTensor(2, 2, 0.0), 1) == 0.0);
    CHECK(dp_upper_bound(g, DenseTensor(2, 2, 0.0), 1) == 0.0);
  }
}

TEST_CASE("empirical disparity matches an independent recomputation", "[theory]") {
  Rng rng(88);
  AttributedGraph g = random_graph(rng, 10, 3, 0.35);
  DenseTensor w(3, 2);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.5, 1.5);
  const int steps = 2;

  // oracle: enumerate the walk, average logits per side, take norms
  const DenseTensor logits = matmul(matmul(enumerate_walk(g, steps), g.features()), w);
  double expected = 0.0;
  for (int a = 0; a < 2; ++a) {
    std::vector<double> mean_in(2, 0.0), mean_out(2, 0.0);
    int n_in = 0, n_out = 0;
    for (int v = 0; v < g.node_count(); ++v) {
      if (g.group_of(v) == a) {
        ++n_in;
        for (int c = 0; c < 2; ++c) mean_in[c] += logits.at(v, c);
      } else {
        ++n_out;
        for (int c = 0; c < 2; ++c) mean_out[c] += logits.at(v, c);
      }
    }
    double norm = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double gap = mean_in[c] / n_in - mean_out[c] / n_out;
      norm += gap * gap;
    }
    expected += std::sqrt(norm);
  }
  CHECK(empirical_dp(g, w, steps) == Catch::Approx(expected).margin(1e-10));
}

TEST_CASE("the bound holds on random instances", "[theory]") {
  const auto trials = verify_bound_trials(50, 20250810);
  for (const auto& t : trials) CHECK(t.empirical <= t.bound + 1e-8);
}

TEST_CASE("balancedness gaps", "[theory]") {
  // node 0: two neighbors per group -> gap 0; node 5: four neighbors, one group -> gap 4
  AttributedGraph g({"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"},
                    {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {5, 6}, {5, 7}, {5, 8}, {5, 9}},
                    DenseTensor(10, 1, 0.0),
                    {0, 0, 0, 1, 1, 1, 0, 0, 0, 0}, std::vector<int>(10, -1), 2);
  const BalancednessReport rep = balancedness(g);
  CHECK(rep.per_node_gap[0] == 0);
  CHECK(rep.per_node_gap[5] == 4);
  double mean = 0.0;
  for (int gap : rep.per_node_gap) mean += gap;
  CHECK(rep.mean_gap == Catch::Approx(mean / 10.0));
}
