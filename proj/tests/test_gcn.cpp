#include <catch2/catch_amalgamated.hpp>

#include "fairsample/gcn.hpp"
#include "fairsample/synth.hpp"
#include "test_support.hpp"

using namespace fairsample;

namespace {

// Star: v1 adjacent to v2, v3, v4, so v2's only neighbor is v1.
AttributedGraph example_graph() {
  return AttributedGraph({"v1", "v2", "v3", "v4"}, {{0, 1}, {0, 2}, {0, 3}},
                         DenseTensor::from_rows({{0.6, 0.1}, {0.2, 0.8}, {0.9, 0.4}, {0.3, 0.7}}),
                         {0, 1, 0, 1}, {-1, -1, -1, -1}, 2);
}

// Independent whole-graph propagation oracle in explicit dense matrix form:
// H^l = relu( (D+I)^{-1} (A+I) H^{l-1} W_l ).
DenseTensor dense_oracle_embeddings(const AttributedGraph& g, const GcnParams& params) {
  const int n = g.node_count();
  DenseTensor norm_adj(n, n);
  for (int v = 0; v < n; ++v) {
    norm_adj.at(v, v) = 1.0;
    for (int u : g.neighbors(v)) norm_adj.at(v, u) = 1.0;
  }
  for (int v = 0; v < n; ++v) {
    const double inv = 1.0 / (g.degree(v) + 1);
    for (int u = 0; u < n; ++u) norm_adj.at(v, u) *= inv;
  }
  DenseTensor h = g.features();
  for (const auto& w : params.layers) h = relu(matmul(norm_adj, matmul(h, w)));
  return h;
}

GcnParams random_params(int feature_dim, int hidden, int depth, std::uint64_t seed) {
  Rng rng(seed);
  return GcnParams::make(feature_dim, std::vector<int>(depth, hidden), rng);
}

}  // namespace

TEST_CASE("level-1 embedding of a degree-1 neighbor averages self and parent", "[gcn]") {
  AttributedGraph g = example_graph();
  Rng rng(4);
  GcnParams params;
  params.layers = {DenseTensor::identity(2), DenseTensor::identity(2)};
  params.classifier = glorot_init(2, 2, rng);

  GradTape tape;
  GcnTapeParams ids = GcnTapeParams::registered(tape, params);
  ComputationGraph cg = build_full(g, 0, 2);
  TreeForward fwd = forward_tree(tape, g, cg, params, ids);

  // find the level-1 position holding v2 (graph node 1)
  bool found = false;
  for (std::size_t i = 0; i < fwd.level1_positions.size(); ++i) {
    if (cg.at(fwd.level1_positions[i]).node != 1) continue;
    found = true;
    const DenseTensor& h1 = tape.value(fwd.level1_h1[i]);
    // features positive, identity weights: relu is inactive
    CHECK(h1.at(0, 0) == Catch::Approx(0.5 * (0.6 + 0.2)).epsilon(1e-12));
    CHECK(h1.at(0, 1) == Catch::Approx(0.5 * (0.1 + 0.8)).epsilon(1e-12));
  }
  CHECK(found);
}

TEST_CASE("isolated node aggregates only itself", "[gcn]") {
  AttributedGraph g = testsupport::six_node_graph();
  GcnParams params = random_params(3, 4, 1, 8);
  const DenseTensor h = full_forward_embeddings(g, params);
  const DenseTensor expected = relu(matmul(DenseTensor::row_vector(g.feature_row(5)), params.layers[0]));
  for (int c = 0; c < h.cols(); ++c) CHECK(h.at(5, c) == Catch::Approx(expected.at(0, c)).margin(1e-12));
}

TEST_CASE("full-tree forward equals the dense matrix oracle", "[gcn]") {
  AttributedGraph g = testsupport::six_node_graph();
  GcnParams params = random_params(3, 5, 2, 15);
  const DenseTensor oracle = dense_oracle_embeddings(g, params);
  const DenseTensor fast = full_forward_embeddings(g, params);

  for (int v = 0; v < g.node_count(); ++v) {
    GradTape tape;
    GcnTapeParams ids = GcnTapeParams::registered(tape, params);
    TreeForward fwd = forward_tree(tape, g, build_full(g, v, 2), params, ids);
    const DenseTensor logits = tape.value(fwd.logits);
    const DenseTensor expected = matmul(oracle, params.classifier);
    for (int c = 0; c < 2; ++c) {
      CHECK(logits.at(0, c) == Catch::Approx(expected.at(v, c)).margin(1e-10));
      CHECK(fast.at(v, c == 0 ? 0 : 1) == Catch::Approx(oracle.at(v, c == 0 ? 0 : 1)).margin(1e-10));
    }
  }
}

TEST_CASE("all-equal features collapse the forward pass", "[gcn]") {
  const int n = 8;
  std::vector<std::pair<int, int>> edges = {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {4, 5}, {5, 6}, {2, 7}};
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  AttributedGraph g(std::move(ids), edges, DenseTensor(n, 3, 0.4), std::vector<int>(n, 0),
                    std::vector<int>(n, -1), 2);
  GcnParams params = random_params(3, 4, 2, 22);
  const DenseTensor probs = full_forward_probabilities(g, params);
  for (int v = 1; v < n; ++v)
    for (int c = 0; c < 2; ++c) CHECK(probs.at(v, c) == Catch::Approx(probs.at(0, c)).margin(1e-12));
}

TEST_CASE("softmax rows are normalized probabilities", "[gcn]") {
  AttributedGraph g = testsupport::six_node_graph();
  GcnParams params = random_params(3, 4, 2, 31);
  const DenseTensor probs = full_forward_probabilities(g, params);
  for (int v = 0; v < g.node_count(); ++v) {
    double sum = 0.0;
    for (int c = 0; c < probs.cols(); ++c) {
      CHECK(probs.at(v, c) >= 0.0);
      CHECK(probs.at(v, c) <= 1.0);
      sum += probs.at(v, c);
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("linear model logits", "[gcn]") {
  AttributedGraph g = testsupport::six_node_graph();
  Rng rng(77);
  DenseTensor w = glorot_init(3, 2, rng);

  SECTION("zero steps is a feature-space model") {
    const DenseTensor logits = sgcn_forward(g, w, 0);
    const DenseTensor expected = matmul(g.features(), w);
    for (std::size_t i = 0; i < logits.size(); ++i) CHECK(logits[i] == Catch::Approx(expected[i]).margin(1e-12));
  }

  SECTION("single edge averages the two endpoints") {
    AttributedGraph pair({"a", "b"}, {{0, 1}}, DenseTensor::from_rows({{2.0}, {4.0}}),
                         {0, 1}, {-1, -1}, 2);
    const DenseTensor logits = sgcn_forward(pair, DenseTensor::identity(1), 1);
    CHECK(logits.at(0, 0) == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(logits.at(1, 0) == Catch::Approx(3.0).epsilon(1e-12));
  }

  SECTION("two steps equal the squared walk matrix") {
    const DenseTensor walk1 = random_walk_matrix(g, 1).walk;
    const DenseTensor expected = matmul(matmul(matmul(walk1, walk1), g.features()), w);
    const DenseTensor logits = sgcn_forward(g, w, 2);
    for (std::size_t i = 0; i < logits.size(); ++i) CHECK(logits[i] == Catch::Approx(expected[i]).margin(1e-12));
  }
}

TEST_CASE("predict takes the argmax with ties to zero", "[gcn]") {
  CHECK(predict(DenseTensor::from_rows({{0.2, 0.8}})) == std::vector<int>{1});
  CHECK(predict(DenseTensor::from_rows({{0.5, 0.5}})) == std::vector<int>{0});
  CHECK_THROWS_WITH(predict(DenseTensor::from_rows({{0.7, 0.6}})),
                    Catch::Matchers::ContainsSubstring("not normalized"));

  Rng rng(9);
  DenseTensor batch(100, 2);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.next_double();
    batch.at(i, 0) = p;
    batch.at(i, 1) = 1.0 - p;
  }
  const std::vector<int> got = predict(batch);
  for (int i = 0; i < 100; ++i) {
    const int expected = batch.at(i, 1) > batch.at(i, 0) ? 1 : 0;
    CHECK(got[i] == expected);
  }
}
