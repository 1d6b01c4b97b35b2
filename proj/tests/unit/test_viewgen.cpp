#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "sola/error.hpp"
#include "sola/viewgen.hpp"

using namespace sola;
using ad::Tensor;
using ad::Value;

namespace {

Graph make(int n, std::vector<std::pair<int, int>> pairs, Tensor x = {}) {
  if (x.empty()) x = Tensor(static_cast<std::size_t>(n), 1, 1.0);
  return Graph::from_pairs(n, std::move(x), pairs);
}

Tensor random_features(int n, int d, Rng& rng) {
  Tensor x(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform() * 2.0 - 1.0;
  return x;
}

Graph two_triangles(Tensor x = {}) {
  return make(6, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {3, 5}, {4, 5}}, std::move(x));
}

Partition split(const Graph& g, std::vector<int> a) { return Partition::from_assignment(g, a); }

void fill(const ad::ParameterStore& store, const std::string& name, double v) {
  Value p = store.get(name);
  for (std::size_t i = 0; i < p.size(); ++i) p.mutable_data()[i] = v;
}

struct Fixture {
  ad::ParameterStore store;
  ViewGenerator gen;

  explicit Fixture(int d = 1, std::uint64_t seed = 1, double neg_ratio = 1.0) {
    ViewGenConfig c;
    c.neg_ratio = neg_ratio;
    c.encoder.layers = 2;
    c.encoder.hidden = 6;
    c.encoder.input_dim = d;
    c.encoder.projection_dim = 4;
    Rng rng(seed);
    gen = ViewGenerator(store, "gen", c, rng);
  }
};

GenerateOptions forced(Strategy s, bool identity = false) {
  GenerateOptions o;
  o.force_strategy = s;
  o.identity_draws = identity;
  return o;
}

std::vector<Edge> candidates_with_base(const AugmentedView& v, const Graph& g, bool existing) {
  std::vector<Edge> out;
  for (const Edge& e : v.edges)
    if (g.has_edge(e.u, e.v) == existing) out.push_back(e);
  return out;
}

// Generic structural checks every view must satisfy.
void expect_well_formed(const AugmentedView& v, const Graph& g) {
  ASSERT_EQ(v.num_nodes, g.num_nodes());
  ASSERT_EQ(v.features.rows(), static_cast<std::size_t>(g.num_nodes()));
  ASSERT_EQ(v.edge_weight.rows(), v.edges.size());
  for (std::size_t e = 0; e < v.edges.size(); ++e) {
    EXPECT_LT(v.edges[e].u, v.edges[e].v);
    EXPECT_GE(v.edges[e].u, 0);
    EXPECT_LT(v.edges[e].v, g.num_nodes());
    if (e > 0) EXPECT_LT(v.edges[e - 1], v.edges[e]);
    const double w = v.edge_weight.data()[e];
    EXPECT_TRUE(w == 0.0 || w == 1.0);
    const double ws = v.edge_weight_soft.data()[e];
    EXPECT_GE(ws, 0.0);
    EXPECT_LE(ws, 1.0 + 1e-12);
    if (w == 1.0) {
      EXPECT_EQ(v.node_keep(v.edges[e].u, 0), 1.0);
      EXPECT_EQ(v.node_keep(v.edges[e].v, 0), 1.0);
    }
  }
  for (std::size_t r = 0; r < v.state.rows(); ++r) {
    int ones = 0;
    double soft = 0.0;
    for (std::size_t c = 0; c < kNumStrategies; ++c) {
      EXPECT_TRUE(v.state(r, c) == 0.0 || v.state(r, c) == 1.0);
      ones += v.state(r, c) == 1.0;
      soft += v.state_soft(r, c);
    }
    EXPECT_EQ(ones, 1);
    EXPECT_NEAR(soft, 1.0, 1e-12);
  }
  Value a = v.adjacency();
  for (int i = 0; i < g.num_nodes(); ++i) {
    EXPECT_EQ(a(i, i), 0.0);
    for (int j = 0; j < g.num_nodes(); ++j) EXPECT_EQ(a(i, j), a(j, i));
  }
}

}  // namespace

// --- selector --------------------------------------------------------------

TEST(Selector, SingleSubgraphNeverPicksPartnerStrategies) {
  Fixture f;
  Graph g = make(4, {{0, 1}, {1, 2}, {2, 3}});
  Partition p = split(g, {0, 0, 0, 0});
  fill(f.store, "gen.selector.weight", 0.0);
  fill(f.store, "gen.selector.bias", 0.0);
  Value bias = f.store.get("gen.selector.bias");
  bias.mutable_data()[static_cast<int>(Strategy::kInterEdge)] = 50.0;
  bias.mutable_data()[static_cast<int>(Strategy::kSubgraphSwap)] = 50.0;
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    AugmentedView v = f.gen.generate(g, p, rng);
    ASSERT_LT(static_cast<int>(v.sampled[0]), static_cast<int>(Strategy::kInterEdge));
    EXPECT_EQ(v.state_soft(0, 3), 0.0);
    EXPECT_EQ(v.state_soft(0, 4), 0.0);
  }
}

TEST(Selector, UniformLogitsGiveUniformFrequencies) {
  Fixture f;
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  fill(f.store, "gen.selector.weight", 0.0);
  fill(f.store, "gen.selector.bias", 0.0);
  Rng rng(11);
  std::array<int, kNumStrategies> count{};
  const int draws = 50000;
  for (int t = 0; t < draws; ++t) {
    AugmentedView v = f.gen.generate(g, p, rng);
    for (Strategy s : v.sampled) ++count[static_cast<int>(s)];
  }
  for (int c : count) EXPECT_NEAR(c / (2.0 * draws), 0.2, 0.01);
}

TEST(Selector, SoftProbabilitiesReachSelectorWeights) {
  Fixture f;
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  Rng rng(2);
  AugmentedView v = f.gen.generate(g, p, rng);
  ad::sum(ad::slice_cols(v.state_soft, 0, 1)).backward();
  double norm = 0.0;
  for (double x : f.gen.selector().weight().grad().values()) norm += std::abs(x);
  EXPECT_GT(norm, 0.0);
}

// --- node drop -------------------------------------------------------------

TEST(NodeDrop, DroppedNodeZeroesRowAndEdges) {
  Fixture f;
  Rng xr(5);
  Graph g = make(3, {{0, 1}, {1, 2}, {0, 2}}, random_features(3, 1, xr));
  Partition p = split(g, {0, 0, 0});
  bool found = false;
  for (std::uint64_t seed = 0; seed < 500 && !found; ++seed) {
    Rng rng(seed);
    AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kNodeDrop));
    if (!(v.node_keep(0, 0) == 1.0 && v.node_keep(1, 0) == 1.0 && v.node_keep(2, 0) == 0.0)) continue;
    found = true;
    EXPECT_EQ(v.surviving_edges(), (std::vector<Edge>{{0, 1}}));
    EXPECT_EQ(v.edge_weight.data()[0], 1.0);
    EXPECT_EQ(v.features(0, 0), g.features()(0, 0));
    EXPECT_EQ(v.features(1, 0), g.features()(1, 0));
    EXPECT_EQ(v.features(2, 0), 0.0);
  }
  EXPECT_TRUE(found);
}

TEST(NodeDrop, AdjacencyRowOfDroppedNodeIsZero) {
  Fixture f;
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kNodeDrop));
    if (v.node_keep(2, 0) != 0.0) continue;
    ++hits;
    Value a = v.adjacency();
    for (int j = 0; j < 6; ++j) {
      EXPECT_EQ(a(2, j), 0.0);
      EXPECT_EQ(a(j, 2), 0.0);
    }
  }
  EXPECT_GT(hits, 0);
}

TEST(NodeDrop, GuardKeepsOneNodePerSubgraph) {
  Fixture f;
  Value bias = f.store.get("gen.node_drop.bias");
  bias.mutable_data()[0] = 40.0;  // drop is overwhelmingly likely
  Graph single = make(1, {});
  Partition ps = split(single, {0});
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    AugmentedView v = f.gen.generate(single, ps, rng, forced(Strategy::kNodeDrop));
    EXPECT_EQ(v.node_keep(0, 0), 1.0);
    AugmentedView w = f.gen.generate(g, p, rng, forced(Strategy::kNodeDrop));
    for (int s = 0; s < 2; ++s) {
      double kept = 0.0;
      for (int u : p.members[s]) kept += w.node_keep(u, 0);
      EXPECT_EQ(kept, 1.0);
    }
  }
}

TEST(NodeDrop, FeatureSumReachesDropHead) {
  Fixture f;
  Rng xr(1);
  Graph g = make(4, {{0, 1}, {1, 2}, {2, 3}}, random_features(4, 1, xr));
  Partition p = split(g, {0, 0, 0, 0});
  Rng rng(4);
  AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kNodeDrop));
  ad::sum(v.features).backward();
  double norm = 0.0;
  for (double x : f.gen.drop_head().weight().grad().values()) norm += std::abs(x);
  EXPECT_GT(norm, 0.0);
}

TEST(NodeDrop, NeverIncreasesEdgeCount) {
  Fixture f;
  Rng rng(12);
  for (const Graph& g : sola::testing::small_graph_fixtures()) {
    Partition p = louvain(g, rng);
    AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kNodeDrop));
    EXPECT_LE(v.surviving_edges().size(), static_cast<std::size_t>(g.num_edges()));
    EXPECT_EQ(v.edges.size(), static_cast<std::size_t>(g.num_edges()));
  }
}

// --- feature mask ----------------------------------------------------------

TEST(FeatureMask, MaskedRowsZeroEdgesIntact) {
  Fixture f;
  Rng xr(8);
  Graph g = two_triangles(random_features(6, 1, xr));
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  Rng rng(1);
  int masked = 0;
  for (int t = 0; t < 100; ++t) {
    AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kFeatureMask));
    EXPECT_EQ(v.surviving_edges(), g.edges());
    for (int u = 0; u < 6; ++u) {
      const double x = v.features(u, 0);
      EXPECT_TRUE(x == 0.0 || x == g.features()(u, 0));
      masked += x == 0.0;
      EXPECT_EQ(v.node_keep(u, 0), 1.0);
    }
  }
  EXPECT_GT(masked, 0);
}

TEST(FeatureMask, AllKeepIsIdentityOnFeatures) {
  Fixture f(2);
  Rng xr(8);
  Graph g = two_triangles(random_features(6, 2, xr));
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  Rng rng(1);
  AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kFeatureMask, true));
  for (std::size_t i = 0; i < g.features().size(); ++i) EXPECT_EQ(v.features.data()[i], g.features()[i]);
}

// --- intra edges -----------------------------------------------------------

TEST(IntraEdge, CandidateSetSizes) {
  Fixture f;
  Rng rng(3);
  struct Case {
    Graph g;
    std::size_t expected;
  };
  std::vector<Case> cases = {
      {make(2, {{0, 1}}), 1},
      {make(3, {{0, 1}, {1, 2}, {0, 2}}), 3},
      {make(4, {{0, 1}, {1, 2}, {2, 3}}), 6},
      {make(1, {}), 0},
  };
  for (const auto& c : cases) {
    // Oracle: existing edges plus min(existing, available non-edges).
    const int n = c.g.num_nodes();
    std::size_t non_edges = static_cast<std::size_t>(n * (n - 1) / 2 - c.g.num_edges());
    std::size_t oracle = c.g.num_edges() + std::min<std::size_t>(c.g.num_edges(), non_edges);
    ASSERT_EQ(oracle, c.expected);
    Partition p = split(c.g, std::vector<int>(static_cast<std::size_t>(n), 0));
    for (int t = 0; t < 20; ++t) {
      AugmentedView v = f.gen.generate(c.g, p, rng, forced(Strategy::kIntraEdge));
      EXPECT_EQ(v.edges.size(), c.expected);
      EXPECT_EQ(candidates_with_base(v, c.g, true).size(), static_cast<std::size_t>(c.g.num_edges()));
    }
  }
}

TEST(IntraEdge, NegativeRatioScalesCandidates) {
  Fixture f(1, 1, 0.5);
  Graph g = make(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Partition p = split(g, std::vector<int>(6, 0));
  Rng rng(2);
  AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kIntraEdge));
  EXPECT_EQ(candidates_with_base(v, g, false).size(), 2u);
}

// --- inter edges -----------------------------------------------------------

TEST(InterEdge, HeadWidthIsFourTimesHidden) {
  Fixture f;
  EXPECT_EQ(f.gen.inter_head().in_features(), 4u * 6u);
  EXPECT_EQ(f.gen.intra_head().in_features(), 2u * 6u);
}

TEST(InterEdge, NoCrossEdgesGivesOneNegative) {
  Fixture f;
  Graph g = make(4, {{0, 1}, {2, 3}});
  Partition p = split(g, {0, 0, 1, 1});
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kInterEdge));
    ASSERT_EQ(v.inter_pairs.size(), 1u);
    auto neg = candidates_with_base(v, g, false);
    ASSERT_EQ(neg.size(), 1u);
    EXPECT_NE(p.assignment[neg[0].u], p.assignment[neg[0].v]);
    EXPECT_EQ(v.edges.size(), 3u);
  }
}

TEST(InterEdge, TwoTrianglesNegativeIsUniformOverCrossPairs) {
  Fixture f;
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  // Oracle: the 9 cross pairs minus the existing edge (2, 3).
  std::set<Edge> pool;
  for (int u = 0; u < 3; ++u)
    for (int v = 3; v < 6; ++v)
      if (!(u == 2 && v == 3)) pool.insert({u, v});
  ASSERT_EQ(pool.size(), 8u);
  std::map<Edge, int> hist;
  Rng rng(13);
  const int draws = 8000;
  for (int t = 0; t < draws; ++t) {
    AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kInterEdge));
    std::vector<Edge> cross;
    for (const Edge& e : v.edges)
      if (p.assignment[e.u] != p.assignment[e.v]) cross.push_back(e);
    ASSERT_EQ(cross.size(), 2u);
    ASSERT_TRUE(std::find(cross.begin(), cross.end(), Edge{2, 3}) != cross.end());
    for (const Edge& e : cross)
      if (!(e == Edge{2, 3})) {
        ASSERT_TRUE(pool.count(e));
        ++hist[e];
      }
  }
  for (const Edge& e : pool) EXPECT_NEAR(hist[e] / static_cast<double>(draws), 1.0 / 8.0, 0.02);
}

TEST(InterEdge, PartnerIsMostConnectedNeighbour) {
  Fixture f;
  // Subgraph 0 = {0,1}, 1 = {2,3}, 2 = {4,5}; 0 shares 2 edges with 2, 1 with 1.
  Graph g = make(6, {{0, 1}, {2, 3}, {4, 5}, {1, 2}, {0, 4}, {1, 5}});
  Partition p = split(g, {0, 0, 1, 1, 2, 2});
  Rng rng(1);
  AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kInterEdge));
  // 0 -> 2, 1 -> 0 (1 edge each with 0 and 2, tie to lowest id), 2 -> 0 (deduplicated).
  EXPECT_EQ(v.inter_pairs, (std::vector<std::pair<int, int>>{{0, 2}, {1, 0}}));
}

// --- swap ------------------------------------------------------------------

TEST(Swap, PathEndpointsExchange) {
  Fixture f;
  // Singletons A=0, C=1, B=2 with edges A-B and B-C. Forcing swap everywhere
  // pairs (0, 1); subgraph 2 has no partner and falls back to intra_edge.
  Graph g = make(3, {{0, 2}, {1, 2}});
  Partition p = split(g, {0, 1, 2});
  Rng rng(1);
  AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kSubgraphSwap));
  EXPECT_EQ(v.swap_pairs, (std::vector<std::pair<int, int>>{{0, 1}}));
  EXPECT_EQ(v.applied[2], Strategy::kIntraEdge);
  EXPECT_EQ(v.node_map, (std::vector<int>{1, 0, 2}));
  // (a, b) -> (c, b) and (b, c) -> (b, a): same set, same degree multiset.
  EXPECT_EQ(v.surviving_edges(), g.edges());
}

TEST(Swap, RewiresExternalAttachment) {
  Fixture f;
  // Star around 3 with extra leaf: 0-3, 3-4 as edges; swap subgraphs {0} and {1}.
  Graph g = make(5, {{0, 3}, {3, 4}, {1, 2}});
  Partition p = split(g, {0, 1, 2, 3, 3});
  auto corr = swap_correspondence(g, p.members[0], p.members[1]);
  ASSERT_EQ(corr.size(), 1u);
  EXPECT_EQ(corr[0], (std::pair<int, int>{0, 1}));
  Rng rng(1);
  AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kSubgraphSwap));
  // Pairs (0,1) and (2,3); edge (1,2) crosses units {0,1} and {2,3}.
  EXPECT_EQ(v.swap_pairs, (std::vector<std::pair<int, int>>{{0, 1}, {2, 3}}));
  EXPECT_EQ(v.surviving_edges().size(), 3u);
}

TEST(Swap, NoExternalEdgesLeavesGraphUnchanged) {
  Fixture f;
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  Rng rng(2);
  AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kSubgraphSwap));
  EXPECT_EQ(v.swap_pairs.size(), 1u);
  EXPECT_EQ(v.surviving_edges(), g.edges());
}

TEST(Swap, CorrespondenceByDegreeRank) {
  Graph g = make(7, {{0, 1}, {0, 2}, {0, 3}, {4, 5}, {5, 6}, {3, 4}});
  std::vector<int> a{0, 1, 2, 3}, b{4, 5, 6};
  auto c = swap_correspondence(g, a, b);
  // a by degree: 0(3), 3(2), 1(1), 2(1); b: 4(2), 5(2), 6(1).
  EXPECT_EQ(c, (std::vector<std::pair<int, int>>{{0, 4}, {3, 5}, {1, 6}}));
}

TEST(Swap, PreservesEdgeCountAndDegreeMultiset) {
  Fixture f;
  Rng rng(31);
  for (const Graph& g : sola::testing::small_graph_fixtures()) {
    Partition p = louvain(g, rng);
    if (p.k < 2) continue;
    AugmentedView v = f.gen.generate(g, p, rng, forced(Strategy::kSubgraphSwap, true));
    expect_well_formed(v, g);
    EXPECT_EQ(v.surviving_edges().size(), static_cast<std::size_t>(g.num_edges()));
  }
}

// --- assembly --------------------------------------------------------------

TEST(Assemble, IdentityDrawsReproduceInput) {
  Fixture f(2);
  Rng xr(4);
  Graph g = make(7, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {4, 6}},
                 random_features(7, 2, xr));
  Partition p = louvain(g, xr);
  ASSERT_GE(p.k, 2);
  for (Strategy s : {Strategy::kNodeDrop, Strategy::kFeatureMask, Strategy::kIntraEdge,
                     Strategy::kInterEdge}) {
    Rng rng(5);
    AugmentedView v = f.gen.generate(g, p, rng, forced(s, true));
    EXPECT_EQ(v.surviving_edges(), g.edges()) << to_string(s);
    for (std::size_t i = 0; i < g.features().size(); ++i) {
      EXPECT_EQ(v.features.data()[i], g.features()[i]);
    }
    Value a = v.adjacency();
    for (int u = 0; u < 7; ++u)
      for (int w = 0; w < 7; ++w) EXPECT_EQ(a(u, w), g.has_edge(u, w) ? 1.0 : 0.0);
  }
}

TEST(Assemble, IdentityViewEncodesLikeInput) {
  Fixture f(2);
  Rng xr(4);
  Graph g = two_triangles(random_features(6, 2, xr));
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  Rng rng(5);
  std::vector<AugmentedView> views{f.gen.generate(g, p, rng, forced(Strategy::kFeatureMask, true))};
  Value a = f.gen.encoder().forward(views_to_input(views)).graph;
  Value b = f.gen.encoder().forward(EncoderInput::from_graph(g)).graph;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
}

TEST(Assemble, WellFormedOnFixtures) {
  Fixture f;
  Rng rng(77);
  for (const Graph& g : sola::testing::small_graph_fixtures()) {
    Partition p = louvain(g, rng);
    for (int t = 0; t < 10; ++t) expect_well_formed(f.gen.generate(g, p, rng), g);
    for (int s = 0; s < kNumStrategies; ++s) {
      expect_well_formed(f.gen.generate(g, p, rng, forced(static_cast<Strategy>(s))), g);
    }
  }
}

TEST(Assemble, DeterministicUnderSeed) {
  Fixture f;
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r1(seed), r2(seed);
    AugmentedView a = f.gen.generate(g, p, r1), b = f.gen.generate(g, p, r2);
    EXPECT_EQ(a.edges, b.edges);
    EXPECT_EQ(a.edge_weight_values(), b.edge_weight_values());
    EXPECT_EQ(a.sampled, b.sampled);
    EXPECT_EQ(a.features.data().values(), b.features.data().values());
  }
}

TEST(Assemble, DifferentSeedsDifferInState) {
  Fixture f;
  fill(f.store, "gen.selector.weight", 0.0);
  fill(f.store, "gen.selector.bias", 0.0);
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  // Oracle: independent uniform categorical rows simulated directly.
  Rng sim(99);
  int sim_differ = 0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    bool differ = false;
    for (int r = 0; r < 2; ++r) differ |= sim.below(5) != sim.below(5);
    sim_differ += differ;
  }
  int differ = 0;
  for (int t = 0; t < trials; ++t) {
    Rng r1(2 * t + 1), r2(2 * t + 2);
    differ += f.gen.generate(g, p, r1).sampled != f.gen.generate(g, p, r2).sampled;
  }
  const double rate = differ / static_cast<double>(trials);
  EXPECT_GT(rate, 0.9);
  EXPECT_NEAR(rate, sim_differ / static_cast<double>(trials), 0.02);
}

TEST(Assemble, AdjacencySumReachesSelector) {
  // d sum(A) / d gate is the net edge change its strategy made, so the
  // selector gradient is nonzero exactly when the edge count moved.
  Fixture f;
  Rng xr(3);
  Graph g = two_triangles(random_features(6, 1, xr));
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  for (Strategy s : {Strategy::kNodeDrop, Strategy::kIntraEdge, Strategy::kInterEdge}) {
    int changed = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      f.store.zero_grad();
      Rng rng(seed);
      AugmentedView v = f.gen.generate(g, p, rng, forced(s));
      ad::sum(v.adjacency()).backward();
      double norm = 0.0;
      for (double x : f.gen.selector().weight().grad().values()) norm += std::abs(x);
      const bool differs = v.surviving_edges().size() != g.edges().size();
      changed += differs;
      if (differs) {
        EXPECT_GT(norm, 0.0) << to_string(s) << " seed " << seed;
      } else {
        EXPECT_EQ(norm, 0.0) << to_string(s) << " seed " << seed;
      }
    }
    EXPECT_GT(changed, 0) << to_string(s);
  }
}

TEST(Assemble, EveryEvaluatedHeadReceivesGradient) {
  Fixture f;
  Rng xr(3);
  Graph g = two_triangles(random_features(6, 1, xr));
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  const nn::Linear* heads[] = {&f.gen.drop_head(), &f.gen.mask_head(), &f.gen.intra_head(),
                               &f.gen.inter_head()};
  for (int s = 0; s < 4; ++s) {
    f.store.zero_grad();
    Rng rng(8);
    AugmentedView v = f.gen.generate(g, p, rng, forced(static_cast<Strategy>(s)));
    ASSERT_TRUE(v.head_used[s]);
    (ad::sum(v.adjacency()) + ad::sum(v.features)).backward();
    double norm = 0.0;
    for (double x : heads[s]->weight().grad().values()) norm += std::abs(x);
    EXPECT_GT(norm, 0.0) << to_string(static_cast<Strategy>(s));
  }
}

TEST(Assemble, SoftPathMatchesFiniteDifferences) {
  Fixture f;
  Rng xr(3);
  Graph g = make(7, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}},
                 random_features(7, 1, xr));
  Partition p = split(g, {0, 0, 0, 1, 1, 2, 2});
  for (int s = 0; s < 4; ++s) {
    // Re-seeding freezes the noise; a 1e-6 parameter step does not flip any
    // hard decision, so the soft outputs are smooth in the parameters.
    auto fn = [&] {
      Rng rng(21);
      AugmentedView v = f.gen.generate(g, p, rng, forced(static_cast<Strategy>(s)));
      return ad::sum(v.adjacency(true)) + ad::sum(v.node_keep_soft) + ad::sum(v.state_soft * v.state_soft);
    };
    auto r = sola::testing::param_gradcheck(f.store, fn);
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(static_cast<Strategy>(s));
  }
}

TEST(Assemble, BatchMatchesPerGraphEncoding) {
  Fixture f;
  Dataset ds;
  ds.feature_dim = 1;
  ds.graphs = {two_triangles(), make(4, {{0, 1}, {1, 2}, {2, 3}})};
  std::vector<Partition> parts{split(ds.graphs[0], {0, 0, 0, 1, 1, 1}),
                               split(ds.graphs[1], {0, 0, 1, 1})};
  std::vector<int> idx{0, 1};
  Batch b = make_batch(ds, idx);
  const Partition* pp[] = {&parts[0], &parts[1]};
  Rng rng(4);
  auto views = f.gen.generate(b, pp, rng, forced(Strategy::kFeatureMask, true));
  ASSERT_EQ(views.size(), 2u);
  EncoderInput in = views_to_input(views);
  EXPECT_EQ(in.num_nodes(), 10);
  EXPECT_EQ(in.src.size(), 2u * (7 + 3));
  const Partition* wrong[] = {&parts[1], &parts[0]};
  EXPECT_THROW(f.gen.generate(b, wrong, rng), ContractError);
}

// --- helpers ---------------------------------------------------------------

TEST(NonEdges, SamplesAreDistinctNonEdges) {
  Rng rng(1);
  Graph g = make(5, {{0, 1}, {1, 2}});
  std::vector<int> all{0, 1, 2, 3, 4};
  auto s = sample_non_edges_within(g, all, 100, rng);
  EXPECT_EQ(s.size(), 8u);
  std::set<Edge> uniq(s.begin(), s.end());
  EXPECT_EQ(uniq.size(), s.size());
  for (const Edge& e : s) EXPECT_FALSE(g.has_edge(e.u, e.v));

  // Large pools go through rejection sampling.
  const int n = 200;
  std::vector<std::pair<int, int>> ring;
  for (int u = 0; u < n; ++u) ring.emplace_back(u, (u + 1) % n);
  Graph big = make(n, ring);
  std::vector<int> nodes(n);
  std::iota(nodes.begin(), nodes.end(), 0);
  auto r = sample_non_edges_within(big, nodes, 150, rng);
  std::set<Edge> ur(r.begin(), r.end());
  EXPECT_EQ(ur.size(), 150u);
  for (const Edge& e : r) EXPECT_FALSE(big.has_edge(e.u, e.v));
  std::vector<int> lo(nodes.begin(), nodes.begin() + 100), hi(nodes.begin() + 100, nodes.end());
  auto x = sample_non_edges_between(big, lo, hi, 60, rng);
  EXPECT_EQ(std::set<Edge>(x.begin(), x.end()).size(), 60u);
  for (const Edge& e : x) {
    EXPECT_LT(e.u, 100);
    EXPECT_GE(e.v, 100);
    EXPECT_FALSE(big.has_edge(e.u, e.v));
  }
}

TEST(Importance, ProbabilitiesAndExport) {
  Fixture f;
  Graph g = two_triangles();
  Partition p = split(g, {0, 0, 0, 1, 1, 1});
  auto imp = f.gen.importance(g, p);
  ASSERT_EQ(imp.size(), 2u);
  for (const auto& s : imp) {
    double total = 0.0;
    for (double q : s.strategy_probs) total += q;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_GT(s.mean_keep, 0.0);
    EXPECT_LT(s.mean_keep, 1.0);
    EXPECT_EQ(s.size, 3);
  }
  Partition one = split(g, std::vector<int>(6, 0));
  auto single = f.gen.importance(g, one);
  EXPECT_EQ(single[0].strategy_probs[3], 0.0);
  EXPECT_EQ(single[0].strategy_probs[4], 0.0);
  auto j = importance_to_json(imp);
  EXPECT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["subgraph"], 1);
  EXPECT_TRUE(j[0]["strategy_probs"].contains("subgraph_swap"));
}

TEST(Strategy, NamesRoundTrip) {
  for (int s = 0; s < kNumStrategies; ++s) {
    EXPECT_EQ(parse_strategy(to_string(static_cast<Strategy>(s))), static_cast<Strategy>(s));
  }
  EXPECT_THROW(parse_strategy("drop"), ParameterError);
}
