#include <algorithm>
#include <set>
#include <string>

#include "sola/dataset.hpp"
#include "sola/error.hpp"

namespace sola {
namespace {

using EdgeSet = std::set<std::pair<int, int>>;

std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Random recursive tree over a shuffled labeling of `nodes`.
void attach_tree(std::vector<int> placed, std::vector<int> rest, EdgeSet& edges, Rng& rng) {
  rng.shuffle(rest);
  for (int v : rest) {
    int parent = placed[rng.below(placed.size())];
    edges.insert(key(parent, v));
    placed.push_back(v);
  }
}

void add_random_edges(int n, int count, EdgeSet& edges, Rng& rng) {
  const long long capacity = static_cast<long long>(n) * (n - 1) / 2;
  int added = 0;
  while (added < count && static_cast<long long>(edges.size()) < capacity) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    if (edges.insert(key(a, b)).second) ++added;
  }
}

// Some k-clique (ascending ids), or empty.
std::vector<int> find_k_clique(int n, const EdgeSet& edges, int k) {
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (auto [a, b] : edges) adj[a][b] = adj[b][a] = true;
  std::vector<int> pick;
  // Depth-first extension of cliques with increasing vertex ids.
  auto extend = [&](auto&& self, int start) -> bool {
    if (static_cast<int>(pick.size()) == k) return true;
    for (int v = start; v < n; ++v) {
      bool ok = std::all_of(pick.begin(), pick.end(), [&](int u) { return adj[u][v]; });
      if (!ok) continue;
      pick.push_back(v);
      if (self(self, v + 1)) return true;
      pick.pop_back();
    }
    return false;
  };
  if (extend(extend, 0)) return pick;
  return {};
}

// Degree-preserving double-edge swaps until no k-clique remains. Small dense
// graphs may admit no clique-free rewiring; after a bounded number of rounds a
// clique edge is moved elsewhere instead, which keeps the edge count only.
void rewire_out_cliques(int n, EdgeSet& edges, int k, Rng& rng) {
  std::vector<std::pair<int, int>> list(edges.begin(), edges.end());
  const std::size_t m = list.size();
  int rounds = 0;
  do {
    for (std::size_t attempt = 0; attempt < 10 * m; ++attempt) {
      std::size_t i = rng.below(m), j = rng.below(m);
      if (i == j) continue;
      auto [a, b] = list[i];
      auto [c, d] = list[j];
      if (rng.below(2) == 1) std::swap(c, d);
      // (a,b),(c,d) -> (a,d),(c,b)
      if (a == d || c == b || a == c || b == d) continue;
      if (edges.count(key(a, d)) || edges.count(key(c, b))) continue;
      edges.erase(key(a, b));
      edges.erase(key(c, d));
      edges.insert(key(a, d));
      edges.insert(key(c, b));
      list[i] = key(a, d);
      list[j] = key(c, b);
    }
  } while (++rounds < 20 && !find_k_clique(n, edges, k).empty());

  for (std::vector<int> c = find_k_clique(n, edges, k); !c.empty(); c = find_k_clique(n, edges, k)) {
    edges.erase(key(c[0], c[1]));
    for (int attempt = 0; attempt < 1000; ++attempt) {
      int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      if (a == b || key(a, b) == key(c[0], c[1]) || !edges.insert(key(a, b)).second) continue;
      if (find_k_clique(n, edges, k).empty()) break;
      edges.erase(key(a, b));
    }
  }
}

Graph to_graph(int n, const EdgeSet& edges, int label) {
  std::vector<std::pair<int, int>> pairs(edges.begin(), edges.end());
  return Graph::from_pairs(n, ad::Tensor(static_cast<std::size_t>(n), 1, 1.0), pairs, label);
}

Graph motif_graph(int n, int label, Rng& rng) {
  constexpr int kClique = 5;
  std::vector<int> nodes = rng.permutation(n);
  EdgeSet edges;
  attach_tree({nodes[0]}, std::vector<int>(nodes.begin() + 1, nodes.end()), edges, rng);
  add_random_edges(n, n / 2, edges, rng);
  std::vector<int> clique = rng.permutation(n);
  clique.resize(kClique);
  for (int i = 0; i < kClique; ++i)
    for (int j = i + 1; j < kClique; ++j) edges.insert(key(clique[i], clique[j]));
  if (label == 0) rewire_out_cliques(n, edges, kClique, rng);
  return to_graph(n, edges, label);
}

Graph cycle_graph(int n, int label, Rng& rng) {
  constexpr int kMotif = 6;
  std::vector<int> nodes = rng.permutation(n);
  EdgeSet edges;
  for (int i = 0; i + 1 < kMotif; ++i) edges.insert(key(nodes[i], nodes[i + 1]));
  if (label == 1) edges.insert(key(nodes[0], nodes[kMotif - 1]));
  attach_tree(std::vector<int>(nodes.begin(), nodes.begin() + kMotif),
              std::vector<int>(nodes.begin() + kMotif, nodes.end()), edges, rng);
  return to_graph(n, edges, label);
}

}  // namespace

SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "motif-vs-random") return SyntheticKind::kMotifVsRandom;
  if (s == "cycles-vs-paths") return SyntheticKind::kCyclesVsPaths;
  throw ParameterError("unknown synthetic kind '" + s + "' (motif-vs-random, cycles-vs-paths)");
}

std::string to_string(SyntheticKind k) {
  return k == SyntheticKind::kMotifVsRandom ? "motif-vs-random" : "cycles-vs-paths";
}

Dataset make_synthetic(SyntheticKind kind, int n_graphs, int n_nodes, std::uint64_t seed) {
  if (n_graphs <= 0 || n_graphs % 2 != 0) {
    throw ParameterError("synthetic corpus needs a positive even graph count, got " +
                         std::to_string(n_graphs));
  }
  if (n_nodes < 6) {
    throw ParameterError("synthetic graphs need at least 6 nodes, got " + std::to_string(n_nodes));
  }
  Dataset ds;
  ds.name = to_string(kind);
  ds.feature_dim = 1;
  ds.num_classes = 2;
  Rng root(seed);
  for (int i = 0; i < n_graphs; ++i) {
    Rng rng = root.split({static_cast<std::uint64_t>(i)});
    const int label = i % 2;
    ds.graphs.push_back(kind == SyntheticKind::kMotifVsRandom ? motif_graph(n_nodes, label, rng)
                                                              : cycle_graph(n_nodes, label, rng));
  }
  return ds;
}

}  // namespace sola
