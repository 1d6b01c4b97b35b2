#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sola/dataset.hpp"
#include "sola/graph.hpp"
#include "sola/rng.hpp"

namespace sola {

/// Node -> subgraph assignment with per-subgraph node and edge bookkeeping.
/// Subgraph ids are dense in [0, k) and numbered by first appearance.
struct Partition {
  std::vector<int> assignment;
  int k = 0;
  std::vector<std::vector<int>> members;      // node ids per subgraph, ascending
  std::vector<std::vector<int>> intra_edges;  // edge indices per subgraph
  std::vector<int> inter_edges;               // edge indices crossing subgraphs

  /// Relabels `assignment` to first-appearance order and fills the edge lists.
  static Partition from_assignment(const Graph& g, std::span<const int> assignment);

  int subgraph_size(int s) const { return static_cast<int>(members[s].size()); }
};

struct LouvainOptions {
  double resolution = 1.0;
  /// A full node-move pass gaining less than this ends the level.
  double min_gain = 1e-7;
  /// Independent runs over different seeded visit orders; the run with the
  /// highest modularity wins (earliest on ties).
  int restarts = 8;
  /// When set (a permutation of the node ids) nodes are visited in this fixed
  /// order on every pass instead of a fresh seeded shuffle, and ties between
  /// equal-gain moves follow it. Used to check permutation equivariance.
  std::vector<int> visit_order;
};

/// Multi-level greedy modularity optimization (node moves + aggregation),
/// followed by splitting any community that induces several components.
Partition louvain(const Graph& g, Rng& rng, const LouvainOptions& options = {});

/// Every community inducing several connected components is split so each
/// component becomes its own subgraph.
Partition split_disconnected(const Graph& g, const Partition& p);

/// Q = sum_c (e_c / m - resolution * (d_c / 2m)^2); 0 when the graph has no edges.
double modularity(const Graph& g, std::span<const int> assignment, double resolution = 1.0);
inline double modularity(const Graph& g, const Partition& p, double resolution = 1.0) {
  return modularity(g, p.assignment, resolution);
}

/// Shortest-path edge betweenness (unordered pairs counted once), indexed like
/// g.edges(). Edges flagged in `removed` are treated as absent and score 0.
std::vector<double> edge_betweenness(const Graph& g, std::span<const std::uint8_t> removed = {});

enum class GnTarget {
  kMaxModularity,  // best-Q partition along the whole removal sequence
  kComponents,     // first partition with at least `k` components
  kFirstSplit,     // first partition with more components than the input
};

GnTarget parse_gn_target(const std::string& s);
std::string to_string(GnTarget t);

struct GirvanNewmanOptions {
  GnTarget target = GnTarget::kMaxModularity;
  int k = 2;
};

/// Repeatedly deletes the highest-betweenness edge (ties: lowest edge index).
Partition girvan_newman(const Graph& g, const GirvanNewmanOptions& options = {});

/// Index of the edge Girvan-Newman removes first, or -1 for an edgeless graph.
int girvan_newman_first_removal(const Graph& g);

enum class PartitionAlgo { kLouvain, kGirvanNewman };

PartitionAlgo parse_partition_algo(const std::string& s);
std::string to_string(PartitionAlgo a);

struct PartitionSpec {
  PartitionAlgo algo = PartitionAlgo::kLouvain;
  std::uint64_t seed = 0;
  LouvainOptions louvain;
  GirvanNewmanOptions gn;
};

/// Partitions every graph; graph i uses the RNG stream split({i}) of `seed`,
/// so results do not depend on `threads`.
std::vector<Partition> partition_dataset(const Dataset& ds, const PartitionSpec& spec,
                                         int threads = 1);

struct PartitionStats {
  double avg_nodes = 0.0;
  double avg_subgraphs = 0.0;
};

PartitionStats partition_stats(const Dataset& ds, std::span<const Partition> partitions);
PartitionStats partition_stats(const Dataset& ds, const PartitionSpec& spec);

/// {"format": "sola.partitions", "version": 1, "dataset", "num_graphs",
///  "structure" (fingerprint of node counts and edges), "algorithm", "seed",
///  Louvain or GN settings, "partitions": [{"graph": i, "k": k, "assignment": [...]}]}
nlohmann::json partitions_to_json(const Dataset& ds, const PartitionSpec& spec,
                                  std::span<const Partition> partitions);
/// Rebuilds partitions; throws CompatibilityError when the cache does not
/// match `ds` or `spec`.
std::vector<Partition> partitions_from_json(const Dataset& ds, const PartitionSpec& spec,
                                            const nlohmann::json& doc);

}  // namespace sola
