#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sola/graph.hpp"
#include "sola/rng.hpp"

namespace sola {

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int feature_dim = 0;
  int num_classes = 0;

  std::size_t size() const noexcept { return graphs.size(); }
  double avg_nodes() const;
  double avg_edges() const;
  std::vector<int> labels() const;

  /// Shared feature width; labels in [0, num_classes). Throws ContractError.
  void validate() const;

  /// {"name", "num_graphs", "num_classes", "feature_dim", "avg_nodes", "avg_edges"}
  nlohmann::json manifest() const;

  Dataset subset(std::span<const int> indices) const;
};

/// How node features are built when a TUDataset directory has no
/// DS_node_attributes.txt.
enum class FeatureMode {
  kAuto,          // one-hot node labels if present, else a constant 1.0 column
  kConstant,      // always a constant 1.0 column
  kDegreeOneHot,  // one-hot node degree, width max degree + 1
};

FeatureMode parse_feature_mode(const std::string& s);
std::string to_string(FeatureMode m);

struct LoadOptions {
  FeatureMode features = FeatureMode::kAuto;
};

/// Reads the TUDataset text layout (DS_A.txt, DS_graph_indicator.txt and the
/// optional label/attribute files; 1-indexed, comma-separated). Graph labels
/// are remapped to [0, C) by sorted distinct value.
Dataset load_tudataset(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Writes `ds` in the TUDataset layout with features as DS_node_attributes.txt
/// (round-trip exact).
void save_tudataset(const Dataset& ds, const std::filesystem::path& dir);

enum class SyntheticKind { kMotifVsRandom, kCyclesVsPaths };

SyntheticKind parse_synthetic_kind(const std::string& s);
std::string to_string(SyntheticKind k);

/// Balanced two-class corpus. Class 1 graphs carry a planted motif (a
/// 5-clique, or a 6-cycle); class 0 graphs get a motif-free counterpart with
/// the same degree sequence (motif-vs-random) or a 6-path (cycles-vs-paths).
Dataset make_synthetic(SyntheticKind kind, int n_graphs, int n_nodes, std::uint64_t seed);

/// Block-diagonal view of M graphs.
struct Batch {
  std::vector<int> indices;             // dataset indices
  std::vector<const Graph*> graphs;
  std::vector<int> node_offsets;        // size M + 1
  int total_nodes() const { return node_offsets.empty() ? 0 : node_offsets.back(); }
  std::size_t size() const noexcept { return graphs.size(); }
};

Batch make_batch(const Dataset& ds, std::span<const int> indices);

/// One epoch of batches over a seeded permutation. A trailing batch with a
/// single graph is dropped. Throws ParameterError if batch_size < 2.
std::vector<Batch> epoch_batches(const Dataset& ds, int batch_size, Rng& rng);

}  // namespace sola
