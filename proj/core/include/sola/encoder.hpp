#pragma once

#include <span>
#include <string>
#include <vector>

#include "sola/autodiff/ops.hpp"
#include "sola/autodiff/parameter.hpp"
#include "sola/dataset.hpp"
#include "sola/nn.hpp"
#include "sola/rng.hpp"

namespace sola {

enum class Readout { kSum, kMean };

Readout parse_readout(const std::string& s);
std::string to_string(Readout r);

struct GinConfig {
  int layers = 3;
  int hidden = 32;
  int input_dim = 1;
  int projection_dim = 32;
  Readout graph_readout = Readout::kSum;
  Readout subgraph_readout = Readout::kMean;
  /// Per-graph, per-column standardization after every layer.
  bool standardize = false;

  void validate() const;
};

/// Message-passing input for a block-diagonal batch. Undirected edges appear
/// twice in src/dst. Optional weights default to 1.
struct EncoderInput {
  ad::Value features;               // N × d
  std::vector<int> src, dst;        // directed messages src -> dst
  ad::Value edge_weight;            // (#messages) × 1, or undefined
  ad::Value node_weight;            // N × 1 readout weights, or undefined
  std::vector<int> graph_of_node;   // size N, ids in [0, num_graphs)
  int num_graphs = 0;
  std::vector<int> subgraph_of_node;  // size N or empty
  int num_subgraphs = 0;

  int num_nodes() const { return static_cast<int>(graph_of_node.size()); }

  /// Unweighted input for the batch graphs as stored.
  static EncoderInput from_batch(const Batch& batch);
  static EncoderInput from_graph(const Graph& g);
};

struct Embeddings {
  ad::Value node;       // N × H
  ad::Value subgraph;   // num_subgraphs × H (undefined without subgraph ids)
  ad::Value graph;      // M × H
  ad::Value projected;  // M × projection_dim
};

/// Row-set readout: row i of the result summarizes x over sets[i]. Optional
/// per-row weights (N × 1) scale each contribution; mean divides by the
/// weight total. An empty set is a ContractError.
ad::Value readout(const ad::Value& x, std::span<const std::vector<int>> sets, Readout mode,
                  const ad::Value* weights = nullptr);

/// Same, with each row belonging to exactly one of `groups` sets.
ad::Value readout_groups(const ad::Value& x, std::span<const int> group_of_row, int groups,
                         Readout mode, const ad::Value* weights = nullptr);

/// GIN: h' = MLP((1 + eps) h + sum_{u -> v} w_uv h_u), MLP = linear, ReLU,
/// linear; eps is a learnable scalar per layer initialised to 0.
class GinEncoder {
 public:
  GinEncoder() = default;
  GinEncoder(ad::ParameterStore& store, const std::string& prefix, const GinConfig& config,
             Rng& rng);

  Embeddings forward(const EncoderInput& in) const;
  /// Node embeddings only (no readout or projection).
  ad::Value node_embeddings(const EncoderInput& in) const;
  /// Projection head over graph embeddings.
  ad::Value project(const ad::Value& graph_embedding) const;

  const GinConfig& config() const noexcept { return config_; }
  const std::string& prefix() const noexcept { return prefix_; }

 private:
  struct Layer {
    ad::Value eps;
    nn::Linear lin1, lin2;
  };
  GinConfig config_;
  std::string prefix_;
  std::vector<Layer> layers_;
  nn::Linear proj1_, proj2_;
};

}  // namespace sola
