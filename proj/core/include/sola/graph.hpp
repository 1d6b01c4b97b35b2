#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sola/autodiff/tensor.hpp"

namespace sola {

/// Undirected edge in canonical orientation (u < v).
struct Edge {
  int u = 0;
  int v = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable attributed graph: N nodes, N×d features, sorted canonical edges.
class Graph {
 public:
  Graph() = default;
  /// Strict constructor: edges must already be canonical, unique, loop-free
  /// and in range; throws ContractError otherwise.
  Graph(int num_nodes, ad::Tensor features, std::vector<Edge> edges,
        std::optional<int> label = std::nullopt);

  /// Lenient constructor: orients pairs, drops self-loops and duplicates.
  static Graph from_pairs(int num_nodes, ad::Tensor features,
                          std::span<const std::pair<int, int>> pairs,
                          std::optional<int> label = std::nullopt);

  int num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  const ad::Tensor& features() const noexcept { return features_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::optional<int> label() const noexcept { return label_; }

  const std::vector<int>& neighbors(int v) const { return adjacency_[static_cast<std::size_t>(v)]; }
  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }
  bool has_edge(int a, int b) const;
  /// Index into edges() or -1.
  int edge_index(int a, int b) const;

  Graph with_label(std::optional<int> label) const;
  Graph with_features(ad::Tensor features) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_ && a.label_ == b.label_ &&
           a.features_ == b.features_;
  }

 private:
  void build_adjacency();

  int num_nodes_ = 0;
  ad::Tensor features_;
  std::vector<Edge> edges_;
  std::optional<int> label_;
  std::vector<std::vector<int>> adjacency_;
};

/// Number of connected components and the component id of each node.
std::pair<int, std::vector<int>> connected_components(const Graph& g);

}  // namespace sola
