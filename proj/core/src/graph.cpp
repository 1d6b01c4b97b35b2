#include "sola/graph.hpp"

#include <algorithm>
#include <string>

#include "sola/error.hpp"

namespace sola {

Graph::Graph(int num_nodes, ad::Tensor features, std::vector<Edge> edges,
             std::optional<int> label)
    : num_nodes_(num_nodes),
      features_(std::move(features)),
      edges_(std::move(edges)),
      label_(label) {
  if (num_nodes_ < 0) throw ContractError("Graph: negative node count");
  if (features_.rows() != static_cast<std::size_t>(num_nodes_)) {
    throw ContractError("Graph: " + std::to_string(features_.rows()) + " feature rows for " +
                        std::to_string(num_nodes_) + " nodes");
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.u < 0 || e.v >= num_nodes_ || e.u >= e.v) {
      throw ContractError("Graph: edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                          ") is not canonical or out of range");
    }
    if (i > 0 && !(edges_[i - 1] < e)) {
      throw ContractError("Graph: edges must be sorted and unique");
    }
  }
  build_adjacency();
}

Graph Graph::from_pairs(int num_nodes, ad::Tensor features,
                        std::span<const std::pair<int, int>> pairs, std::optional<int> label) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [a, b] : pairs) {
    if (a == b) continue;
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      throw ContractError("Graph::from_pairs: endpoint out of range");
    }
    edges.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Graph(num_nodes, std::move(features), std::move(edges), label);
}

void Graph::build_adjacency() {
  adjacency_.assign(static_cast<std::size_t>(num_nodes_), {});
  for (const Edge& e : edges_) {
    adjacency_[static_cast<std::size_t>(e.u)].push_back(e.v);
    adjacency_[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  for (auto& n : adjacency_) std::sort(n.begin(), n.end());
}

bool Graph::has_edge(int a, int b) const { return edge_index(a, b) >= 0; }

int Graph::edge_index(int a, int b) const {
  if (a == b) return -1;
  Edge key{std::min(a, b), std::max(a, b)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return -1;
  return static_cast<int>(it - edges_.begin());
}

Graph Graph::with_label(std::optional<int> label) const {
  Graph g = *this;
  g.label_ = label;
  return g;
}

Graph Graph::with_features(ad::Tensor features) const {
  return Graph(num_nodes_, std::move(features), edges_, label_);
}

std::pair<int, std::vector<int>> connected_components(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  int count = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    comp[static_cast<std::size_t>(s)] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : g.neighbors(v)) {
        if (comp[static_cast<std::size_t>(w)] < 0) {
          comp[static_cast<std::size_t>(w)] = count;
          stack.push_back(w);
        }
      }
    }
    ++count;
  }
  return {count, std::move(comp)};
}

}  // namespace sola
