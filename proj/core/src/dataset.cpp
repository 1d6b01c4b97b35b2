#include "sola/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "sola/error.hpp"

namespace sola {

double Dataset::avg_nodes() const {
  if (graphs.empty()) return 0.0;
  double total = 0.0;
  for (const Graph& g : graphs) total += g.num_nodes();
  return total / static_cast<double>(graphs.size());
}

double Dataset::avg_edges() const {
  if (graphs.empty()) return 0.0;
  double total = 0.0;
  for (const Graph& g : graphs) total += static_cast<double>(g.num_edges());
  return total / static_cast<double>(graphs.size());
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) out.push_back(g.label().value_or(-1));
  return out;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    if (static_cast<int>(g.feature_dim()) != feature_dim) {
      throw ContractError("graph " + std::to_string(i) + " has feature width " +
                          std::to_string(g.feature_dim()) + ", dataset declares " +
                          std::to_string(feature_dim));
    }
    if (g.label() && (*g.label() < 0 || *g.label() >= num_classes)) {
      throw ContractError("graph " + std::to_string(i) + " label " +
                          std::to_string(*g.label()) + " outside [0, " +
                          std::to_string(num_classes) + ")");
    }
  }
}

nlohmann::json Dataset::manifest() const {
  return {{"name", name},           {"num_graphs", graphs.size()}, {"num_classes", num_classes},
          {"feature_dim", feature_dim}, {"avg_nodes", avg_nodes()},    {"avg_edges", avg_edges()}};
}

Dataset Dataset::subset(std::span<const int> indices) const {
  Dataset out{name, {}, feature_dim, num_classes};
  out.graphs.reserve(indices.size());
  for (int i : indices) out.graphs.push_back(graphs.at(static_cast<std::size_t>(i)));
  return out;
}

Batch make_batch(const Dataset& ds, std::span<const int> indices) {
  Batch b;
  b.indices.assign(indices.begin(), indices.end());
  b.node_offsets.push_back(0);
  for (int i : indices) {
    const Graph& g = ds.graphs.at(static_cast<std::size_t>(i));
    b.graphs.push_back(&g);
    b.node_offsets.push_back(b.node_offsets.back() + g.num_nodes());
  }
  return b;
}

std::vector<Batch> epoch_batches(const Dataset& ds, int batch_size, Rng& rng) {
  if (batch_size < 2) {
    throw ParameterError("batch size must be at least 2, got " + std::to_string(batch_size));
  }
  std::vector<int> order = rng.permutation(static_cast<int>(ds.size()));
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start < 2) break;
    out.push_back(make_batch(ds, std::span<const int>(order).subspan(start, end - start)));
  }
  return out;
}

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "auto") return FeatureMode::kAuto;
  if (s == "constant") return FeatureMode::kConstant;
  if (s == "degree") return FeatureMode::kDegreeOneHot;
  throw ParameterError("unknown feature mode '" + s + "' (auto, constant, degree)");
}

std::string to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::kAuto: return "auto";
    case FeatureMode::kConstant: return "constant";
    case FeatureMode::kDegreeOneHot: return "degree";
  }
  return "auto";
}

}  // namespace sola
