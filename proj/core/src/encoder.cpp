#include "sola/encoder.hpp"

#include <algorithm>

#include "sola/error.hpp"

namespace sola {

using ad::Tensor;
using ad::Value;

Readout parse_readout(const std::string& s) {
  if (s == "sum") return Readout::kSum;
  if (s == "mean") return Readout::kMean;
  throw ParameterError("unknown readout '" + s + "' (sum, mean)");
}

std::string to_string(Readout r) { return r == Readout::kSum ? "sum" : "mean"; }

void GinConfig::validate() const {
  if (layers < 1) throw ParameterError("encoder layers must be >= 1");
  if (hidden < 1) throw ParameterError("encoder hidden dim must be >= 1");
  if (input_dim < 1) throw ParameterError("encoder input dim must be >= 1");
  if (projection_dim < 1) throw ParameterError("projection dim must be >= 1");
}

namespace {

void append_graph(const Graph& g, int offset, int graph_id, std::vector<double>& feats,
                  EncoderInput& in) {
  const auto& x = g.features();
  feats.insert(feats.end(), x.values().begin(), x.values().end());
  for (const Edge& e : g.edges()) {
    in.src.push_back(offset + e.u);
    in.dst.push_back(offset + e.v);
    in.src.push_back(offset + e.v);
    in.dst.push_back(offset + e.u);
  }
  in.graph_of_node.insert(in.graph_of_node.end(), static_cast<std::size_t>(g.num_nodes()),
                          graph_id);
}

}  // namespace

EncoderInput EncoderInput::from_batch(const Batch& batch) {
  EncoderInput in;
  std::vector<double> feats;
  std::size_t dim = batch.graphs.empty() ? 0 : batch.graphs.front()->feature_dim();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.graphs[i]->feature_dim() != dim) {
      throw ContractError("batch graphs disagree on feature width");
    }
    append_graph(*batch.graphs[i], batch.node_offsets[i], static_cast<int>(i), feats, in);
  }
  in.num_graphs = static_cast<int>(batch.size());
  in.features = Value::constant(
      Tensor(static_cast<std::size_t>(batch.total_nodes()), dim, std::move(feats)));
  return in;
}

EncoderInput EncoderInput::from_graph(const Graph& g) {
  EncoderInput in;
  std::vector<double> feats;
  append_graph(g, 0, 0, feats, in);
  in.num_graphs = 1;
  in.features = Value::constant(
      Tensor(static_cast<std::size_t>(g.num_nodes()), g.feature_dim(), std::move(feats)));
  return in;
}

Value readout_groups(const Value& x, std::span<const int> group_of_row, int groups, Readout mode,
                     const Value* weights) {
  if (group_of_row.size() != x.rows()) {
    throw ContractError("readout: " + std::to_string(group_of_row.size()) + " group ids for " +
                        std::to_string(x.rows()) + " rows");
  }
  std::vector<int> count(static_cast<std::size_t>(groups), 0);
  for (int g : group_of_row) {
    if (g < 0 || g >= groups) throw ContractError("readout: group id out of range");
    ++count[g];
  }
  for (int g = 0; g < groups; ++g) {
    if (count[g] == 0) throw ContractError("readout: set " + std::to_string(g) + " is empty");
  }
  const bool weighted = weights && weights->defined();
  Value rows = weighted ? ad::mul_col(x, *weights) : x;
  Value total = ad::index_add(rows, group_of_row, static_cast<std::size_t>(groups));
  if (mode == Readout::kSum) return total;
  Value denom;
  if (weighted) {
    denom = ad::clamp_min(ad::index_add(*weights, group_of_row, static_cast<std::size_t>(groups)),
                          1e-12);
  } else {
    Tensor c(static_cast<std::size_t>(groups), 1);
    for (int g = 0; g < groups; ++g) c[static_cast<std::size_t>(g)] = count[g];
    denom = Value::constant(std::move(c));
  }
  return ad::div_col(total, denom);
}

Value readout(const Value& x, std::span<const std::vector<int>> sets, Readout mode,
              const Value* weights) {
  std::vector<int> rows, group;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (sets[s].empty()) throw ContractError("readout: set " + std::to_string(s) + " is empty");
    for (int r : sets[s]) {
      if (r < 0 || static_cast<std::size_t>(r) >= x.rows()) {
        throw ContractError("readout: row index out of range");
      }
      rows.push_back(r);
      group.push_back(static_cast<int>(s));
    }
  }
  Value gathered = ad::gather_rows(x, rows);
  Value w;
  if (weights && weights->defined()) w = ad::gather_rows(*weights, rows);
  return readout_groups(gathered, group, static_cast<int>(sets.size()), mode,
                        w.defined() ? &w : nullptr);
}

GinEncoder::GinEncoder(ad::ParameterStore& store, const std::string& prefix,
                       const GinConfig& config, Rng& rng)
    : config_(config), prefix_(prefix) {
  config_.validate();
  const auto h = static_cast<std::size_t>(config_.hidden);
  std::size_t in = static_cast<std::size_t>(config_.input_dim);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string base = prefix + ".layer" + std::to_string(l);
    Layer layer;
    layer.eps = store.add(base + ".eps", Tensor::scalar(0.0));
    layer.lin1 = nn::Linear(store, base + ".mlp.0", in, h, rng);
    layer.lin2 = nn::Linear(store, base + ".mlp.1", h, h, rng);
    layers_.push_back(std::move(layer));
    in = h;
  }
  const auto p = static_cast<std::size_t>(config_.projection_dim);
  proj1_ = nn::Linear(store, prefix + ".proj.0", h, p, rng);
  proj2_ = nn::Linear(store, prefix + ".proj.1", p, p, rng);
}

namespace {

Value standardize(const Value& h, const std::vector<int>& graph_of_node, int graphs) {
  Value mu = ad::gather_rows(readout_groups(h, graph_of_node, graphs, Readout::kMean), graph_of_node);
  Value centered = h - mu;
  Value var = readout_groups(centered * centered, graph_of_node, graphs, Readout::kMean);
  Value sd = ad::gather_rows(ad::sqrt(var + 1e-5), graph_of_node);
  return centered / sd;
}

}  // namespace

Value GinEncoder::node_embeddings(const EncoderInput& in) const {
  if (!in.features.defined() || in.features.cols() != static_cast<std::size_t>(config_.input_dim)) {
    throw ContractError("encoder: feature width " +
                        (in.features.defined() ? std::to_string(in.features.cols()) : "?") +
                        " does not match input_dim " + std::to_string(config_.input_dim));
  }
  if (in.features.rows() != in.graph_of_node.size()) {
    throw ContractError("encoder: feature rows do not match node count");
  }
  if (in.src.size() != in.dst.size()) throw ContractError("encoder: src/dst size mismatch");
  if (in.edge_weight.defined() && in.edge_weight.rows() != in.src.size()) {
    throw ContractError("encoder: edge weight count does not match messages");
  }
  const auto n = static_cast<std::size_t>(in.num_nodes());
  Value h = in.features;
  for (const Layer& layer : layers_) {
    Value pre = h + h * layer.eps;
    if (!in.src.empty()) {
      Value msg = ad::gather_rows(h, in.src);
      if (in.edge_weight.defined()) msg = ad::mul_col(msg, in.edge_weight);
      pre = pre + ad::index_add(msg, in.dst, n);
    }
    Value hidden = layer.lin1(pre);
    if (config_.standardize) hidden = standardize(hidden, in.graph_of_node, in.num_graphs);
    h = layer.lin2(ad::relu(hidden));
  }
  return h;
}

Value GinEncoder::project(const Value& graph_embedding) const {
  return proj2_(ad::relu(proj1_(graph_embedding)));
}

Embeddings GinEncoder::forward(const EncoderInput& in) const {
  Embeddings out;
  out.node = node_embeddings(in);
  const Value* w = in.node_weight.defined() ? &in.node_weight : nullptr;
  out.graph = readout_groups(out.node, in.graph_of_node, in.num_graphs, config_.graph_readout, w);
  if (!in.subgraph_of_node.empty()) {
    out.subgraph = readout_groups(out.node, in.subgraph_of_node, in.num_subgraphs,
                                  config_.subgraph_readout, w);
  }
  out.projected = project(out.graph);
  return out;
}

}  // namespace sola
