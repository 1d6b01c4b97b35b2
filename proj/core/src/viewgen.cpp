#include "sola/viewgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "sola/error.hpp"

namespace sola {

using ad::Tensor;
using ad::Value;

namespace {

constexpr int kKeep = 1;  // column of the "keep" decision in binary heads

Edge canonical(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

Value column(const Tensor& t) { return Value::constant(t); }

Tensor ones(std::size_t n) { return Tensor(n, 1, 1.0); }

struct Binary {
  Value hard;  // rows × 1 keep column, straight-through
  Value soft;  // rows × 1
  std::vector<int> keep;
};

// Two-way hard Gumbel decision per row. `forced[r]` >= 0 overrides the draw.
Binary sample_binary(const Value& logits, double tau, Rng& rng, const std::vector<int>& forced) {
  Tensor noise = ad::gumbel_noise(logits.rows(), 2, rng);
  ad::GumbelSample s = ad::gumbel_sample(logits, noise, tau, false);
  Tensor hard(logits.rows(), 2);
  Binary out;
  out.keep.resize(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    int c = forced.empty() || forced[r] < 0 ? s.choice[r] : forced[r];
    hard(r, static_cast<std::size_t>(c)) = 1.0;
    out.keep[r] = c;
  }
  Value st = ad::straight_through(hard, s.soft);
  out.hard = ad::slice_cols(st, kKeep, kKeep + 1);
  out.soft = ad::slice_cols(s.soft, kKeep, kKeep + 1);
  return out;
}

// Shifts the keep column by +prior where the identity decision is keep and
// by -prior where it is reject.
Value with_prior(const Value& logits, double prior, const Tensor* base) {
  if (prior == 0.0) return logits;
  Tensor shift(logits.rows(), 2);
  for (std::size_t r = 0; r < logits.rows(); ++r)
    shift(r, kKeep) = base == nullptr || (*base)[r] == 1.0 ? prior : -prior;
  return logits + Value::constant(shift);
}

// base + gate * (f - base): forward equals f whenever gate is exactly 1.
Value gated(const Value& f, const Tensor& base, const Value& gate) {
  Value b = Value::constant(base);
  return ad::mul(gate, f - b) + b;
}

std::size_t negative_count(double ratio, std::size_t existing, std::size_t floor) {
  auto n = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(existing)));
  return std::max(n, floor);
}

}  // namespace

Strategy parse_strategy(const std::string& s) {
  if (s == "node_drop") return Strategy::kNodeDrop;
  if (s == "feature_mask") return Strategy::kFeatureMask;
  if (s == "intra_edge") return Strategy::kIntraEdge;
  if (s == "inter_edge") return Strategy::kInterEdge;
  if (s == "subgraph_swap") return Strategy::kSubgraphSwap;
  throw ParameterError("unknown strategy '" + s +
                       "' (node_drop, feature_mask, intra_edge, inter_edge, subgraph_swap)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kNodeDrop: return "node_drop";
    case Strategy::kFeatureMask: return "feature_mask";
    case Strategy::kIntraEdge: return "intra_edge";
    case Strategy::kInterEdge: return "inter_edge";
    case Strategy::kSubgraphSwap: return "subgraph_swap";
  }
  return "node_drop";
}

// ---------------------------------------------------------------------------
// Sampling helpers

std::vector<Edge> sample_non_edges_within(const Graph& g, std::span<const int> nodes,
                                          std::size_t count, Rng& rng) {
  const std::size_t s = nodes.size();
  const std::size_t pairs = s * (s - (s > 0 ? 1 : 0)) / 2;
  if (count == 0 || s < 2) return {};
  if (pairs <= 4096) {
    std::vector<Edge> pool;
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = i + 1; j < s; ++j)
        if (!g.has_edge(nodes[i], nodes[j])) pool.push_back(canonical(nodes[i], nodes[j]));
    count = std::min(count, pool.size());
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
  }
  std::set<Edge> chosen;
  while (chosen.size() < count) {
    int a = nodes[rng.below(s)], b = nodes[rng.below(s)];
    if (a == b || g.has_edge(a, b)) continue;
    chosen.insert(canonical(a, b));
  }
  return {chosen.begin(), chosen.end()};
}

std::vector<Edge> sample_non_edges_between(const Graph& g, std::span<const int> a,
                                           std::span<const int> b, std::size_t count, Rng& rng) {
  if (count == 0 || a.empty() || b.empty()) return {};
  if (a.size() * b.size() <= 4096) {
    std::vector<Edge> pool;
    for (int u : a)
      for (int v : b)
        if (!g.has_edge(u, v)) pool.push_back(canonical(u, v));
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
  }
  // Large blocks are sparse at desk scale: rejection sampling terminates fast.
  std::set<Edge> chosen;
  while (chosen.size() < count) {
    int u = a[rng.below(a.size())], v = b[rng.below(b.size())];
    if (g.has_edge(u, v)) continue;
    chosen.insert(canonical(u, v));
  }
  return {chosen.begin(), chosen.end()};
}

std::vector<std::pair<int, int>> swap_correspondence(const Graph& g, std::span<const int> a,
                                                     std::span<const int> b) {
  auto ranked = [&](std::span<const int> s) {
    std::vector<int> r(s.begin(), s.end());
    std::stable_sort(r.begin(), r.end(), [&](int x, int y) {
      if (g.degree(x) != g.degree(y)) return g.degree(x) > g.degree(y);
      return x < y;
    });
    return r;
  };
  std::vector<int> ra = ranked(a), rb = ranked(b);
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < std::min(ra.size(), rb.size()); ++i) out.emplace_back(ra[i], rb[i]);
  return out;
}

// ---------------------------------------------------------------------------
// AugmentedView

std::vector<double> AugmentedView::edge_weight_values() const {
  const auto& d = edge_weight.data();
  return {d.values().begin(), d.values().end()};
}

std::vector<Edge> AugmentedView::surviving_edges() const {
  std::vector<Edge> out;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edge_weight.data()[e] != 0.0) out.push_back(edges[e]);
  return out;
}

Value AugmentedView::adjacency(bool soft) const {
  const auto n = static_cast<std::size_t>(num_nodes);
  if (edges.empty()) return Value::constant(Tensor(n, n));
  std::vector<int> flat;
  flat.reserve(edges.size() * 2);
  for (const Edge& e : edges) flat.push_back(e.u * num_nodes + e.v);
  for (const Edge& e : edges) flat.push_back(e.v * num_nodes + e.u);
  const Value& w = soft ? edge_weight_soft : edge_weight;
  return ad::reshape(ad::index_add(ad::concat({w, w}, 0), flat, n * n), n, n);
}

Graph AugmentedView::to_graph(std::optional<int> label) const {
  return Graph(num_nodes, features.data(), surviving_edges(), label);
}

EncoderInput views_to_input(std::span<const AugmentedView> views) {
  EncoderInput in;
  std::vector<Value> feats, weights, keeps;
  int offset = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const AugmentedView& v = views[i];
    feats.push_back(v.features);
    keeps.push_back(v.node_keep);
    for (const Edge& e : v.edges) {
      in.src.push_back(offset + e.u);
      in.dst.push_back(offset + e.v);
    }
    for (const Edge& e : v.edges) {
      in.src.push_back(offset + e.v);
      in.dst.push_back(offset + e.u);
    }
    if (!v.edges.empty()) {
      weights.push_back(v.edge_weight);
      weights.push_back(v.edge_weight);
    }
    in.graph_of_node.insert(in.graph_of_node.end(), static_cast<std::size_t>(v.num_nodes),
                            static_cast<int>(i));
    offset += v.num_nodes;
  }
  in.num_graphs = static_cast<int>(views.size());
  in.features = ad::concat(feats, 0);
  in.node_weight = ad::concat(keeps, 0);
  if (!weights.empty()) in.edge_weight = ad::concat(weights, 0);
  return in;
}

// ---------------------------------------------------------------------------
// ViewGenerator

ViewGenerator::ViewGenerator(ad::ParameterStore& store, const std::string& prefix,
                             const ViewGenConfig& config, Rng& rng,
                             const GinEncoder* shared_encoder)
    : config_(config), shared_(shared_encoder) {
  if (config_.neg_ratio < 0.0) throw ParameterError("neg_ratio must be >= 0");
  if (!shared_) own_encoder_ = GinEncoder(store, prefix + ".encoder", config_.encoder, rng);
  const auto h = static_cast<std::size_t>(encoder().config().hidden);
  selector_ = nn::Linear(store, prefix + ".selector", h, kNumStrategies, rng);
  drop_head_ = nn::Linear(store, prefix + ".node_drop", h, 2, rng);
  mask_head_ = nn::Linear(store, prefix + ".feature_mask", h, 2, rng);
  intra_head_ = nn::Linear(store, prefix + ".intra_edge", 2 * h, 2, rng);
  inter_head_ = nn::Linear(store, prefix + ".inter_edge", 4 * h, 2, rng);
  // Decision heads start at zero: a uniform strategy draw and even keep odds
  // (before the identity prior) whatever the embedding scale.
  for (const nn::Linear* head : {&selector_, &drop_head_, &mask_head_, &intra_head_, &inter_head_}) {
    for (Value p : {head->weight(), head->bias()})
      std::fill(p.mutable_data().values().begin(), p.mutable_data().values().end(), 0.0);
  }
}

namespace {

// Selector logits with the inter-subgraph strategies masked when k == 1.
Value selector_logits(const nn::Linear& selector, const Value& hs) {
  Value logits = selector(hs);
  if (hs.rows() != 1) return logits;
  std::vector<std::uint8_t> mask(kNumStrategies, 0);
  mask[static_cast<int>(Strategy::kInterEdge)] = 1;
  mask[static_cast<int>(Strategy::kSubgraphSwap)] = 1;
  return ad::masked_fill(logits, mask, -std::numeric_limits<double>::infinity());
}

EncoderInput with_subgraphs(EncoderInput in, const std::vector<const Partition*>& parts,
                            const std::vector<int>& offsets) {
  in.subgraph_of_node.assign(in.graph_of_node.size(), 0);
  int base = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (std::size_t v = 0; v < parts[i]->assignment.size(); ++v) {
      in.subgraph_of_node[static_cast<std::size_t>(offsets[i]) + v] = base + parts[i]->assignment[v];
    }
    base += parts[i]->k;
  }
  in.num_subgraphs = base;
  return in;
}

}  // namespace

std::vector<AugmentedView> ViewGenerator::generate(const Batch& batch,
                                                   std::span<const Partition* const> parts,
                                                   Rng& rng,
                                                   const GenerateOptions& options) const {
  if (parts.size() != batch.size()) throw ContractError("generate: one partition per graph");
  if (!(options.tau > 0.0)) throw ParameterError("Gumbel temperature must be positive");
  std::vector<const Partition*> p(parts.begin(), parts.end());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->assignment.size() != static_cast<std::size_t>(batch.graphs[i]->num_nodes())) {
      throw ContractError("generate: partition does not match graph " + std::to_string(i));
    }
  }
  EncoderInput in = with_subgraphs(EncoderInput::from_batch(batch), p, batch.node_offsets);
  Value h = encoder().node_embeddings(in);
  Value hs = readout_groups(h, in.subgraph_of_node, in.num_subgraphs,
                            encoder().config().subgraph_readout);
  std::vector<AugmentedView> views;
  views.reserve(batch.size());
  int sub_base = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<int> rows(static_cast<std::size_t>(batch.graphs[i]->num_nodes()));
    std::iota(rows.begin(), rows.end(), batch.node_offsets[i]);
    std::vector<int> subs(static_cast<std::size_t>(p[i]->k));
    std::iota(subs.begin(), subs.end(), sub_base);
    sub_base += p[i]->k;
    views.push_back(build_view(*batch.graphs[i], *p[i], ad::gather_rows(h, rows),
                               ad::gather_rows(hs, subs), rng, options));
  }
  return views;
}

AugmentedView ViewGenerator::generate(const Graph& g, const Partition& p, Rng& rng,
                                      const GenerateOptions& options) const {
  Batch b;
  b.indices = {0};
  b.graphs = {&g};
  b.node_offsets = {0, g.num_nodes()};
  const Partition* parts[] = {&p};
  return std::move(generate(b, parts, rng, options).front());
}

AugmentedView ViewGenerator::build_view(const Graph& g, const Partition& p, const Value& h,
                                        const Value& hs, Rng& rng,
                                        const GenerateOptions& opt) const {
  const int n = g.num_nodes();
  const int k = p.k;
  const auto un = static_cast<std::size_t>(n);
  AugmentedView view;
  view.num_nodes = n;

  // Selector.
  {
    Value logits = selector_logits(selector_, hs);
    Tensor noise = ad::gumbel_noise(static_cast<std::size_t>(k), kNumStrategies, rng);
    ad::GumbelSample s = ad::gumbel_sample(logits, noise, opt.tau, false);
    Tensor hard(static_cast<std::size_t>(k), kNumStrategies);
    for (int i = 0; i < k; ++i) {
      int c = opt.force_strategy ? static_cast<int>(*opt.force_strategy) : s.choice[i];
      hard(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = 1.0;
      view.sampled.push_back(static_cast<Strategy>(c));
    }
    view.state = ad::straight_through(hard, s.soft);
    view.state_soft = s.soft;
  }
  std::vector<int> chosen_col;
  for (Strategy s : view.sampled) chosen_col.push_back(static_cast<int>(s));
  const std::vector<int> all_subs = iota_vec(k);
  // Gate per subgraph: the state entry of its sampled strategy (forward 1).
  Value gate = ad::pick(view.state, all_subs, chosen_col);
  Value gate_soft = ad::pick(view.state_soft, all_subs, chosen_col);

  // Partner resolution.
  view.applied = view.sampled;
  {
    std::vector<int> swappers;
    for (int i = 0; i < k; ++i)
      if (view.sampled[i] == Strategy::kSubgraphSwap) swappers.push_back(i);
    for (std::size_t t = 0; t + 1 < swappers.size(); t += 2)
      view.swap_pairs.emplace_back(swappers[t], swappers[t + 1]);
    if (swappers.size() % 2 == 1) view.applied[swappers.back()] = Strategy::kIntraEdge;
  }
  std::vector<std::map<int, int>> cross(static_cast<std::size_t>(k));
  for (int e : p.inter_edges) {
    int a = p.assignment[g.edges()[e].u], b = p.assignment[g.edges()[e].v];
    ++cross[a][b];
    ++cross[b][a];
  }
  std::set<std::pair<int, int>> inter_seen;
  for (int i = 0; i < k; ++i) {
    if (view.sampled[i] != Strategy::kInterEdge) continue;
    int partner = -1, best = -1;
    for (int j = 0; j < k; ++j) {
      if (j == i || view.applied[j] == Strategy::kSubgraphSwap) continue;
      auto it = cross[i].find(j);
      int c = it == cross[i].end() ? 0 : it->second;
      if (c > best) {
        best = c;
        partner = j;
      }
    }
    if (partner < 0) {
      view.applied[i] = Strategy::kIntraEdge;
      continue;
    }
    if (inter_seen.insert({std::min(i, partner), std::max(i, partner)}).second) {
      view.inter_pairs.emplace_back(i, partner);
    }
  }

  // Node-level heads: node drop and feature mask.
  Tensor untouched = ones(un);
  std::vector<int> row_nodes;
  std::vector<Value> row_mult, row_mult_soft, keep_parts, keep_parts_soft;
  std::vector<int> drop_nodes;
  auto node_head = [&](Strategy which, const nn::Linear& head, bool guard) {
    std::vector<int> nodes, sub_of_row;
    for (int i = 0; i < k; ++i) {
      if (view.applied[i] != which) continue;
      for (int v : p.members[i]) {
        nodes.push_back(v);
        sub_of_row.push_back(i);
      }
    }
    if (nodes.empty()) return;
    view.head_used[static_cast<int>(which)] = true;
    Value logits = with_prior(head(ad::gather_rows(h, nodes)), config_.identity_prior, nullptr);
    std::vector<int> forced(nodes.size(), opt.identity_draws ? kKeep : -1);
    if (guard && !opt.identity_draws) {
      // Pre-draw so the guard can inspect the sample; the noise stream is
      // consumed exactly once either way.
      Tensor noise = ad::gumbel_noise(nodes.size(), 2, rng);
      ad::GumbelSample s = ad::gumbel_sample(logits, noise, opt.tau, false);
      Tensor prob = ad::softmax(Value::constant(logits.data())).data();
      for (std::size_t r = 0; r < nodes.size();) {
        std::size_t end = r;
        bool any_keep = false;
        while (end < nodes.size() && sub_of_row[end] == sub_of_row[r]) {
          any_keep |= s.choice[end] == kKeep;
          ++end;
        }
        for (std::size_t t = r; t < end; ++t) forced[t] = s.choice[t];
        if (!any_keep) {
          std::size_t best = r;
          for (std::size_t t = r + 1; t < end; ++t)
            if (prob(t, kKeep) > prob(best, kKeep)) best = t;
          forced[best] = kKeep;
        }
        r = end;
      }
      Tensor hard(nodes.size(), 2);
      for (std::size_t r = 0; r < nodes.size(); ++r) hard(r, static_cast<std::size_t>(forced[r])) = 1.0;
      Value st = ad::straight_through(hard, s.soft);
      Binary b{ad::slice_cols(st, kKeep, kKeep + 1), ad::slice_cols(s.soft, kKeep, kKeep + 1), forced};
      Value g_rows = ad::gather_rows(gate, sub_of_row);
      Value gs_rows = ad::gather_rows(gate_soft, sub_of_row);
      Value m = gated(b.hard, Tensor(nodes.size(), 1, 1.0), g_rows);
      Value ms = gated(b.soft, Tensor(nodes.size(), 1, 1.0), gs_rows);
      row_mult.push_back(m);
      row_mult_soft.push_back(ms);
      keep_parts.push_back(m);
      keep_parts_soft.push_back(ms);
      drop_nodes.insert(drop_nodes.end(), nodes.begin(), nodes.end());
    } else {
      Binary b = sample_binary(logits, opt.tau, rng, forced);
      Value g_rows = ad::gather_rows(gate, sub_of_row);
      Value gs_rows = ad::gather_rows(gate_soft, sub_of_row);
      Value m = gated(b.hard, Tensor(nodes.size(), 1, 1.0), g_rows);
      Value ms = gated(b.soft, Tensor(nodes.size(), 1, 1.0), gs_rows);
      row_mult.push_back(m);
      row_mult_soft.push_back(ms);
      if (which == Strategy::kNodeDrop) {
        keep_parts.push_back(m);
        keep_parts_soft.push_back(ms);
        drop_nodes.insert(drop_nodes.end(), nodes.begin(), nodes.end());
      }
    }
    for (int v : nodes) untouched[static_cast<std::size_t>(v)] = 0.0;
    row_nodes.insert(row_nodes.end(), nodes.begin(), nodes.end());
  };
  node_head(Strategy::kNodeDrop, drop_head_, true);
  node_head(Strategy::kFeatureMask, mask_head_, false);

  const Value x = Value::constant(g.features());
  if (row_nodes.empty()) {
    view.features = view.features_soft = x;
  } else {
    Value mult = ad::index_add(ad::concat(row_mult, 0), row_nodes, un) + column(untouched);
    view.features = ad::mul_col(x, mult);
    Value mult_soft = ad::index_add(ad::concat(row_mult_soft, 0), row_nodes, un) + column(untouched);
    view.features_soft = ad::mul_col(x, mult_soft);
  }
  if (drop_nodes.empty()) {
    view.node_keep = Value::constant(ones(un));
    view.node_keep_soft = view.node_keep;
  } else {
    Tensor rest = ones(un);
    for (int v : drop_nodes) rest[static_cast<std::size_t>(v)] = 0.0;
    view.node_keep = ad::index_add(ad::concat(keep_parts, 0), drop_nodes, un) + column(rest);
    view.node_keep_soft =
        ad::index_add(ad::concat(keep_parts_soft, 0), drop_nodes, un) + column(rest);
  }

  // Swap relabelling: a node permutation applied to edges that join
  // different units (a unit is a swap pair or a single other subgraph).
  view.node_map = iota_vec(n);
  std::vector<int> unit(static_cast<std::size_t>(k));
  std::iota(unit.begin(), unit.end(), 0);
  for (auto [a, b] : view.swap_pairs) {
    view.head_used[static_cast<int>(Strategy::kSubgraphSwap)] = true;
    unit[b] = a;
    for (auto [u, w] : swap_correspondence(g, p.members[a], p.members[b])) {
      view.node_map[u] = w;
      view.node_map[w] = u;
    }
  }

  // Edge candidates.
  struct Candidate {
    Edge e;
    int row;  // row in the concatenated weight pieces
  };
  std::vector<Candidate> cands;
  std::vector<Value> pieces, pieces_soft;
  int rows_so_far = 0;

  std::set<std::pair<int, int>> inter_set;
  for (auto [a, b] : view.inter_pairs) inter_set.insert({std::min(a, b), std::max(a, b)});
  {
    int fixed = 0;
    for (const Edge& e : g.edges()) {
      int su = p.assignment[e.u], sv = p.assignment[e.v];
      if (su == sv && view.applied[su] == Strategy::kIntraEdge) continue;
      if (su != sv && inter_set.count({std::min(su, sv), std::max(su, sv)})) continue;
      Edge out = e;
      if (unit[su] != unit[sv]) out = canonical(view.node_map[e.u], view.node_map[e.v]);
      cands.push_back({out, rows_so_far + fixed++});
    }
    if (fixed > 0) {
      Value c = Value::constant(ones(static_cast<std::size_t>(fixed)));
      pieces.push_back(c);
      pieces_soft.push_back(c);
      rows_so_far += fixed;
    }
  }

  auto edge_head = [&](const nn::Linear& head, const Value& inputs, const std::vector<Edge>& es,
                       const Tensor& base, const std::vector<int>& gate_rows) {
    std::vector<int> forced;
    if (opt.identity_draws) {
      for (std::size_t r = 0; r < es.size(); ++r) forced.push_back(base[r] == 1.0 ? kKeep : 0);
    }
    Binary b = sample_binary(with_prior(head(inputs), config_.identity_prior, &base), opt.tau, rng, forced);
    pieces.push_back(gated(b.hard, base, ad::gather_rows(gate, gate_rows)));
    pieces_soft.push_back(gated(b.soft, base, ad::gather_rows(gate_soft, gate_rows)));
    for (std::size_t r = 0; r < es.size(); ++r) cands.push_back({es[r], rows_so_far + static_cast<int>(r)});
    rows_so_far += static_cast<int>(es.size());
  };

  // Intra-subgraph edge perturbation.
  {
    std::vector<Edge> es;
    std::vector<double> base;
    std::vector<int> gate_rows;
    for (int i = 0; i < k; ++i) {
      if (view.applied[i] != Strategy::kIntraEdge || p.subgraph_size(i) < 2) continue;
      for (int e : p.intra_edges[i]) {
        es.push_back(g.edges()[e]);
        base.push_back(1.0);
        gate_rows.push_back(i);
      }
      std::size_t want = negative_count(config_.neg_ratio, p.intra_edges[i].size(), 0);
      for (const Edge& e : sample_non_edges_within(g, p.members[i], want, rng)) {
        es.push_back(e);
        base.push_back(0.0);
        gate_rows.push_back(i);
      }
    }
    if (!es.empty()) {
      view.head_used[static_cast<int>(Strategy::kIntraEdge)] = true;
      std::vector<int> us, vs;
      for (const Edge& e : es) {
        us.push_back(e.u);
        vs.push_back(e.v);
      }
      Value in = ad::concat({ad::gather_rows(h, us), ad::gather_rows(h, vs)}, 1);
      edge_head(intra_head_, in, es, Tensor(es.size(), 1, std::move(base)), gate_rows);
    }
  }

  // Inter-subgraph edge perturbation.
  {
    std::vector<Edge> es;
    std::vector<double> base;
    std::vector<int> gate_rows, near, far, near_sub, far_sub;
    for (auto [i, j] : view.inter_pairs) {
      std::vector<Edge> existing;
      for (int e : p.inter_edges) {
        int a = p.assignment[g.edges()[e].u], b = p.assignment[g.edges()[e].v];
        if ((a == i && b == j) || (a == j && b == i)) existing.push_back(g.edges()[e]);
      }
      std::size_t want = negative_count(config_.neg_ratio, existing.size(), 1);
      std::vector<Edge> negatives =
          sample_non_edges_between(g, p.members[i], p.members[j], want, rng);
      auto add = [&](const Edge& e, double b) {
        bool u_in_i = p.assignment[e.u] == i;
        es.push_back(e);
        base.push_back(b);
        gate_rows.push_back(i);
        near.push_back(u_in_i ? e.u : e.v);
        far.push_back(u_in_i ? e.v : e.u);
        near_sub.push_back(i);
        far_sub.push_back(j);
      };
      for (const Edge& e : existing) add(e, 1.0);
      for (const Edge& e : negatives) add(e, 0.0);
    }
    if (!es.empty()) {
      view.head_used[static_cast<int>(Strategy::kInterEdge)] = true;
      Value in = ad::concat({ad::gather_rows(h, near), ad::gather_rows(h, far),
                             ad::gather_rows(hs, near_sub), ad::gather_rows(hs, far_sub)},
                            1);
      edge_head(inter_head_, in, es, Tensor(es.size(), 1, std::move(base)), gate_rows);
    }
  }

  // Assemble sorted candidate list.
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.e < b.e; });
  for (std::size_t c = 1; c < cands.size(); ++c) {
    if (cands[c].e == cands[c - 1].e) {
      throw ContractError("assembler produced duplicate edge (" + std::to_string(cands[c].e.u) +
                          ", " + std::to_string(cands[c].e.v) + ")");
    }
  }
  for (const Candidate& c : cands) view.edges.push_back(c.e);
  if (cands.empty()) {
    view.edge_weight = Value::constant(Tensor(0, 1));
    view.edge_weight_soft = view.edge_weight;
    return view;
  }
  std::vector<int> order, us, vs;
  for (const Candidate& c : cands) {
    order.push_back(c.row);
    us.push_back(c.e.u);
    vs.push_back(c.e.v);
  }
  Value w = ad::gather_rows(ad::concat(pieces, 0), order);
  Value ws = ad::gather_rows(ad::concat(pieces_soft, 0), order);
  if (!drop_nodes.empty()) {
    w = w * ad::gather_rows(view.node_keep, us) * ad::gather_rows(view.node_keep, vs);
    ws = ws * ad::gather_rows(view.node_keep_soft, us) * ad::gather_rows(view.node_keep_soft, vs);
  }
  view.edge_weight = w;
  view.edge_weight_soft = ws;
  return view;
}

std::vector<SubgraphImportance> ViewGenerator::importance(const Graph& g, const Partition& p) const {
  EncoderInput in = EncoderInput::from_graph(g);
  in.subgraph_of_node = p.assignment;
  in.num_subgraphs = p.k;
  Value h = encoder().node_embeddings(in);
  Value hs = readout_groups(h, in.subgraph_of_node, p.k, encoder().config().subgraph_readout);
  Tensor sel = ad::softmax(selector_logits(selector_, hs)).data();
  Tensor keep = ad::softmax(with_prior(drop_head_(h), config_.identity_prior, nullptr)).data();
  std::vector<SubgraphImportance> out;
  for (int i = 0; i < p.k; ++i) {
    SubgraphImportance s;
    s.id = i;
    s.size = p.subgraph_size(i);
    for (int v : p.members[i]) s.mean_keep += keep(static_cast<std::size_t>(v), kKeep);
    s.mean_keep /= s.size;
    for (int c = 0; c < kNumStrategies; ++c) {
      s.strategy_probs[c] = sel(static_cast<std::size_t>(i), static_cast<std::size_t>(c));
    }
    out.push_back(s);
  }
  return out;
}

nlohmann::json importance_to_json(std::span<const SubgraphImportance> items) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : items) {
    nlohmann::json probs;
    for (int c = 0; c < kNumStrategies; ++c) probs[to_string(static_cast<Strategy>(c))] = s.strategy_probs[c];
    list.push_back({{"subgraph", s.id}, {"size", s.size}, {"mean_keep_prob", s.mean_keep},
                    {"strategy_probs", probs}});
  }
  return list;
}

}  // namespace sola
