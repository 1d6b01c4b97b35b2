#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "sola/error.hpp"
#include "sola/partition.hpp"

namespace sola {
namespace {

// Weighted graph of one Louvain level. Self loops hold the weight of edges
// collapsed inside an aggregated node.
struct Level {
  std::vector<std::vector<std::pair<int, double>>> adj;  // sorted by neighbour
  std::vector<double> self;
  std::vector<double> strength;  // incident weight, self loops counted twice
  double total = 0.0;            // sum of edge weights (m)

  int size() const { return static_cast<int>(adj.size()); }

  void finish() {
    strength.assign(adj.size(), 0.0);
    total = 0.0;
    for (std::size_t i = 0; i < adj.size(); ++i) {
      double s = 2.0 * self[i];
      for (auto [j, w] : adj[i]) s += w;
      strength[i] = s;
      total += s;
    }
    total /= 2.0;
  }
};

double level_modularity(const Level& lv, const std::vector<int>& comm, double resolution) {
  const int n = lv.size();
  std::vector<double> in(static_cast<std::size_t>(n), 0.0), tot(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    tot[comm[i]] += lv.strength[i];
    in[comm[i]] += lv.self[i];
    for (auto [j, w] : lv.adj[i]) {
      if (j > i && comm[j] == comm[i]) in[comm[i]] += w;
    }
  }
  double q = 0.0;
  for (int c = 0; c < n; ++c) {
    double d = tot[c] / (2.0 * lv.total);
    q += in[c] / lv.total - resolution * d * d;
  }
  return q;
}

// Greedy node moves until a pass gains less than min_gain. Returns whether any
// node changed community.
bool move_nodes(const Level& lv, std::vector<int>& comm, Rng* rng, const LouvainOptions& opt) {
  const int n = lv.size();
  std::vector<double> tot(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) tot[comm[i]] += lv.strength[i];
  std::vector<double> link(static_cast<std::size_t>(n), 0.0);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> touched;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  const double two_m = 2.0 * lv.total;
  bool any_move = false;
  double q = level_modularity(lv, comm, opt.resolution);
  while (true) {
    if (rng) rng->shuffle(order);
    bool moved = false;
    for (int i : order) {
      const int own = comm[i];
      const double k = lv.strength[i];
      touched.clear();
      touched.push_back(own);
      seen[own] = 1;
      for (auto [j, w] : lv.adj[i]) {
        int c = comm[j];
        if (!seen[c]) {
          seen[c] = 1;
          touched.push_back(c);
        }
        link[c] += w;
      }
      tot[own] -= k;
      int best = own;
      double best_gain = link[own] - opt.resolution * tot[own] * k / two_m;
      for (std::size_t t = 1; t < touched.size(); ++t) {
        int c = touched[t];
        double gain = link[c] - opt.resolution * tot[c] * k / two_m;
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += k;
      if (best != own) {
        comm[i] = best;
        moved = true;
      }
      for (int c : touched) {
        link[c] = 0.0;
        seen[c] = 0;
      }
    }
    if (!moved) break;
    any_move = true;
    double next = level_modularity(lv, comm, opt.resolution);
    double gain = next - q;
    q = next;
    if (gain < opt.min_gain) break;
  }
  return any_move;
}

// Dense ids by first appearance in node order; returns the community count.
int relabel(std::vector<int>& comm) {
  std::vector<int> map(comm.size(), -1);
  int next = 0;
  for (int& c : comm) {
    if (map[c] < 0) map[c] = next++;
    c = map[c];
  }
  return next;
}

Level aggregate(const Level& lv, const std::vector<int>& comm, int k) {
  Level out;
  out.adj.resize(static_cast<std::size_t>(k));
  out.self.assign(static_cast<std::size_t>(k), 0.0);
  std::vector<std::unordered_map<int, double>> acc(static_cast<std::size_t>(k));
  for (int i = 0; i < lv.size(); ++i) {
    int ci = comm[i];
    out.self[ci] += lv.self[i];
    for (auto [j, w] : lv.adj[i]) {
      int cj = comm[j];
      if (ci == cj) {
        if (j > i) out.self[ci] += w;
      } else {
        acc[ci][cj] += w;
      }
    }
  }
  for (int c = 0; c < k; ++c) {
    out.adj[c].assign(acc[c].begin(), acc[c].end());
    std::sort(out.adj[c].begin(), out.adj[c].end());
  }
  out.finish();
  return out;
}

Partition louvain_once(const Graph& g, Rng& rng, const LouvainOptions& options) {
  const int n = g.num_nodes();

  // Internal id i stands for original node order[i].
  std::vector<int> order(static_cast<std::size_t>(n));
  const bool fixed = !options.visit_order.empty();
  if (fixed) {
    if (options.visit_order.size() != static_cast<std::size_t>(n)) {
      throw ContractError("louvain: visit order must list every node once");
    }
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
    for (int v : options.visit_order) {
      if (v < 0 || v >= n || seen[v]) throw ContractError("louvain: visit order is not a permutation");
      seen[v] = 1;
    }
    order = options.visit_order;
  } else {
    std::iota(order.begin(), order.end(), 0);
  }
  std::vector<int> internal(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) internal[order[i]] = i;

  Level lv;
  lv.adj.resize(static_cast<std::size_t>(n));
  lv.self.assign(static_cast<std::size_t>(n), 0.0);
  for (const Edge& e : g.edges()) {
    int a = internal[e.u], b = internal[e.v];
    lv.adj[a].emplace_back(b, 1.0);
    lv.adj[b].emplace_back(a, 1.0);
  }
  for (auto& row : lv.adj) std::sort(row.begin(), row.end());
  lv.finish();

  std::vector<int> node_comm(static_cast<std::size_t>(n));
  std::iota(node_comm.begin(), node_comm.end(), 0);
  if (lv.total > 0.0) {
    Rng* shuffle = fixed ? nullptr : &rng;
    while (true) {
      std::vector<int> comm(static_cast<std::size_t>(lv.size()));
      std::iota(comm.begin(), comm.end(), 0);
      bool moved = move_nodes(lv, comm, shuffle, options);
      int k = relabel(comm);
      for (int& c : node_comm) c = comm[c];
      if (!moved || k == lv.size()) break;
      lv = aggregate(lv, comm, k);
    }
  }

  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) assignment[order[i]] = node_comm[i];
  return split_disconnected(g, Partition::from_assignment(g, assignment));
}

}  // namespace

Partition louvain(const Graph& g, Rng& rng, const LouvainOptions& options) {
  if (g.num_nodes() < 1) throw ContractError("louvain: graph has no nodes");
  if (options.resolution <= 0.0) throw ParameterError("louvain: resolution must be positive");
  if (options.restarts < 1) throw ParameterError("louvain: restarts must be >= 1");
  // A fixed visit order makes every run identical.
  const int runs = options.visit_order.empty() ? options.restarts : 1;
  Partition best = louvain_once(g, rng, options);
  double best_q = modularity(g, best, options.resolution);
  for (int r = 1; r < runs; ++r) {
    Partition p = louvain_once(g, rng, options);
    double q = modularity(g, p, options.resolution);
    if (q > best_q) {
      best_q = q;
      best = std::move(p);
    }
  }
  return best;
}

}  // namespace sola
