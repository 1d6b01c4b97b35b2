#include <algorithm>
#include <cmath>

#include "sola/error.hpp"
#include "sola/partition.hpp"

namespace sola {
namespace {

// Adjacency with edge ids so removed edges can be skipped cheaply.
struct EdgeAdjacency {
  std::vector<std::vector<std::pair<int, int>>> out;  // (neighbour, edge index)

  explicit EdgeAdjacency(const Graph& g) : out(static_cast<std::size_t>(g.num_nodes())) {
    const auto& edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      out[edges[e].u].emplace_back(edges[e].v, static_cast<int>(e));
      out[edges[e].v].emplace_back(edges[e].u, static_cast<int>(e));
    }
    for (auto& row : out) std::sort(row.begin(), row.end());
  }
};

// Brandes single-source accumulation; adds half the pair dependency to every
// edge so summing over all sources counts each unordered pair once.
class Brandes {
 public:
  explicit Brandes(int n)
      : sigma_(static_cast<std::size_t>(n)), delta_(static_cast<std::size_t>(n)),
        dist_(static_cast<std::size_t>(n), -1) {}

  void accumulate(const EdgeAdjacency& adj, std::span<const std::uint8_t> removed, int s,
                  std::vector<double>& score) {
    stack_.clear();
    queue_.clear();
    sigma_[s] = 1.0;
    dist_[s] = 0;
    queue_.push_back(s);
    for (std::size_t head = 0; head < queue_.size(); ++head) {
      int v = queue_[head];
      stack_.push_back(v);
      for (auto [w, e] : adj.out[v]) {
        if (removed[e]) continue;
        if (dist_[w] < 0) {
          dist_[w] = dist_[v] + 1;
          sigma_[w] = 0.0;
          delta_[w] = 0.0;
          queue_.push_back(w);
        }
        if (dist_[w] == dist_[v] + 1) sigma_[w] += sigma_[v];
      }
    }
    delta_[s] = 0.0;
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
      int w = *it;
      for (auto [v, e] : adj.out[w]) {
        if (removed[e] || dist_[v] != dist_[w] - 1) continue;
        double c = sigma_[v] / sigma_[w] * (1.0 + delta_[w]);
        score[e] += 0.5 * c;
        delta_[v] += c;
      }
    }
    for (int v : stack_) dist_[v] = -1;
  }

 private:
  std::vector<double> sigma_, delta_;
  std::vector<int> dist_;
  std::vector<int> stack_, queue_;
};

std::vector<int> reachable(const EdgeAdjacency& adj, std::span<const std::uint8_t> removed,
                           std::initializer_list<int> seeds, std::vector<std::uint8_t>& mark) {
  std::vector<int> out;
  for (int s : seeds) {
    if (mark[s]) continue;
    mark[s] = 1;
    out.push_back(s);
    for (std::size_t head = out.size() - 1; head < out.size(); ++head) {
      for (auto [w, e] : adj.out[out[head]]) {
        if (removed[e] || mark[w]) continue;
        mark[w] = 1;
        out.push_back(w);
      }
    }
  }
  for (int v : out) mark[v] = 0;
  return out;
}

std::vector<int> component_ids(const EdgeAdjacency& adj, std::span<const std::uint8_t> removed,
                               int& count) {
  const std::size_t n = adj.out.size();
  std::vector<int> comp(n, -1);
  count = 0;
  std::vector<int> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    queue.assign(1, static_cast<int>(s));
    comp[s] = count;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (auto [w, e] : adj.out[queue[head]]) {
        if (removed[e] || comp[w] >= 0) continue;
        comp[w] = count;
        queue.push_back(w);
      }
    }
    ++count;
  }
  return comp;
}

// Highest score, ties (within rounding) resolved to the lowest edge index.
int argmax_edge(const std::vector<double>& score, std::span<const std::uint8_t> removed) {
  int best = -1;
  for (std::size_t e = 0; e < score.size(); ++e) {
    if (removed[e]) continue;
    if (best < 0 || score[e] > score[best] + 1e-9 * std::max(1.0, std::abs(score[best]))) {
      best = static_cast<int>(e);
    }
  }
  return best;
}

}  // namespace

std::vector<double> edge_betweenness(const Graph& g, std::span<const std::uint8_t> removed) {
  const std::size_t m = g.edges().size();
  if (!removed.empty() && removed.size() != m) {
    throw ContractError("edge_betweenness: removal mask has " + std::to_string(removed.size()) +
                        " entries for " + std::to_string(m) + " edges");
  }
  std::vector<std::uint8_t> none;
  if (removed.empty()) {
    none.assign(m, 0);
    removed = none;
  }
  EdgeAdjacency adj(g);
  Brandes brandes(g.num_nodes());
  std::vector<double> score(m, 0.0);
  for (int s = 0; s < g.num_nodes(); ++s) brandes.accumulate(adj, removed, s, score);
  return score;
}

int girvan_newman_first_removal(const Graph& g) {
  if (g.num_edges() == 0) return -1;
  std::vector<std::uint8_t> removed(g.edges().size(), 0);
  return argmax_edge(edge_betweenness(g), removed);
}

Partition girvan_newman(const Graph& g, const GirvanNewmanOptions& options) {
  if (options.target == GnTarget::kComponents && options.k < 1) {
    throw ParameterError("girvan_newman: k must be >= 1");
  }
  const std::size_t m = g.edges().size();
  EdgeAdjacency adj(g);
  std::vector<std::uint8_t> removed(m, 0);
  int count = 0;
  std::vector<int> comp = component_ids(adj, removed, count);
  const int initial = count;

  auto done = [&](int c) {
    switch (options.target) {
      case GnTarget::kComponents: return c >= options.k;
      case GnTarget::kFirstSplit: return c > initial;
      case GnTarget::kMaxModularity: return false;
    }
    return false;
  };
  if (done(count) || m == 0) return Partition::from_assignment(g, comp);

  std::vector<int> best = comp;
  double best_q = modularity(g, comp);

  std::vector<double> score = edge_betweenness(g, removed);
  Brandes brandes(g.num_nodes());
  std::vector<std::uint8_t> mark(static_cast<std::size_t>(g.num_nodes()), 0);
  std::vector<std::uint8_t> in_comp(static_cast<std::size_t>(g.num_nodes()), 0);
  for (std::size_t step = 0; step < m; ++step) {
    int e = argmax_edge(score, removed);
    removed[e] = 1;
    score[e] = 0.0;
    const Edge& cut = g.edges()[e];

    // Only the component that contained the cut edge changes.
    std::vector<int> nodes = reachable(adj, removed, {cut.u, cut.v}, mark);
    for (int v : nodes) in_comp[v] = 1;
    for (std::size_t f = 0; f < m; ++f) {
      if (!removed[f] && in_comp[g.edges()[f].u]) score[f] = 0.0;
    }
    for (int v : nodes) brandes.accumulate(adj, removed, v, score);
    for (int v : nodes) in_comp[v] = 0;

    bool split = reachable(adj, removed, {cut.u}, mark).size() < nodes.size();
    if (!split) continue;
    comp = component_ids(adj, removed, count);
    if (done(count)) return Partition::from_assignment(g, comp);
    if (options.target == GnTarget::kMaxModularity) {
      double q = modularity(g, comp);
      if (q > best_q) {
        best_q = q;
        best = comp;
      }
    }
  }
  if (options.target == GnTarget::kMaxModularity) return Partition::from_assignment(g, best);
  return Partition::from_assignment(g, comp);
}

}  // namespace sola
