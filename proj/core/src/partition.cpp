#include "sola/partition.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <unordered_map>

#include "sola/error.hpp"

namespace sola {

Partition Partition::from_assignment(const Graph& g, std::span<const int> assignment) {
  if (assignment.size() != static_cast<std::size_t>(g.num_nodes())) {
    throw ContractError("partition: " + std::to_string(assignment.size()) + " ids for " +
                        std::to_string(g.num_nodes()) + " nodes");
  }
  Partition p;
  p.assignment.resize(assignment.size());
  std::unordered_map<int, int> relabel;
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    auto [it, inserted] = relabel.emplace(assignment[v], static_cast<int>(relabel.size()));
    p.assignment[v] = it->second;
  }
  p.k = static_cast<int>(relabel.size());
  p.members.assign(static_cast<std::size_t>(p.k), {});
  p.intra_edges.assign(static_cast<std::size_t>(p.k), {});
  for (int v = 0; v < g.num_nodes(); ++v) p.members[p.assignment[v]].push_back(v);
  const auto& edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    int a = p.assignment[edges[e].u], b = p.assignment[edges[e].v];
    if (a == b)
      p.intra_edges[a].push_back(static_cast<int>(e));
    else
      p.inter_edges.push_back(static_cast<int>(e));
  }
  return p;
}

double modularity(const Graph& g, std::span<const int> assignment, double resolution) {
  if (assignment.size() != static_cast<std::size_t>(g.num_nodes())) {
    throw ContractError("modularity: assignment size does not match node count");
  }
  const double m = static_cast<double>(g.num_edges());
  if (m == 0.0) return 0.0;
  std::unordered_map<int, double> intra, degree;
  for (const Edge& e : g.edges()) {
    if (assignment[e.u] == assignment[e.v]) intra[assignment[e.u]] += 1.0;
  }
  for (int v = 0; v < g.num_nodes(); ++v) degree[assignment[v]] += g.degree(v);
  // Accumulate in community-id order so the sum is independent of hashing.
  std::vector<int> ids;
  ids.reserve(degree.size());
  for (const auto& [c, d] : degree) ids.push_back(c);
  std::sort(ids.begin(), ids.end());
  double q = 0.0;
  for (int c : ids) {
    double d = degree[c] / (2.0 * m);
    auto it = intra.find(c);
    double e = it == intra.end() ? 0.0 : it->second;
    q += e / m - resolution * d * d;
  }
  return q;
}

Partition split_disconnected(const Graph& g, const Partition& p) {
  const int n = g.num_nodes();
  std::vector<int> piece(static_cast<std::size_t>(n), -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (piece[s] >= 0) continue;
    piece[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : g.neighbors(v)) {
        if (piece[w] < 0 && p.assignment[w] == p.assignment[v]) {
          piece[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return Partition::from_assignment(g, piece);
}

GnTarget parse_gn_target(const std::string& s) {
  if (s == "max-modularity") return GnTarget::kMaxModularity;
  if (s == "k-components") return GnTarget::kComponents;
  if (s == "first-split") return GnTarget::kFirstSplit;
  throw ParameterError("unknown Girvan-Newman target '" + s +
                       "' (max-modularity, k-components, first-split)");
}

std::string to_string(GnTarget t) {
  switch (t) {
    case GnTarget::kMaxModularity: return "max-modularity";
    case GnTarget::kComponents: return "k-components";
    case GnTarget::kFirstSplit: return "first-split";
  }
  return "max-modularity";
}

PartitionAlgo parse_partition_algo(const std::string& s) {
  if (s == "louvain") return PartitionAlgo::kLouvain;
  if (s == "gn" || s == "girvan-newman") return PartitionAlgo::kGirvanNewman;
  throw ParameterError("unknown partition algorithm '" + s + "' (louvain, gn)");
}

std::string to_string(PartitionAlgo a) { return a == PartitionAlgo::kLouvain ? "louvain" : "gn"; }

namespace {

Partition partition_one(const Graph& g, const PartitionSpec& spec, std::size_t index) {
  if (spec.algo == PartitionAlgo::kGirvanNewman) return girvan_newman(g, spec.gn);
  Rng rng = Rng(spec.seed).split({static_cast<std::uint64_t>(index)});
  return louvain(g, rng, spec.louvain);
}

}  // namespace

std::vector<Partition> partition_dataset(const Dataset& ds, const PartitionSpec& spec,
                                         int threads) {
  std::vector<Partition> out(ds.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || ds.size() < 2) {
    for (std::size_t i = 0; i < ds.size(); ++i) out[i] = partition_one(ds.graphs[i], spec, i);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < ds.size(); i += workers) {
        out[i] = partition_one(ds.graphs[i], spec, i);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

PartitionStats partition_stats(const Dataset& ds, std::span<const Partition> partitions) {
  if (partitions.size() != ds.size()) throw ContractError("one partition per graph required");
  PartitionStats s;
  s.avg_nodes = ds.avg_nodes();
  if (partitions.empty()) return s;
  double total = 0.0;
  for (const Partition& p : partitions) total += p.k;
  s.avg_subgraphs = total / static_cast<double>(partitions.size());
  return s;
}

PartitionStats partition_stats(const Dataset& ds, const PartitionSpec& spec) {
  auto parts = partition_dataset(ds, spec);
  return partition_stats(ds, parts);
}

namespace {

// FNV-1a over node counts and edge lists; partitions depend on nothing else.
std::string structure_fingerprint(const Dataset& ds) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const Graph& g : ds.graphs) {
    mix(static_cast<std::uint64_t>(g.num_nodes()));
    mix(g.num_edges());
    for (const Edge& e : g.edges()) mix((static_cast<std::uint64_t>(e.u) << 32) | static_cast<std::uint32_t>(e.v));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

nlohmann::json partitions_to_json(const Dataset& ds, const PartitionSpec& spec,
                                  std::span<const Partition> partitions) {
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    list.push_back({{"graph", i}, {"k", partitions[i].k}, {"assignment", partitions[i].assignment}});
  }
  nlohmann::json doc = {{"format", "sola.partitions"},
                        {"version", 1},
                        {"dataset", ds.name},
                        {"num_graphs", ds.size()},
                        {"structure", structure_fingerprint(ds)},
                        {"algorithm", to_string(spec.algo)},
                        {"seed", spec.seed},
                        {"partitions", std::move(list)}};
  if (spec.algo == PartitionAlgo::kGirvanNewman) {
    doc["gn_target"] = to_string(spec.gn.target);
    doc["gn_k"] = spec.gn.k;
  } else {
    doc["resolution"] = spec.louvain.resolution;
    doc["restarts"] = spec.louvain.restarts;
    doc["min_gain"] = spec.louvain.min_gain;
  }
  return doc;
}

std::vector<Partition> partitions_from_json(const Dataset& ds, const PartitionSpec& spec,
                                            const nlohmann::json& doc) {
  if (doc.value("format", "") != "sola.partitions" || doc.value("version", 0) != 1) {
    throw CompatibilityError("not a sola.partitions v1 document");
  }
  if (doc.at("algorithm").get<std::string>() != to_string(spec.algo) ||
      doc.at("seed").get<std::uint64_t>() != spec.seed ||
      doc.at("num_graphs").get<std::size_t>() != ds.size() ||
      doc.value("structure", "") != structure_fingerprint(ds)) {
    throw CompatibilityError("partition cache was built for a different dataset/algorithm/seed");
  }
  if (spec.algo == PartitionAlgo::kGirvanNewman &&
      (doc.at("gn_target").get<std::string>() != to_string(spec.gn.target) ||
       doc.at("gn_k").get<int>() != spec.gn.k)) {
    throw CompatibilityError("partition cache was built with different Girvan-Newman settings");
  }
  if (spec.algo == PartitionAlgo::kLouvain &&
      (doc.value("resolution", -1.0) != spec.louvain.resolution ||
       doc.value("restarts", -1) != spec.louvain.restarts ||
       doc.value("min_gain", -1.0) != spec.louvain.min_gain)) {
    throw CompatibilityError("partition cache was built with different Louvain settings");
  }
  std::vector<Partition> out(ds.size());
  for (const auto& entry : doc.at("partitions")) {
    std::size_t i = entry.at("graph").get<std::size_t>();
    if (i >= ds.size()) throw CompatibilityError("partition cache references graph out of range");
    auto a = entry.at("assignment").get<std::vector<int>>();
    if (a.size() != static_cast<std::size_t>(ds.graphs[i].num_nodes())) {
      throw CompatibilityError("partition cache node count mismatch at graph " +
                               std::to_string(i));
    }
    out[i] = Partition::from_assignment(ds.graphs[i], a);
  }
  return out;
}

}  // namespace sola
