#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "sola/dataset.hpp"
#include "sola/error.hpp"

namespace sola {
namespace fs = std::filesystem;
namespace {

struct LineReader {
  fs::path path;
  std::ifstream in;
  std::size_t line_no = 0;
  std::string line;

  explicit LineReader(fs::path p) : path(std::move(p)), in(path) {
    if (!in) throw IngestionError("cannot open " + path.filename().string());
  }

  // Next non-empty line, trimmed.
  bool next() {
    while (std::getline(in, line)) {
      ++line_no;
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      auto last = line.find_last_not_of(" \t\r");
      line = line.substr(first, last - first + 1);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IngestionError(path.filename().string() + ":" + std::to_string(line_no) + ": " + what);
  }

  std::vector<std::string> fields() const {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string f = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      auto a = f.find_first_not_of(" \t");
      auto b = f.find_last_not_of(" \t");
      out.push_back(a == std::string::npos ? std::string() : f.substr(a, b - a + 1));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }

  long long to_int(const std::string& s) const {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("expected an integer, got '" + s + "'");
    return v;
  }

  double to_double(const std::string& s) const {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) fail("expected a number, got '" + s + "'");
    return v;
  }
};

std::string detect_prefix(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IngestionError("not a directory: " + dir.string());
  std::vector<std::string> prefixes;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    const std::string suffix = "_A.txt";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      prefixes.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  if (prefixes.empty()) {
    throw IngestionError("missing DS_A.txt in " + dir.string());
  }
  if (prefixes.size() > 1) {
    std::sort(prefixes.begin(), prefixes.end());
    throw IngestionError("several datasets in " + dir.string() + " (" + prefixes[0] + ", " +
                         prefixes[1] + ", ...)");
  }
  return prefixes.front();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_tudataset(const fs::path& dir, const LoadOptions& options) {
  const std::string ds = detect_prefix(dir);
  auto file = [&](const std::string& suffix) { return dir / (ds + "_" + suffix + ".txt"); };

  const fs::path indicator_path = file("graph_indicator");
  if (!fs::exists(indicator_path)) {
    throw IngestionError("missing mandatory file " + indicator_path.filename().string());
  }

  // Node -> graph assignment.
  std::vector<int> graph_of;
  int num_graphs = 0;
  {
    LineReader r(indicator_path);
    while (r.next()) {
      long long g = r.to_int(r.fields().at(0));
      if (g < 1) r.fail("graph id must be >= 1");
      graph_of.push_back(static_cast<int>(g - 1));
      num_graphs = std::max(num_graphs, static_cast<int>(g));
    }
  }
  const std::size_t total_nodes = graph_of.size();
  std::vector<int> local(total_nodes);
  std::vector<int> counts(static_cast<std::size_t>(num_graphs), 0);
  for (std::size_t v = 0; v < total_nodes; ++v) local[v] = counts[graph_of[v]]++;
  for (int g = 0; g < num_graphs; ++g) {
    if (counts[g] == 0) {
      throw IngestionError("graph " + std::to_string(g + 1) + " has zero nodes");
    }
  }

  std::vector<std::vector<std::pair<int, int>>> pairs(static_cast<std::size_t>(num_graphs));
  {
    LineReader r(file("A"));
    while (r.next()) {
      auto f = r.fields();
      if (f.size() < 2) r.fail("expected 'u, v'");
      long long a = r.to_int(f[0]), b = r.to_int(f[1]);
      if (a < 1 || b < 1 || a > static_cast<long long>(total_nodes) ||
          b > static_cast<long long>(total_nodes)) {
        r.fail("node index out of range [1, " + std::to_string(total_nodes) + "]");
      }
      int ga = graph_of[a - 1], gb = graph_of[b - 1];
      if (ga != gb) r.fail("edge joins nodes of different graphs");
      pairs[ga].emplace_back(local[a - 1], local[b - 1]);
    }
  }

  std::vector<std::optional<int>> labels(static_cast<std::size_t>(num_graphs));
  int num_classes = 0;
  if (fs::exists(file("graph_labels"))) {
    LineReader r(file("graph_labels"));
    std::vector<long long> raw;
    while (r.next()) raw.push_back(r.to_int(r.fields().at(0)));
    if (raw.size() != static_cast<std::size_t>(num_graphs)) {
      throw IngestionError(file("graph_labels").filename().string() + ": " +
                           std::to_string(raw.size()) + " labels for " +
                           std::to_string(num_graphs) + " graphs");
    }
    std::set<long long> distinct(raw.begin(), raw.end());
    std::map<long long, int> remap;
    for (long long v : distinct) remap.emplace(v, static_cast<int>(remap.size()));
    for (std::size_t g = 0; g < raw.size(); ++g) labels[g] = remap.at(raw[g]);
    num_classes = static_cast<int>(remap.size());
  }

  // Feature matrix over all nodes.
  std::vector<std::vector<double>> node_rows(total_nodes);
  int feature_dim = 0;
  const bool has_attributes = fs::exists(file("node_attributes"));
  const bool has_node_labels = fs::exists(file("node_labels"));
  if (has_attributes) {
    LineReader r(file("node_attributes"));
    std::size_t v = 0;
    while (r.next()) {
      if (v >= total_nodes) r.fail("more attribute rows than nodes");
      for (const auto& f : r.fields()) node_rows[v].push_back(r.to_double(f));
      if (v == 0) feature_dim = static_cast<int>(node_rows[0].size());
      if (static_cast<int>(node_rows[v].size()) != feature_dim) r.fail("ragged attribute row");
      ++v;
    }
    if (v != total_nodes) {
      throw IngestionError(file("node_attributes").filename().string() + ": " +
                           std::to_string(v) + " rows for " + std::to_string(total_nodes) +
                           " nodes");
    }
  } else if (has_node_labels && options.features == FeatureMode::kAuto) {
    LineReader r(file("node_labels"));
    std::vector<long long> raw;
    while (r.next()) raw.push_back(r.to_int(r.fields().at(0)));
    if (raw.size() != total_nodes) {
      throw IngestionError(file("node_labels").filename().string() + ": " +
                           std::to_string(raw.size()) + " labels for " +
                           std::to_string(total_nodes) + " nodes");
    }
    std::set<long long> distinct(raw.begin(), raw.end());
    std::map<long long, int> remap;
    for (long long v : distinct) remap.emplace(v, static_cast<int>(remap.size()));
    feature_dim = static_cast<int>(remap.size());
    for (std::size_t v = 0; v < total_nodes; ++v) {
      node_rows[v].assign(static_cast<std::size_t>(feature_dim), 0.0);
      node_rows[v][remap.at(raw[v])] = 1.0;
    }
  }

  Dataset out;
  out.name = ds;
  out.num_classes = num_classes;
  out.graphs.reserve(static_cast<std::size_t>(num_graphs));

  // Features are rebuilt per graph once edges are known (degree mode needs them).
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_graphs));
  for (std::size_t v = 0; v < total_nodes; ++v) members[graph_of[v]].push_back(v);

  const bool use_rows = has_attributes || (has_node_labels && options.features == FeatureMode::kAuto);
  std::vector<Graph> skeletons;
  skeletons.reserve(static_cast<std::size_t>(num_graphs));
  int max_degree = 0;
  for (int g = 0; g < num_graphs; ++g) {
    const int n = counts[g];
    ad::Tensor x(static_cast<std::size_t>(n), use_rows ? static_cast<std::size_t>(feature_dim) : 1,
                 use_rows ? 0.0 : 1.0);
    if (use_rows) {
      for (std::size_t i = 0; i < members[g].size(); ++i) {
        const auto& row = node_rows[members[g][i]];
        std::copy(row.begin(), row.end(), x.row_span(i).begin());
      }
    }
    skeletons.push_back(Graph::from_pairs(n, std::move(x), pairs[g], labels[g]));
    for (int v = 0; v < n; ++v) max_degree = std::max(max_degree, skeletons.back().degree(v));
  }

  if (use_rows) {
    out.feature_dim = feature_dim;
    out.graphs = std::move(skeletons);
  } else if (options.features == FeatureMode::kDegreeOneHot) {
    out.feature_dim = max_degree + 1;
    for (const Graph& s : skeletons) {
      ad::Tensor x(static_cast<std::size_t>(s.num_nodes()), static_cast<std::size_t>(max_degree + 1));
      for (int v = 0; v < s.num_nodes(); ++v) x(v, s.degree(v)) = 1.0;
      out.graphs.push_back(s.with_features(std::move(x)));
    }
  } else {
    out.feature_dim = 1;
    out.graphs = std::move(skeletons);
  }
  out.validate();
  return out;
}

void save_tudataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string p = ds.name.empty() ? "DS" : ds.name;
  std::ofstream a(dir / (p + "_A.txt"));
  std::ofstream ind(dir / (p + "_graph_indicator.txt"));
  std::ofstream attr(dir / (p + "_node_attributes.txt"));
  if (!a || !ind || !attr) throw Error("cannot write dataset into " + dir.string());
  bool labeled = !ds.graphs.empty() &&
                 std::all_of(ds.graphs.begin(), ds.graphs.end(),
                             [](const Graph& g) { return g.label().has_value(); });
  std::ofstream lab;
  if (labeled) lab.open(dir / (p + "_graph_labels.txt"));

  long long offset = 0;
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    for (int v = 0; v < g.num_nodes(); ++v) {
      ind << gi + 1 << '\n';
      auto row = g.features().row_span(static_cast<std::size_t>(v));
      for (std::size_t j = 0; j < row.size(); ++j) attr << (j ? ", " : "") << format_double(row[j]);
      attr << '\n';
    }
    for (const Edge& e : g.edges()) {
      a << offset + e.u + 1 << ", " << offset + e.v + 1 << '\n';
      a << offset + e.v + 1 << ", " << offset + e.u + 1 << '\n';
    }
    if (labeled) lab << *g.label() << '\n';
    offset += g.num_nodes();
  }
}

}  // namespace sola
