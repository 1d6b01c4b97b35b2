#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "sola/cli.hpp"
#include "sola/error.hpp"

namespace sola::cli {
namespace {

const std::vector<std::string> kRunKeys = {"dataset",         "features",       "synthetic_graphs",
                                           "synthetic_nodes", "synthetic_seed", "output_dir"};

template <typename T>
T parse_int(const std::string& key, const std::string& text) {
  T v{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ConfigError(key, "config key '" + key + "': cannot parse '" + text + "' as an integer");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string json_text(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string quote_if_needed(const std::string& v) {
  if (v.empty() || v.find_first_of("#\" \t") != std::string::npos || v != trim(v)) {
    return '"' + v + '"';
  }
  return v;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset") {
    if (value.empty()) throw ConfigError(key, "config key 'dataset': must not be empty");
    dataset.spec = value;
  } else if (key == "features") {
    try {
      dataset.features = parse_feature_mode(value);
    } catch (const ParameterError& e) {
      throw ConfigError(key, std::string("config key 'features': ") + e.what());
    }
  } else if (key == "synthetic_graphs") {
    dataset.synthetic_graphs = parse_int<int>(key, value);
  } else if (key == "synthetic_nodes") {
    dataset.synthetic_nodes = parse_int<int>(key, value);
  } else if (key == "synthetic_seed") {
    dataset.synthetic_seed = parse_int<std::uint64_t>(key, value);
  } else if (key == "output_dir") {
    if (value.empty()) throw ConfigError(key, "config key 'output_dir': must not be empty");
    output_dir = value;
  } else {
    train.set(key, value);
  }
}

void RunConfig::validate() const {
  train.validate();
  if (dataset.synthetic_graphs <= 0 || dataset.synthetic_graphs % 2 != 0) {
    throw ConfigError("synthetic_graphs", "config key 'synthetic_graphs': must be positive and even");
  }
  if (dataset.synthetic_nodes < 6) {
    throw ConfigError("synthetic_nodes", "config key 'synthetic_nodes': must be >= 6");
  }
  if (dataset.spec.rfind("synthetic:", 0) == 0) {
    try {
      parse_synthetic_kind(dataset.spec.substr(10));
    } catch (const ParameterError& e) {
      throw ConfigError("dataset", std::string("config key 'dataset': ") + e.what());
    }
  }
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out = kRunKeys;
  for (const auto& k : TrainConfig::keys()) out.push_back(k);
  return out;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "dataset = " << quote_if_needed(dataset.spec) << '\n'
      << "features = " << to_string(dataset.features) << '\n'
      << "synthetic_graphs = " << dataset.synthetic_graphs << '\n'
      << "synthetic_nodes = " << dataset.synthetic_nodes << '\n'
      << "synthetic_seed = " << dataset.synthetic_seed << '\n'
      << "output_dir = " << quote_if_needed(output_dir) << '\n';
  const nlohmann::json j = train.to_json();
  for (const auto& k : TrainConfig::keys()) out << k << " = " << json_text(j.at(k)) << '\n';
  return out.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no),
                        "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no),
                        "line " + std::to_string(line_no) + ": missing key");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!seen.insert(key).second) {
      throw ConfigError(key, "config key '" + key + "' given twice");
    }
    c.set(key, value);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string git_blob_hash(const std::string& text) {
  std::string blob = "blob " + std::to_string(text.size());
  blob.push_back('\0');
  blob += text;
  return sha1_hex(blob);
}

RunManifest RunManifest::make(const std::string& command, const std::string& config_path,
                              const RunConfig& config) {
  RunManifest m;
  m.command = command;
  m.config_path = config_path;
  m.dataset = config.dataset.spec;
  m.output_dir = config.output_dir;
  m.seed = config.train.seed;
  m.hash = git_blob_hash(config.to_text());
  return m;
}

nlohmann::json RunManifest::to_json() const {
  return {{"format", "sola.manifest"}, {"version", 1},         {"command", command},
          {"config_path", config_path}, {"dataset", dataset},   {"output_dir", output_dir},
          {"seed", seed},               {"hash", hash}};
}

}  // namespace sola::cli
