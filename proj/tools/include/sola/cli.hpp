#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sola/trainer.hpp"

namespace sola::cli {

/// Process exit codes; stable across releases.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kIngestion = 2,
  kConfig = 3,
  kDivergence = 4,
  kCompatibility = 5,
};

int exit_code_for(const std::exception& e);

/// Where a dataset comes from: "synthetic:<kind>" or a TUDataset directory.
/// Relative directories that do not exist from the working directory are
/// looked up under $SOLA_DATA_ROOT.
struct DatasetSource {
  std::string spec = "synthetic:motif-vs-random";
  FeatureMode features = FeatureMode::kAuto;
  int synthetic_graphs = 200;
  int synthetic_nodes = 20;
  std::uint64_t synthetic_seed = 0;
};

std::filesystem::path resolve_dataset_path(const std::string& spec);
Dataset open_dataset(const DatasetSource& source);

/// Training keys plus the run-level keys dataset, features,
/// synthetic_graphs, synthetic_nodes, synthetic_seed and output_dir.
struct RunConfig {
  TrainConfig train;
  DatasetSource dataset;
  std::string output_dir = "sola-run";

  void set(const std::string& key, const std::string& value);
  void validate() const;
  static std::vector<std::string> keys();
  /// Canonical "key = value" text, one line per key; parse(to_text()) is
  /// the identity.
  std::string to_text() const;
  /// Flat key = value document: '#' starts a comment, values may be
  /// double-quoted, every key at most once. Throws ConfigError naming the key
  /// (or "line N" for malformed lines).
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

/// Git-style blob hash: sha1("blob <size>\0" + text).
std::string git_blob_hash(const std::string& text);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string dataset;
  std::string output_dir;
  std::uint64_t seed = 0;
  /// git_blob_hash of the canonical config text.
  std::string hash;

  static RunManifest make(const std::string& command, const std::string& config_path,
                          const RunConfig& config);
  nlohmann::json to_json() const;
};

/// Writes partitions.json and stats.json under `out`; returns the stats.
nlohmann::json cmd_partition(const DatasetSource& source, const PartitionSpec& spec,
                             const std::filesystem::path& out);

struct TrainOutcome {
  RunManifest manifest;
  PartitionStats partition;
  std::optional<RunReport> report;  // empty on a dry run
};

/// Partitions, trains the configured regime and writes manifest.json,
/// partitions.json, metrics.csv, report.json and checkpoint.json under the
/// output directory. A dry run validates and partitions only, writing nothing.
TrainOutcome cmd_train(const RunConfig& config, const std::string& config_path, bool dry_run,
                       std::ostream& log);

/// Subgraph keep probabilities and strategy distributions of both
/// generators for every graph. Throws CompatibilityError when the checkpoint
/// does not fit the dataset's feature width.
nlohmann::json cmd_export_importance(const std::filesystem::path& checkpoint,
                                     const DatasetSource& source);

/// Writes a synthetic corpus in the TUDataset layout; returns its manifest.
nlohmann::json cmd_synth(SyntheticKind kind, int graphs, int nodes, std::uint64_t seed,
                         const std::filesystem::path& out);

/// Parses argv and runs one subcommand; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sola::cli
