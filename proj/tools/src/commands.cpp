#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "sola/cli.hpp"
#include "sola/error.hpp"

namespace sola::cli {
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

nlohmann::json stats_json(const Dataset& ds, const PartitionSpec& spec, const PartitionStats& s) {
  nlohmann::json j = {{"dataset", ds.name},
                      {"graphs", ds.size()},
                      {"algorithm", to_string(spec.algo)},
                      {"seed", spec.seed},
                      {"avg_nodes", s.avg_nodes},
                      {"avg_subgraphs", s.avg_subgraphs}};
  if (spec.algo == PartitionAlgo::kGirvanNewman) j["gn_target"] = to_string(spec.gn.target);
  return j;
}

// Reuses a compatible cache at `path`, otherwise partitions. The cache is
// rewritten either way so that it carries the current run id.
std::vector<Partition> cached_partitions(const Dataset& ds, const PartitionSpec& spec,
                                         const fs::path& path, const std::string& run_id) {
  std::vector<Partition> parts;
  if (fs::exists(path)) {
    try {
      parts = partitions_from_json(ds, spec, read_json(path));
    } catch (const CompatibilityError&) {
      // Stale cache from another dataset or spec; rebuild below.
    }
  }
  if (parts.empty()) parts = partition_dataset(ds, spec);
  nlohmann::json doc = partitions_to_json(ds, spec, parts);
  doc["run_id"] = run_id;
  write_json(path, doc);
  return parts;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IngestionError*>(&e)) return kIngestion;
  if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const DivergenceError*>(&e)) return kDivergence;
  if (dynamic_cast<const CompatibilityError*>(&e)) return kCompatibility;
  return kFailure;
}

fs::path resolve_dataset_path(const std::string& spec) {
  fs::path p(spec);
  if (p.is_absolute() || fs::exists(p)) return p;
  if (const char* root = std::getenv("SOLA_DATA_ROOT"); root != nullptr && *root != '\0') {
    return fs::path(root) / p;
  }
  return p;
}

Dataset open_dataset(const DatasetSource& source) {
  if (source.spec.rfind("synthetic:", 0) == 0) {
    SyntheticKind kind;
    try {
      kind = parse_synthetic_kind(source.spec.substr(10));
    } catch (const ParameterError& e) {
      throw ConfigError("dataset", e.what());
    }
    Dataset ds = make_synthetic(kind, source.synthetic_graphs, source.synthetic_nodes,
                                source.synthetic_seed);
    if (source.features == FeatureMode::kDegreeOneHot) {
      throw ConfigError("features", "degree features apply to TUDataset directories only");
    }
    return ds;
  }
  return load_tudataset(resolve_dataset_path(source.spec), LoadOptions{source.features});
}

nlohmann::json cmd_partition(const DatasetSource& source, const PartitionSpec& spec,
                             const fs::path& out) {
  Dataset ds = open_dataset(source);
  fs::create_directories(out);
  std::vector<Partition> parts = partition_dataset(ds, spec);
  write_json(out / "partitions.json", partitions_to_json(ds, spec, parts));
  nlohmann::json stats = stats_json(ds, spec, partition_stats(ds, parts));
  write_json(out / "stats.json", stats);
  return stats;
}

TrainOutcome cmd_train(const RunConfig& config, const std::string& config_path, bool dry_run,
                       std::ostream& log) {
  config.validate();
  TrainOutcome outcome;
  outcome.manifest = RunManifest::make("train", config_path, config);
  Dataset ds = open_dataset(config.dataset);
  if (config.train.regime == Regime::kSemiSupervised) {
    // Fail before partitioning when the labeled subset cannot cover a class.
    Rng probe(config.train.seed);
    stratified_subset(ds.labels(), config.train.label_fraction, probe);
  }
  const PartitionSpec& spec = config.train.partition;
  if (dry_run) {
    outcome.partition = partition_stats(ds, partition_dataset(ds, spec));
    log << "dry run: " << ds.size() << " graphs, avg " << std::fixed << std::setprecision(2)
        << outcome.partition.avg_subgraphs << " subgraphs per graph, config " << outcome.manifest.hash
        << '\n';
    return outcome;
  }

  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  write_json(dir / "manifest.json", outcome.manifest.to_json());
  std::vector<Partition> parts = cached_partitions(ds, spec, dir / "partitions.json", outcome.manifest.hash);
  outcome.partition = partition_stats(ds, parts);

  TrainHooks hooks;
  hooks.out_dir = dir;
  hooks.run_id = outcome.manifest.hash;
  const int epochs = config.train.epochs;
  hooks.on_epoch = [&log, epochs](const EpochRecord& e) {
    log << "epoch " << e.epoch + 1 << '/' << epochs << "  total " << std::fixed << std::setprecision(4)
        << e.loss_total << "  cl " << e.loss_cl << "  sim " << e.loss_sim;
    if (e.loss_cls != 0.0) log << "  cls " << e.loss_cls;
    log << "  (" << std::setprecision(2) << e.seconds << "s)\n";
  };
  TrainResult result = config.train.regime == Regime::kUnsupervised
                           ? train_unsupervised(ds, parts, config.train, hooks)
                           : train_semisupervised(ds, parts, config.train, hooks);
  outcome.report = std::move(result.report);
  return outcome;
}

nlohmann::json cmd_export_importance(const fs::path& checkpoint, const DatasetSource& source) {
  nlohmann::json doc = read_json(checkpoint);
  Dataset ds = open_dataset(source);
  LoadedCheckpoint ck = checkpoint_from_json(doc, ds.feature_dim);
  std::vector<Partition> parts = partition_dataset(ds, ck.config.partition);
  nlohmann::json graphs = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    nlohmann::json g = {{"graph", i}, {"num_nodes", ds.graphs[i].num_nodes()}};
    if (auto y = ds.graphs[i].label()) g["label"] = *y;
    g["assignment"] = parts[i].assignment;
    nlohmann::json gens = nlohmann::json::array();
    for (int k = 0; k < 2; ++k) {
      gens.push_back(importance_to_json(ck.model->generator(k).importance(ds.graphs[i], parts[i])));
    }
    g["generators"] = std::move(gens);
    graphs.push_back(std::move(g));
  }
  return {{"format", "sola.importance"},
          {"version", 1},
          {"config_hash", ck.config.hash()},
          {"dataset", ds.name},
          {"graphs", std::move(graphs)}};
}

nlohmann::json cmd_synth(SyntheticKind kind, int graphs, int nodes, std::uint64_t seed,
                         const fs::path& out) {
  Dataset ds = make_synthetic(kind, graphs, nodes, seed);
  save_tudataset(ds, out);
  return ds.manifest();
}

}  // namespace sola::cli
