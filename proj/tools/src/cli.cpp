#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "sola/cli.hpp"
#include "sola/error.hpp"

namespace sola::cli {
namespace {

struct DatasetFlags {
  std::string features = "auto";
  int graphs = 200;
  int nodes = 20;
  std::uint64_t seed = 0;

  void attach(CLI::App& cmd) {
    cmd.add_option("--features", features, "auto, constant or degree")->capture_default_str();
    cmd.add_option("--synthetic-graphs", graphs, "graph count for synthetic:<kind>")
        ->capture_default_str();
    cmd.add_option("--synthetic-nodes", nodes, "nodes per synthetic graph")->capture_default_str();
    cmd.add_option("--synthetic-seed", seed, "seed of the synthetic corpus")->capture_default_str();
  }

  DatasetSource source(const std::string& spec) const {
    DatasetSource s;
    s.spec = spec;
    try {
      s.features = parse_feature_mode(features);
    } catch (const ParameterError& e) {
      throw ConfigError("features", e.what());
    }
    s.synthetic_graphs = graphs;
    s.synthetic_nodes = nodes;
    s.synthetic_seed = seed;
    return s;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subgraph-oriented learnable augmentation for graph contrastive learning"};
  app.name("sola");
  app.require_subcommand(1);

  // partition
  std::string part_dataset, part_algo = "louvain", part_target = "max-modularity", part_out;
  std::uint64_t part_seed = 0;
  int part_k = 2;
  DatasetFlags part_flags;
  CLI::App* partition = app.add_subcommand("partition", "Partition every graph and report statistics");
  partition->add_option("dataset", part_dataset, "TUDataset directory or synthetic:<kind>")->required();
  partition->add_option("--algo", part_algo, "louvain or gn")->capture_default_str();
  partition->add_option("--seed", part_seed, "partition seed")->capture_default_str();
  partition->add_option("--gn-target", part_target, "max-modularity, k-components or first-split")
      ->capture_default_str();
  partition->add_option("--gn-k", part_k, "component count for --gn-target k-components")
      ->capture_default_str();
  partition->add_option("--out", part_out, "output directory")->required();
  part_flags.attach(*partition);

  // train
  std::string train_config;
  bool dry_run = false, print_defaults = false;
  std::vector<std::string> overrides;
  CLI::App* train = app.add_subcommand("train", "Pre-train (and evaluate) from a run config file");
  train->add_option("config", train_config, "flat key = value run config");
  train->add_flag("--dry-run", dry_run, "validate the config and partition without training");
  train->add_flag("--print-defaults", print_defaults, "print every key with its default and exit");
  train->add_option("--set", overrides, "override one key, as key=value (repeatable)");

  // export-importance
  std::string exp_checkpoint, exp_dataset, exp_out;
  DatasetFlags exp_flags;
  CLI::App* exporter =
      app.add_subcommand("export-importance", "Export subgraph keep and strategy probabilities");
  exporter->add_option("checkpoint", exp_checkpoint, "checkpoint.json from a training run")->required();
  exporter->add_option("dataset", exp_dataset, "TUDataset directory or synthetic:<kind>")->required();
  exporter->add_option("--out", exp_out, "output JSON file (default: stdout)");
  exp_flags.attach(*exporter);

  // synth
  std::string synth_kind = "motif-vs-random", synth_out;
  int synth_graphs = 200, synth_nodes = 20;
  std::uint64_t synth_seed = 0;
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic corpus in TUDataset layout");
  synth->add_option("--kind", synth_kind, "motif-vs-random or cycles-vs-paths")->capture_default_str();
  synth->add_option("--graphs", synth_graphs, "graph count (even)")->capture_default_str();
  synth->add_option("--nodes", synth_nodes, "nodes per graph")->capture_default_str();
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  // info
  std::string info_dataset;
  DatasetFlags info_flags;
  CLI::App* info = app.add_subcommand("info", "Print a dataset manifest");
  info->add_option("dataset", info_dataset, "TUDataset directory or synthetic:<kind>")->required();
  info_flags.attach(*info);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*partition) {
      PartitionSpec spec;
      try {
        spec.algo = parse_partition_algo(part_algo);
      } catch (const ParameterError& e) {
        throw ConfigError("algo", e.what());
      }
      try {
        spec.gn.target = parse_gn_target(part_target);
      } catch (const ParameterError& e) {
        throw ConfigError("gn-target", e.what());
      }
      spec.seed = part_seed;
      spec.gn.k = part_k;
      out << cmd_partition(part_flags.source(part_dataset), spec, part_out).dump(2) << '\n';
    } else if (*train) {
      if (print_defaults) {
        out << RunConfig{}.to_text();
        return kOk;
      }
      if (train_config.empty()) throw ConfigError("", "train needs a config file (or --print-defaults)");
      RunConfig cfg = RunConfig::load(train_config);
      for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      TrainOutcome o = cmd_train(cfg, train_config, dry_run, err);
      if (o.report && o.report->eval) {
        out << "accuracy " << std::fixed << std::setprecision(4) << o.report->eval->mean << " +- "
            << o.report->eval->std << "  run " << o.manifest.hash << "  -> " << cfg.output_dir << '\n';
      } else if (o.report) {
        out << "done  run " << o.manifest.hash << "  -> " << cfg.output_dir << '\n';
      }
    } else if (*exporter) {
      nlohmann::json doc = cmd_export_importance(exp_checkpoint, exp_flags.source(exp_dataset));
      if (exp_out.empty()) {
        out << doc.dump(2) << '\n';
      } else {
        std::ofstream f(exp_out);
        if (!f) throw Error("cannot write " + exp_out);
        f << doc.dump(2) << '\n';
      }
    } else if (*synth) {
      SyntheticKind kind;
      try {
        kind = parse_synthetic_kind(synth_kind);
      } catch (const ParameterError& e) {
        throw ConfigError("kind", e.what());
      }
      out << cmd_synth(kind, synth_graphs, synth_nodes, synth_seed, synth_out).dump(2) << '\n';
    } else if (*info) {
      out << open_dataset(info_flags.source(info_dataset)).manifest().dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace sola::cli
