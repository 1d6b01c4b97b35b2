#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sola/losses.hpp"
#include "sola/partition.hpp"
#include "sola/viewgen.hpp"

namespace sola {

// ---------------------------------------------------------------------------
// Optimizer

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update of a single tensor; `t` is the 1-based step count.
void adam_update(ad::Tensor& param, const ad::Tensor& grad, ad::Tensor& m, ad::Tensor& v, int t,
                 const AdamOptions& o);

/// Adam with bias correction over every parameter of a store. Parameters
/// without a gradient are treated as having gradient 0.
class Adam {
 public:
  Adam() = default;
  Adam(const ad::ParameterStore& store, const AdamOptions& options);

  void step();
  int steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return opt_; }

  /// {"t", "m": [...], "v": [...]} in store order.
  nlohmann::json state_to_json() const;
  void load_state_json(const nlohmann::json& doc);

 private:
  const ad::ParameterStore* store_ = nullptr;
  AdamOptions opt_;
  int t_ = 0;
  std::vector<ad::Tensor> m_, v_;
};

// ---------------------------------------------------------------------------
// Configuration

enum class Regime { kUnsupervised, kSemiSupervised };

Regime parse_regime(const std::string& s);
std::string to_string(Regime r);

struct TrainConfig {
  Regime regime = Regime::kUnsupervised;
  int epochs = 100;
  int batch_size = 8;
  AdamOptions adam;
  double tau_gumbel = 1.0;
  /// Linear anneal target for the Gumbel temperature; equal to tau_gumbel
  /// means constant.
  double tau_gumbel_final = 1.0;
  double tau_ntxent = 0.2;
  LossWeights weights;
  std::uint64_t seed = 0;
  PartitionSpec partition;
  GinConfig encoder;
  double neg_ratio = 1.0;
  /// See ViewGenConfig::identity_prior; 2.2 starts near 10% perturbation.
  double identity_prior = 2.2;
  bool share_encoder = false;

  // Semi-supervised.
  double label_fraction = 0.1;
  int finetune_epochs = 50;

  // Linear probe.
  int probe_folds = 10;
  double probe_l2 = 1e-3;
  int probe_max_iter = 500;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Sets one field from its text form; unknown keys and unparsable values
  /// throw ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Every key accepted by set(), in canonical order.
  static std::vector<std::string> keys();
  nlohmann::json to_json() const;
  /// SHA-1 of the canonical JSON form.
  std::string hash() const;
};

// ---------------------------------------------------------------------------
// Model

/// Contrastive encoder, two view generators and (semi-supervised) a linear
/// classifier over the pre-projection graph embedding, all in one store.
class SolaModel {
 public:
  SolaModel(const TrainConfig& config, int input_dim, int num_classes);
  SolaModel(const SolaModel&) = delete;
  SolaModel& operator=(const SolaModel&) = delete;

  ad::ParameterStore& store() { return store_; }
  const ad::ParameterStore& store() const { return store_; }
  const GinEncoder& encoder() const { return encoder_; }
  const ViewGenerator& generator(int i) const { return i == 0 ? gen1_ : gen2_; }
  const nn::Linear& classifier() const { return classifier_; }
  int input_dim() const { return input_dim_; }
  int num_classes() const { return num_classes_; }

 private:
  ad::ParameterStore store_;
  int input_dim_;
  int num_classes_;
  GinEncoder encoder_;
  ViewGenerator gen1_, gen2_;
  nn::Linear classifier_;
};

/// Pre-projection graph embeddings of every graph, one row each.
ad::Tensor graph_embeddings(const GinEncoder& encoder, const Dataset& ds, int batch_size = 64);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> folds;
};

/// Per class, the shuffled members dealt round-robin into k folds (test
/// index sets, sorted). Throws ParameterError unless 2 <= k <= n.
std::vector<std::vector<int>> stratified_folds(std::span<const int> labels, int k, Rng& rng);

/// round(fraction * class size) members of every class, sorted. Throws
/// StratificationError when a class would get none.
std::vector<int> stratified_subset(std::span<const int> labels, double fraction, Rng& rng);

/// Multinomial logistic regression with L2 penalty, fitted by BFGS on
/// training-fold standardized features.
class LogisticRegression {
 public:
  void fit(const ad::Tensor& x, std::span<const int> y, int num_classes, double l2, int max_iter);
  std::vector<int> predict(const ad::Tensor& x) const;

 private:
  int classes_ = 0;
  std::vector<double> mean_, scale_;
  ad::Tensor w_;  // (d + 1) × C, last row is the bias
};

/// k-fold cross-validated accuracy of a logistic probe. A fold whose
/// training part has a single class triggers a refold with the next seed.
EvalResult linear_probe(const ad::Tensor& embeddings, std::span<const int> labels, int num_classes,
                        int folds, std::uint64_t seed, double l2 = 1e-3, int max_iter = 500);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_cl = 0.0;
  double loss_sim = 0.0;
  double loss_cls = 0.0;
  double seconds = 0.0;
  /// Largest absolute gradient seen this epoch for the selector and the four
  /// augmentation heads (both generators), in Strategy column order with the
  /// selector last.
  std::array<double, kNumStrategies> head_grad{};
};

/// Index of the selector in EpochRecord::head_grad (the swap slot; swap has
/// no head of its own).
inline constexpr int kSelectorSlot = static_cast<int>(Strategy::kSubgraphSwap);

struct RunReport {
  nlohmann::json config;
  std::string config_hash;
  PartitionStats partition;
  std::vector<EpochRecord> epochs;
  std::vector<double> finetune_losses;
  std::optional<EvalResult> eval;

  /// Timing fields are dropped when `timing` is false.
  nlohmann::json to_json(bool timing = true) const;
  /// SHA-1 of the timing-free JSON.
  std::string hash() const;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// When set: metrics.csv, report.json and checkpoint.json are written here.
  std::optional<std::filesystem::path> out_dir;
  /// Skip the linear probe at the end of unsupervised training.
  bool skip_eval = false;
  /// Written into every artifact under out_dir when non-empty.
  std::string run_id;
};

struct TrainResult {
  std::unique_ptr<SolaModel> model;
  RunReport report;
};

/// Joint Adam updates of the encoder and both generators on
/// lambda_cl * nt_xent + lambda_sim * similarity; then a linear probe.
TrainResult train_unsupervised(const Dataset& ds, std::span<const Partition> partitions,
                               const TrainConfig& config, const TrainHooks& hooks = {});

/// Stage 1 adds lambda_cls * classification on the labeled graphs of each
/// batch; stage 2 fine-tunes encoder and classifier on the labeled subset.
/// eval = accuracy on the unlabeled remainder (on the labeled set when the
/// fraction is 1). With config.epochs == 0 this is the no-pretrain baseline.
TrainResult train_semisupervised(const Dataset& ds, std::span<const Partition> partitions,
                                 const TrainConfig& config, const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Persistence

/// {"format": "sola.checkpoint", "version": 1, "config", "config_hash",
///  "input_dim", "num_classes", "params", "optimizer"}
nlohmann::json checkpoint_to_json(const SolaModel& model, const TrainConfig& config,
                                  const Adam* optimizer);

struct LoadedCheckpoint {
  TrainConfig config;
  std::unique_ptr<SolaModel> model;
};

/// Rebuilds the model; throws CompatibilityError on a malformed document or
/// when `input_dim` (if given) differs from the stored width.
LoadedCheckpoint checkpoint_from_json(const nlohmann::json& doc,
                                      std::optional<int> input_dim = std::nullopt);

TrainConfig train_config_from_json(const nlohmann::json& doc);

std::string sha1_hex(std::string_view data);

}  // namespace sola
