#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "sola/error.hpp"
#include "sola/trainer.hpp"

using namespace sola;
using ad::Tensor;
using ad::Value;

namespace {

TrainConfig tiny_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = 2;
  c.batch_size = 4;
  c.encoder.layers = 1;
  c.encoder.hidden = 6;
  c.encoder.projection_dim = 4;
  c.probe_folds = 4;
  c.probe_max_iter = 50;
  c.finetune_epochs = 2;
  return c;
}

struct Corpus {
  Dataset ds;
  std::vector<Partition> parts;
};

Corpus corpus(int graphs, int nodes, std::uint64_t seed = 3) {
  Corpus c;
  c.ds = make_synthetic(SyntheticKind::kMotifVsRandom, graphs, nodes, seed);
  c.parts = partition_dataset(c.ds, PartitionSpec{});
  return c;
}

std::vector<double> flat_params(const ad::ParameterStore& store) {
  std::vector<double> out;
  for (const auto& p : store.parameters())
    for (double v : p.value.data().values()) out.push_back(v);
  return out;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Tensor p{{1.0, -2.0}, {0.5, 3.0}};
  const Tensor before = p;
  Tensor m(2, 2), v(2, 2);
  for (int t = 1; t <= 5; ++t) adam_update(p, Tensor(2, 2), m, v, t, AdamOptions{});
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], before[i]);
}

TEST(Adam, FirstStepClosedForm) {
  AdamOptions o;
  o.lr = 0.01;
  Tensor g{{0.3, -2.0, 1e-3}};
  Tensor p(1, 3), m(1, 3), v(1, 3);
  adam_update(p, g, m, v, 1, o);
  for (std::size_t i = 0; i < 3; ++i) {
    // m_hat = g and v_hat = g^2 after bias correction.
    const double expected = -o.lr * g[i] / (std::abs(g[i]) + o.eps);
    EXPECT_NEAR(p[i], expected, 1e-15);
    EXPECT_NEAR(p[i], -o.lr * (g[i] > 0 ? 1.0 : -1.0), 1e-4 * o.lr);
  }
}

TEST(Adam, StateRoundTripsThroughJson) {
  ad::ParameterStore store;
  Rng rng(1);
  nn::Linear lin(store, "lin", 3, 2, rng);
  Adam opt(store, AdamOptions{});
  for (int s = 0; s < 3; ++s) {
    store.zero_grad();
    ad::sum(lin(Value::constant(Tensor{{1.0, 2.0, -1.0}}))).backward();
    opt.step();
  }
  Adam copy(store, AdamOptions{});
  copy.load_state_json(opt.state_to_json());
  EXPECT_EQ(copy.steps(), 3);
  EXPECT_EQ(copy.state_to_json(), opt.state_to_json());

  ad::ParameterStore other;
  nn::Linear small(other, "lin", 2, 2, rng);
  Adam mismatched(other, AdamOptions{});
  EXPECT_THROW(mismatched.load_state_json(opt.state_to_json()), CompatibilityError);
}

TEST(Config, SetAndKeys) {
  TrainConfig c;
  c.set("lr", "0.01");
  c.set("regime", "semi-supervised");
  c.set("standardize", "true");
  c.set("partition_algo", "girvan-newman");
  EXPECT_DOUBLE_EQ(c.adam.lr, 0.01);
  EXPECT_EQ(c.regime, Regime::kSemiSupervised);
  EXPECT_TRUE(c.encoder.standardize);
  EXPECT_EQ(c.partition.algo, PartitionAlgo::kGirvanNewman);
  std::vector<std::string> keys = TrainConfig::keys();
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), keys.size());
  EXPECT_EQ(c.to_json().size(), keys.size());
}

TEST(Config, UnknownKeyNamesTheKey) {
  TrainConfig c;
  try {
    c.set("lrr", "0.1");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "lrr");
  }
  try {
    c.set("epochs", "ten");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "epochs");
  }
  EXPECT_THROW(c.set("epochs", "10x"), ConfigError);
}

TEST(Config, ValidateNamesFirstBadField) {
  TrainConfig c;
  c.tau_ntxent = 0.0;
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "tau_ntxent");
  }
  TrainConfig d;
  d.label_fraction = 1.5;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Config, JsonRoundTripAndHash) {
  TrainConfig c = tiny_config(9);
  c.set("gn_target", "k-components");
  TrainConfig back = train_config_from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  back.adam.lr *= 2.0;
  EXPECT_NE(back.hash(), c.hash());
  EXPECT_EQ(sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
}

TEST(Stratify, SubsetRatiosAreExact) {
  std::vector<int> labels;
  for (int i = 0; i < 70; ++i) labels.push_back(i < 50 ? 0 : 1);
  Rng rng(2);
  std::vector<int> sub = stratified_subset(labels, 0.1, rng);
  int ones = 0;
  for (int i : sub) ones += labels[i];
  EXPECT_EQ(sub.size(), 7u);
  EXPECT_EQ(ones, 2);
  EXPECT_TRUE(std::is_sorted(sub.begin(), sub.end()));
  std::vector<int> tiny{0, 0, 0, 1};
  EXPECT_THROW(stratified_subset(tiny, 0.1, rng), StratificationError);
}

TEST(Stratify, FoldsPartitionAndBalance) {
  std::vector<int> labels;
  for (int i = 0; i < 53; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
  Rng rng(4);
  auto folds = stratified_folds(labels, 5, rng);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen(labels.size(), 0);
  std::size_t lo = labels.size(), hi = 0;
  for (const auto& f : folds) {
    for (int i : f) ++seen[i];
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
    int ones = 0;
    for (int i : f) ones += labels[i];
    EXPECT_NEAR(ones, 18.0 / 5.0, 1.0);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_LE(hi - lo, 1u);
  EXPECT_THROW(stratified_folds(labels, 1, rng), ParameterError);
}

TEST(Probe, SeparableDataIsLearned) {
  Rng rng(5);
  Tensor x(120, 3);
  std::vector<int> y(120);
  for (std::size_t i = 0; i < 120; ++i) {
    y[i] = static_cast<int>(i % 3);
    for (std::size_t c = 0; c < 3; ++c) x(i, c) = rng.uniform() * 0.5 + (static_cast<int>(c) == y[i] ? 2.0 : 0.0);
  }
  EvalResult r = linear_probe(x, y, 3, 5, 1);
  EXPECT_GE(r.mean, 0.99);
  EXPECT_EQ(r.folds.size(), 5u);
}

TEST(Probe, ShuffledLabelsGiveChance) {
  Rng rng(6);
  Tensor x(200, 4);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = static_cast<int>(i % 2);
  rng.shuffle(y);
  EvalResult r = linear_probe(x, y, 2, 10, 3);
  EXPECT_NEAR(r.mean, 0.5, 0.1);
}

TEST(Probe, RandomEncoderIsNearChance) {
  Corpus c = corpus(200, 20, 0);
  TrainConfig cfg;
  SolaModel model(cfg, c.ds.feature_dim, 2);
  EvalResult r = linear_probe(graph_embeddings(model.encoder(), c.ds), c.ds.labels(), 2, 10, 1);
  EXPECT_NEAR(r.mean, 0.5, 0.1);
}

TEST(Train, ZeroEpochsGiveEmptyHistory) {
  Corpus c = corpus(16, 10);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  TrainResult r = train_unsupervised(c.ds, c.parts, cfg);
  EXPECT_TRUE(r.report.epochs.empty());
  ASSERT_TRUE(r.report.eval.has_value());
  EXPECT_EQ(r.report.config_hash, cfg.hash());
}

TEST(Train, SameSeedSameReportHash) {
  Corpus c = corpus(16, 10);
  TrainConfig cfg = tiny_config(11);
  TrainResult a = train_unsupervised(c.ds, c.parts, cfg);
  TrainResult b = train_unsupervised(c.ds, c.parts, cfg);
  EXPECT_EQ(a.report.hash(), b.report.hash());
  EXPECT_EQ(flat_params(a.model->store()), flat_params(b.model->store()));
  cfg.seed = 12;
  TrainResult other = train_unsupervised(c.ds, c.parts, cfg);
  EXPECT_NE(other.report.hash(), a.report.hash());
}

TEST(Train, ParametersStayFiniteAndHeadsReceiveGradient) {
  Corpus c = corpus(24, 12);
  TrainConfig cfg = tiny_config(2);
  cfg.epochs = 3;
  std::vector<EpochRecord> seen;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) { seen.push_back(r); };
  hooks.skip_eval = true;
  TrainResult r = train_unsupervised(c.ds, c.parts, cfg, hooks);
  ASSERT_EQ(seen.size(), 3u);
  for (double v : flat_params(r.model->store())) EXPECT_TRUE(std::isfinite(v));
  for (const EpochRecord& e : seen) {
    EXPECT_TRUE(std::isfinite(e.loss_total));
    EXPECT_NEAR(e.loss_total, e.loss_cl + cfg.weights.sim * e.loss_sim, 1e-9);
    for (int h = 0; h < kNumStrategies; ++h) EXPECT_GT(e.head_grad[h], 0.0) << "epoch " << e.epoch << " slot " << h;
  }
  EXPECT_FALSE(r.report.eval.has_value());
}

TEST(Train, DivergenceIsReported) {
  Corpus c = corpus(16, 10);
  TrainConfig cfg = tiny_config();
  // cos / tau overflows to infinity on the first batch.
  cfg.tau_ntxent = 1e-320;
  EXPECT_THROW(train_unsupervised(c.ds, c.parts, cfg), DivergenceError);
}

TEST(Train, PartitionCountMismatchIsContractError) {
  Corpus c = corpus(16, 10);
  std::vector<Partition> fewer(c.parts.begin(), c.parts.end() - 1);
  EXPECT_THROW(train_unsupervised(c.ds, fewer, tiny_config()), ContractError);
}

TEST(Train, ArtifactsAreWritten) {
  Corpus c = corpus(16, 10);
  auto dir = std::filesystem::temp_directory_path() / "sola_test_trainer_artifacts";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  TrainHooks hooks;
  hooks.out_dir = dir;
  TrainConfig cfg = tiny_config();
  TrainResult r = train_unsupervised(c.ds, c.parts, cfg, hooks);
  ASSERT_TRUE(std::filesystem::exists(dir / "report.json"));
  ASSERT_TRUE(std::filesystem::exists(dir / "checkpoint.json"));
  std::ifstream csv(dir / "metrics.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, cfg.epochs + 1);
  std::ifstream rep(dir / "report.json");
  nlohmann::json doc = nlohmann::json::parse(rep);
  EXPECT_EQ(doc["config_hash"], cfg.hash());
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RoundTripRestoresEmbeddings) {
  Corpus c = corpus(16, 10);
  TrainConfig cfg = tiny_config(4);
  TrainResult r = train_unsupervised(c.ds, c.parts, cfg);
  nlohmann::json doc = checkpoint_to_json(*r.model, cfg, nullptr);
  LoadedCheckpoint back = checkpoint_from_json(nlohmann::json::parse(doc.dump()), c.ds.feature_dim);
  EXPECT_EQ(back.config.hash(), cfg.hash());
  Tensor a = graph_embeddings(r.model->encoder(), c.ds);
  Tensor b = graph_embeddings(back.model->encoder(), c.ds);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_THROW(checkpoint_from_json(doc, c.ds.feature_dim + 1), CompatibilityError);
  nlohmann::json broken = doc;
  broken["format"] = "something-else";
  EXPECT_THROW(checkpoint_from_json(broken), CompatibilityError);
}

TEST(Semi, FullLabelsEvaluatesOnLabeledSet) {
  Corpus c = corpus(16, 10);
  TrainConfig cfg = tiny_config(5);
  cfg.regime = Regime::kSemiSupervised;
  cfg.label_fraction = 1.0;
  TrainResult r = train_semisupervised(c.ds, c.parts, cfg);
  ASSERT_TRUE(r.report.eval.has_value());
  EXPECT_GE(r.report.eval->mean, 0.0);
  EXPECT_LE(r.report.eval->mean, 1.0);
  EXPECT_EQ(r.report.finetune_losses.size(), static_cast<std::size_t>(cfg.finetune_epochs));
  for (const EpochRecord& e : r.report.epochs) EXPECT_GT(e.loss_cls, 0.0);
}

TEST(Semi, ZeroPretrainIsBaseline) {
  Corpus c = corpus(20, 10);
  TrainConfig cfg = tiny_config(6);
  cfg.regime = Regime::kSemiSupervised;
  cfg.label_fraction = 0.5;
  cfg.epochs = 0;
  TrainResult r = train_semisupervised(c.ds, c.parts, cfg);
  EXPECT_TRUE(r.report.epochs.empty());
  EXPECT_FALSE(r.report.finetune_losses.empty());
  ASSERT_TRUE(r.report.eval.has_value());
}

TEST(RunReport, TimingFreeJsonIgnoresSeconds) {
  RunReport a;
  a.epochs.push_back(EpochRecord{});
  RunReport b = a;
  b.epochs[0].seconds = 12.5;
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.to_json(true), b.to_json(true));
}
