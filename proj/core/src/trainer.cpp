#include "sola/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "sola/error.hpp"

namespace sola {

using ad::Tensor;
using ad::Value;

namespace {

// RNG stream ids under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kViewStream = 3;
constexpr std::uint64_t kLabelStream = 4;
constexpr std::uint64_t kProbeStream = 5;
constexpr std::uint64_t kFinetuneStream = 6;

}  // namespace

SolaModel::SolaModel(const TrainConfig& config, int input_dim, int num_classes)
    : input_dim_(input_dim), num_classes_(num_classes) {
  if (input_dim < 1) throw ContractError("model input width must be >= 1");
  if (num_classes < 2) throw ContractError("model needs at least two classes");
  Rng rng = Rng(config.seed).split({kInitStream});
  GinConfig enc = config.encoder;
  enc.input_dim = input_dim;
  encoder_ = GinEncoder(store_, "encoder", enc, rng);
  ViewGenConfig vg;
  vg.neg_ratio = config.neg_ratio;
  vg.identity_prior = config.identity_prior;
  vg.encoder = enc;
  const GinEncoder* shared = config.share_encoder ? &encoder_ : nullptr;
  gen1_ = ViewGenerator(store_, "gen1", vg, rng, shared);
  gen2_ = ViewGenerator(store_, "gen2", vg, rng, shared);
  classifier_ = nn::Linear(store_, "classifier", static_cast<std::size_t>(enc.hidden),
                           static_cast<std::size_t>(num_classes), rng);
}

Tensor graph_embeddings(const GinEncoder& encoder, const Dataset& ds, int batch_size) {
  const auto h = static_cast<std::size_t>(encoder.config().hidden);
  Tensor out(ds.size(), h);
  for (std::size_t start = 0; start < ds.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<int> idx;
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) {
      idx.push_back(static_cast<int>(i));
    }
    Value g = encoder.forward(EncoderInput::from_batch(make_batch(ds, idx))).graph;
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < h; ++c) out(start + r, c) = g(r, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

nlohmann::json RunReport::to_json(bool timing) const {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json j = {{"epoch", e.epoch},
                        {"loss_total", e.loss_total},
                        {"loss_cl", e.loss_cl},
                        {"loss_sim", e.loss_sim},
                        {"loss_cls", e.loss_cls},
                        {"head_grad",
                         {{"node_drop", e.head_grad[0]},
                          {"feature_mask", e.head_grad[1]},
                          {"intra_edge", e.head_grad[2]},
                          {"inter_edge", e.head_grad[3]},
                          {"selector", e.head_grad[kSelectorSlot]}}}};
    if (timing) j["seconds"] = e.seconds;
    ep.push_back(std::move(j));
  }
  nlohmann::json j = {{"format", "sola.report"},
                      {"version", 1},
                      {"config", config},
                      {"config_hash", config_hash},
                      {"partition",
                       {{"avg_nodes", partition.avg_nodes}, {"avg_subgraphs", partition.avg_subgraphs}}},
                      {"epochs", ep},
                      {"finetune_losses", finetune_losses}};
  if (eval) j["eval"] = {{"mean", eval->mean}, {"std", eval->std}, {"folds", eval->folds}};
  if (timing && !epochs.empty()) {
    double total = 0.0;
    for (const auto& e : epochs) total += e.seconds;
    j["mean_epoch_seconds"] = total / static_cast<double>(epochs.size());
  }
  return j;
}

std::string RunReport::hash() const { return sha1_hex(to_json(false).dump()); }

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json checkpoint_to_json(const SolaModel& model, const TrainConfig& config,
                                  const Adam* optimizer) {
  nlohmann::json j = {{"format", "sola.checkpoint"},
                      {"version", 1},
                      {"config", config.to_json()},
                      {"config_hash", config.hash()},
                      {"input_dim", model.input_dim()},
                      {"num_classes", model.num_classes()},
                      {"params", model.store().to_json()}};
  if (optimizer) j["optimizer"] = optimizer->state_to_json();
  return j;
}

LoadedCheckpoint checkpoint_from_json(const nlohmann::json& doc, std::optional<int> input_dim) {
  if (!doc.is_object() || doc.value("format", "") != "sola.checkpoint") {
    throw CompatibilityError("not a sola.checkpoint document");
  }
  if (doc.value("version", 0) != 1) throw CompatibilityError("unsupported checkpoint version");
  LoadedCheckpoint out;
  int stored_dim = 0, classes = 0;
  try {
    out.config = train_config_from_json(doc.at("config"));
    stored_dim = doc.at("input_dim").get<int>();
    classes = doc.at("num_classes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw CompatibilityError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CompatibilityError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (input_dim && *input_dim != stored_dim) {
    throw CompatibilityError("checkpoint expects node feature width " + std::to_string(stored_dim) +
                             ", dataset has " + std::to_string(*input_dim));
  }
  out.model = std::make_unique<SolaModel>(out.config, stored_dim, classes);
  out.model->store().load_json(doc.at("params"));
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

bool all_finite(const ad::ParameterStore& store) {
  for (const auto& p : store.parameters())
    for (double v : p.value.data().values())
      if (!std::isfinite(v)) return false;
  return true;
}

double max_abs_grad(const nn::Linear& l) {
  double m = 0.0;
  for (const Value* v : {&l.weight(), &l.bias()}) {
    if (!v->has_grad()) continue;
    for (double g : v->grad().values()) m = std::max(m, std::abs(g));
  }
  return m;
}

void audit_heads(const SolaModel& model, std::array<double, kNumStrategies>& out) {
  for (int i = 0; i < 2; ++i) {
    const ViewGenerator& g = model.generator(i);
    const nn::Linear* heads[kNumStrategies] = {&g.drop_head(), &g.mask_head(), &g.intra_head(),
                                               &g.inter_head(), &g.selector()};
    for (int h = 0; h < kNumStrategies; ++h) out[h] = std::max(out[h], max_abs_grad(*heads[h]));
  }
}

double gumbel_tau(const TrainConfig& c, int epoch) {
  if (c.epochs <= 1) return c.tau_gumbel;
  const double f = static_cast<double>(epoch) / static_cast<double>(c.epochs - 1);
  return c.tau_gumbel + (c.tau_gumbel_final - c.tau_gumbel) * f;
}

class MetricsSink {
 public:
  explicit MetricsSink(const TrainHooks& hooks) : run_id_(hooks.run_id) {
    if (!hooks.out_dir) return;
    const auto path = *hooks.out_dir / "metrics.csv";
    std::filesystem::create_directories(*hooks.out_dir);
    out_.open(path);
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "epoch,loss_total,loss_cl,loss_sim,loss_cls,seconds";
    if (!run_id_.empty()) out_ << ",run_id";
    out_ << '\n';
  }
  void write(const EpochRecord& e) {
    if (!out_.is_open()) return;
    out_.precision(17);
    out_ << e.epoch << ',' << e.loss_total << ',' << e.loss_cl << ',' << e.loss_sim << ','
         << e.loss_cls << ',' << e.seconds;
    if (!run_id_.empty()) out_ << ',' << run_id_;
    out_ << '\n';
    out_.flush();
  }

 private:
  std::string run_id_;
  std::ofstream out_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct Session {
  const Dataset& ds;
  std::span<const Partition> parts;
  const TrainConfig& cfg;
  SolaModel& model;
  Rng run;
  std::vector<int> labels;
  std::vector<bool> labeled;  // empty: no classification term
};

struct StepLoss {
  double total = 0.0, cl = 0.0, sim = 0.0, cls = 0.0;
};

StepLoss pretrain_step(Session& s, Adam& opt, const Batch& batch, double tau, std::uint64_t epoch,
                       std::uint64_t index, std::array<double, kNumStrategies>& audit) {
  std::vector<const Partition*> parts;
  for (int i : batch.indices) parts.push_back(&s.parts[static_cast<std::size_t>(i)]);
  GenerateOptions opts;
  opts.tau = tau;
  Rng r1 = s.run.split({kViewStream, epoch, index, 0});
  Rng r2 = s.run.split({kViewStream, epoch, index, 1});
  auto v1 = s.model.generator(0).generate(batch, parts, r1, opts);
  auto v2 = s.model.generator(1).generate(batch, parts, r2, opts);
  Embeddings e1 = s.model.encoder().forward(views_to_input(v1));
  Embeddings e2 = s.model.encoder().forward(views_to_input(v2));
  const int m = static_cast<int>(batch.size());
  std::vector<int> order;
  for (int k = 0; k < m; ++k) {
    order.push_back(k);
    order.push_back(m + k);
  }
  Value z = ad::gather_rows(ad::concat({e1.projected, e2.projected}, 0), order);
  Value cl = nt_xent(z, s.cfg.tau_ntxent);
  Value sim = similarity_loss(v1, v2);
  std::optional<Value> cls;
  if (!s.labeled.empty()) {
    std::vector<int> rows, y;
    for (int k = 0; k < m; ++k) {
      if (s.labeled[batch.indices[k]]) {
        rows.push_back(k);
        y.push_back(s.labels[batch.indices[k]]);
      }
    }
    if (!rows.empty()) {
      Value orig = s.model.encoder().forward(EncoderInput::from_batch(batch)).graph;
      const nn::Linear& head = s.model.classifier();
      cls = classification_loss(head(ad::gather_rows(orig, rows)), head(ad::gather_rows(e1.graph, rows)),
                                head(ad::gather_rows(e2.graph, rows)), y);
    }
  }
  LossBundle b = LossBundle::combine(cl, sim, cls, s.cfg.weights);
  StepLoss out{b.total.item(), cl.item(), sim.item(), cls ? cls->item() : 0.0};
  if (!std::isfinite(out.total)) {
    throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(index) + " (cl=" + std::to_string(out.cl) +
                          ", sim=" + std::to_string(out.sim) + ")");
  }
  s.model.store().zero_grad();
  b.total.backward();
  audit_heads(s.model, audit);
  opt.step();
  if (!all_finite(s.model.store())) {
    throw DivergenceError("non-finite parameter after step at epoch " + std::to_string(epoch));
  }
  return out;
}

void pretrain(Session& s, Adam& opt, RunReport& report, const TrainHooks& hooks, MetricsSink& sink) {
  for (int epoch = 0; epoch < s.cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng order = s.run.split({kBatchStream, static_cast<std::uint64_t>(epoch)});
    auto batches = epoch_batches(s.ds, s.cfg.batch_size, order);
    EpochRecord rec;
    rec.epoch = epoch;
    const double tau = gumbel_tau(s.cfg, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      StepLoss l;
      try {
        l = pretrain_step(s, opt, batches[b], tau, static_cast<std::uint64_t>(epoch), b, rec.head_grad);
      } catch (const NonFiniteError& e) {
        throw DivergenceError("non-finite activations at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b) + ": " + e.what());
      }
      rec.loss_total += l.total;
      rec.loss_cl += l.cl;
      rec.loss_sim += l.sim;
      rec.loss_cls += l.cls;
    }
    const double n = std::max<std::size_t>(batches.size(), 1);
    rec.loss_total /= n;
    rec.loss_cl /= n;
    rec.loss_sim /= n;
    rec.loss_cls /= n;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);
    sink.write(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
}

Session open_session(const Dataset& ds, std::span<const Partition> parts, const TrainConfig& cfg,
                     SolaModel& model) {
  cfg.validate();
  ds.validate();
  if (parts.size() != ds.size()) {
    throw ContractError("training needs one partition per graph (" + std::to_string(parts.size()) +
                        " for " + std::to_string(ds.size()) + ")");
  }
  return Session{ds, parts, cfg, model, Rng(cfg.seed), ds.labels(), {}};
}

RunReport new_report(const Dataset& ds, std::span<const Partition> parts, const TrainConfig& cfg) {
  RunReport r;
  r.config = cfg.to_json();
  r.config_hash = cfg.hash();
  r.partition = partition_stats(ds, parts);
  return r;
}

void finish(const TrainHooks& hooks, const TrainResult& result, const TrainConfig& cfg, const Adam& opt) {
  if (!hooks.out_dir) return;
  nlohmann::json report = result.report.to_json();
  report["report_hash"] = result.report.hash();
  nlohmann::json checkpoint = checkpoint_to_json(*result.model, cfg, &opt);
  if (!hooks.run_id.empty()) report["run_id"] = checkpoint["run_id"] = hooks.run_id;
  write_json(*hooks.out_dir / "report.json", report);
  write_json(*hooks.out_dir / "checkpoint.json", checkpoint);
}

}  // namespace

TrainResult train_unsupervised(const Dataset& ds, std::span<const Partition> partitions,
                               const TrainConfig& config, const TrainHooks& hooks) {
  TrainResult result;
  result.model = std::make_unique<SolaModel>(config, ds.feature_dim, std::max(ds.num_classes, 2));
  Session s = open_session(ds, partitions, config, *result.model);
  result.report = new_report(ds, partitions, config);
  Adam opt(result.model->store(), config.adam);
  MetricsSink sink(hooks);
  pretrain(s, opt, result.report, hooks, sink);
  if (!hooks.skip_eval) {
    Tensor emb = graph_embeddings(result.model->encoder(), ds);
    result.report.eval = linear_probe(emb, s.labels, ds.num_classes, config.probe_folds,
                                      Rng(config.seed).split({kProbeStream}).next_u64(),
                                      config.probe_l2, config.probe_max_iter);
  }
  finish(hooks, result, config, opt);
  return result;
}

TrainResult train_semisupervised(const Dataset& ds, std::span<const Partition> partitions,
                                 const TrainConfig& config, const TrainHooks& hooks) {
  TrainResult result;
  result.model = std::make_unique<SolaModel>(config, ds.feature_dim, std::max(ds.num_classes, 2));
  Session s = open_session(ds, partitions, config, *result.model);
  result.report = new_report(ds, partitions, config);
  Rng label_rng = s.run.split({kLabelStream});
  const std::vector<int> labeled = stratified_subset(s.labels, config.label_fraction, label_rng);
  s.labeled.assign(ds.size(), false);
  for (int i : labeled) s.labeled[i] = true;

  Adam opt(result.model->store(), config.adam);
  MetricsSink sink(hooks);
  pretrain(s, opt, result.report, hooks, sink);

  // Fine-tune encoder and classifier on the labeled graphs only. A fresh
  // optimizer leaves the generators (which get no gradient here) untouched.
  Adam fine(result.model->store(), config.adam);
  const GinEncoder& enc = result.model->encoder();
  const nn::Linear& head = result.model->classifier();
  for (int epoch = 0; epoch < config.finetune_epochs; ++epoch) {
    std::vector<int> order = labeled;
    Rng r = s.run.split({kFinetuneStream, static_cast<std::uint64_t>(epoch)});
    r.shuffle(order);
    double total = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(
                                               std::min(order.size(), start + config.batch_size)));
      std::vector<int> y;
      for (int i : idx) y.push_back(s.labels[i]);
      Value loss;
      try {
        loss = cross_entropy(head(enc.forward(EncoderInput::from_batch(make_batch(ds, idx))).graph), y);
      } catch (const NonFiniteError& e) {
        throw DivergenceError("non-finite fine-tuning activations at epoch " + std::to_string(epoch) +
                              ": " + e.what());
      }
      if (!std::isfinite(loss.item())) {
        throw DivergenceError("non-finite fine-tuning loss at epoch " + std::to_string(epoch));
      }
      result.model->store().zero_grad();
      loss.backward();
      fine.step();
      total += loss.item();
      ++steps;
    }
    result.report.finetune_losses.push_back(total / std::max(steps, 1));
  }

  std::vector<int> test;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!s.labeled[i]) test.push_back(static_cast<int>(i));
  if (test.empty()) test = labeled;
  Dataset held = ds.subset(test);
  Tensor emb = graph_embeddings(enc, held);
  Tensor logits = head(Value::constant(emb)).data();
  int hit = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    hit += static_cast<int>(best) == s.labels[test[i]];
  }
  EvalResult ev;
  ev.mean = static_cast<double>(hit) / static_cast<double>(test.size());
  ev.folds = {ev.mean};
  result.report.eval = ev;
  finish(hooks, result, config, fine);
  return result;
}

}  // namespace sola
