#include <benchmark/benchmark.h>

#include "sola/trainer.hpp"

using namespace sola;

namespace {

Dataset corpus(int graphs, int nodes) {
  return make_synthetic(SyntheticKind::kMotifVsRandom, graphs, nodes, 0);
}

std::int64_t total_edges(const Dataset& ds) {
  std::int64_t e = 0;
  for (const Graph& g : ds.graphs) e += static_cast<std::int64_t>(g.num_edges());
  return e;
}

void BM_Louvain(benchmark::State& state) {
  Dataset ds = corpus(32, static_cast<int>(state.range(0)));
  PartitionSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(partition_dataset(ds, spec));
  state.SetItemsProcessed(state.iterations() * total_edges(ds));
}
BENCHMARK(BM_Louvain)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_GirvanNewman(benchmark::State& state) {
  Dataset ds = corpus(8, static_cast<int>(state.range(0)));
  PartitionSpec spec;
  spec.algo = PartitionAlgo::kGirvanNewman;
  for (auto _ : state) benchmark::DoNotOptimize(partition_dataset(ds, spec));
  state.SetItemsProcessed(state.iterations() * total_edges(ds));
}
BENCHMARK(BM_GirvanNewman)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_EncoderForwardBackward(benchmark::State& state) {
  Dataset ds = corpus(8, static_cast<int>(state.range(0)));
  ad::ParameterStore store;
  GinConfig c;
  c.input_dim = ds.feature_dim;
  Rng rng(1);
  GinEncoder enc(store, "enc", c, rng);
  std::vector<int> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  EncoderInput in = EncoderInput::from_batch(make_batch(ds, all));
  for (auto _ : state) {
    store.zero_grad();
    ad::sum(enc.forward(in).projected).backward();
  }
  state.SetItemsProcessed(state.iterations() * total_edges(ds));
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMicrosecond);

void BM_GenerateView(benchmark::State& state) {
  Dataset ds = corpus(2, static_cast<int>(state.range(0)));
  Rng part_rng(3);
  Partition p = louvain(ds.graphs[0], part_rng);
  ad::ParameterStore store;
  ViewGenConfig c;
  c.encoder.input_dim = ds.feature_dim;
  c.identity_prior = 2.2;
  Rng rng(1);
  ViewGenerator gen(store, "gen", c, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gen.generate(ds.graphs[0], p, rng));
}
BENCHMARK(BM_GenerateView)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMicrosecond);

// One pre-training epoch; items are edges, so items/s should stay flat as
// graphs grow.
void BM_TrainEpoch(benchmark::State& state) {
  Dataset ds = corpus(64, static_cast<int>(state.range(0)));
  auto parts = partition_dataset(ds, PartitionSpec{});
  TrainConfig cfg;
  cfg.epochs = 1;
  TrainHooks hooks;
  hooks.skip_eval = true;
  for (auto _ : state) benchmark::DoNotOptimize(train_unsupervised(ds, parts, cfg, hooks));
  state.SetItemsProcessed(state.iterations() * total_edges(ds));
}
BENCHMARK(BM_TrainEpoch)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

}  // namespace

// The distro benchmark_main archive carries LTO objects from another gcc
// point release, so main is defined here.
BENCHMARK_MAIN();
