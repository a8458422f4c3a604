#include <benchmark/benchmark.h>

#include "decsim/engine.hpp"
#include "decsim/metrics.hpp"
#include "decsim/rng.hpp"

using namespace decsim;

namespace {

RunState replicas(const ModelSpec& spec, int n) {
  RunState s;
  for (int i = 0; i < n; ++i) {
    ModelSpec m = spec;
    m.seed = static_cast<std::uint64_t>(i);
    s.workers.push_back({init_params(m), 0});
  }
  return s;
}

void BM_SyncStep(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const ModelSpec spec{ModelKind::MLP, 32, 64, 10, 1};
  Strategy ring;
  ring.kind = StrategyKind::DecentralizedRing;
  const auto mix = mixing_matrix(strategy_topology(ring, n, 0));
  auto s = replicas(spec, n);
  const std::vector<ParamVector> grads(static_cast<std::size_t>(n), ParamVector(s.workers.front().params.layout));
  for (auto _ : st) {
    s = sync_step(std::move(s), ring, mix, grads, 0.01);
    benchmark::DoNotOptimize(s.workers.front().params.values.data());
  }
}
BENCHMARK(BM_SyncStep)->Arg(8)->Arg(16)->Arg(64);

void BM_LossAndGrad(benchmark::State& st) {
  const ModelSpec spec{ModelKind::MLP, 32, 64, 10, 1};
  const auto p = init_params(spec);
  Rng rng(2);
  Batch b;
  b.input_dim = 32;
  for (int r = 0; r < st.range(0); ++r) {
    for (int d = 0; d < 32; ++d) b.inputs.push_back(rng.normal());
    b.labels.push_back(static_cast<int>(rng.below(10)));
  }
  for (auto _ : st) benchmark::DoNotOptimize(loss_and_grad(p, spec, b).loss);
}
BENCHMARK(BM_LossAndGrad)->Arg(16)->Arg(128);

void BM_Gini(benchmark::State& st) {
  Rng rng(3);
  std::vector<double> x(static_cast<std::size_t>(st.range(0)));
  for (auto& v : x) v = rng.uniform();
  for (auto _ : st) benchmark::DoNotOptimize(gini(x));
}
BENCHMARK(BM_Gini)->Arg(16)->Arg(256)->Arg(4096);

void BM_CaptureDispersion(benchmark::State& st) {
  const auto s = replicas({ModelKind::MLP, 32, 64, 10, 1}, static_cast<int>(st.range(0)));
  std::vector<ParamVector> params;
  for (const auto& w : s.workers) params.push_back(w.params);
  for (auto _ : st) benchmark::DoNotOptimize(capture_dispersion(params).size());
}
BENCHMARK(BM_CaptureDispersion)->Arg(16)->Arg(64);

}  // namespace
BENCHMARK_MAIN();
