#include <benchmark/benchmark.h>

#include <random>

#include "intentloop/simulator.hpp"

using namespace intentloop;

static void BM_RidgeUpdate(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  RidgeArm arm(dim, 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(dim);
  for (auto _ : state) {
    for (auto& v : x) v = g(rng);
    arm.update(x, static_cast<double>(rng() % 2));
    benchmark::DoNotOptimize(arm.predict(x));
  }
}
BENCHMARK(BM_RidgeUpdate)->Arg(20)->Arg(100);

static void BM_SimulatedInteractions(benchmark::State& state) {
  const auto kind = static_cast<PolicyKind>(state.range(0));
  SimConfig cfg;
  cfg.n_requests = 100000;
  cfg.max_interactions = 2000;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_sessions(cfg, kind, ContextScheme::method1, false));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_SimulatedInteractions)
    ->Arg(static_cast<int>(PolicyKind::adaptive_active_greedy))
    ->Arg(static_cast<int>(PolicyKind::popularity_baseline))
    ->Unit(benchmark::kMillisecond);
