#include <benchmark/benchmark.h>

#include <random>

#include "intentloop/embedding.hpp"

using namespace intentloop;

static void BM_HashEmbed(benchmark::State& state) {
  const HashEmbeddingProvider p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(p.embed("easy hike with ocean views and parking for kids"));
}
BENCHMARK(BM_HashEmbed)->Arg(32)->Arg(512);

static void BM_NearestTerms(benchmark::State& state) {
  const HashEmbeddingProvider p(128);
  VocabularyIndex index;
  for (int i = 0; i < state.range(0); ++i) {
    const auto term = "term" + std::to_string(i);
    index.add(term, p.embed(term));
  }
  for (auto _ : state) benchmark::DoNotOptimize(nearest_terms(index, "term7", 10));
}
BENCHMARK(BM_NearestTerms)->Arg(1000)->Arg(10000);
