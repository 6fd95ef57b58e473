#include <benchmark/benchmark.h>

#include "intentloop/qpp.hpp"

using namespace intentloop;

namespace {

const std::filesystem::path kDir = std::filesystem::path(INTENTLOOP_SOURCE_DIR) / "tests" / "data" / "qpp";

struct Fixture {
  std::vector<CorpusEntry> corpus = read_corpus(kDir / "corpus.jsonl");
  CorpusStats stats = index_corpus(std::span<const CorpusEntry>(corpus));
  VocabularyIndex index = VocabularyIndex::load_jsonl(kDir / "vocab.jsonl");
  std::vector<std::string> requests = read_lines(kDir / "requests.txt");
  std::vector<std::string> refined = read_lines(kDir / "refined.txt");
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

static void BM_ScoreRequest(benchmark::State& state) {
  const auto& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(score_request(f.requests[i++ % f.requests.size()], f.stats, f.index));
}
BENCHMARK(BM_ScoreRequest);

static void BM_CompareRequests(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(compare_requests(f.requests, f.refined, f.stats, f.index));
}
BENCHMARK(BM_CompareRequests);

static void BM_IndexCorpus(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(index_corpus(std::span<const CorpusEntry>(f.corpus)));
}
BENCHMARK(BM_IndexCorpus);
