// Serial against parallel kernels. Arg 0 runs serial, arg 1 parallel.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "probe/evaluation.hpp"
#include "probe/importance.hpp"
#include "probe/log.hpp"
#include "probe/pipeline.hpp"
#include "probe/synthetic.hpp"

namespace {

using namespace probe;

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

DifficultyTable bench_table() {
  std::vector<DifficultyEntry> entries;
  for (Kind k : all_kinds()) {
    DifficultyEntry e;
    e.kind = k;
    e.accuracy = 0.1 + 0.035 * static_cast<double>((static_cast<int>(k) * 5) % 23);
    entries.push_back(e);
  }
  return DifficultyTable::from_entries(entries);
}

std::vector<SeedInstruction> bench_seeds(std::size_t count) {
  std::vector<SeedInstruction> seeds;
  for (std::size_t i = 0; i < count; ++i) {
    SeedInstruction s;
    s.id = "s" + std::to_string(i);
    s.text = "Write a short note about item " + std::to_string(i) + ".";
    seeds.push_back(s);
  }
  return seeds;
}

void BM_Orders(benchmark::State& state) {
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 8, 40, 11);
  const auto table = bench_table();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        orders_for_combinations(combos, table, default_targets(), SearchMode::automatic, exec_of(state)));
  }
}
BENCHMARK(BM_Orders)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ScoreAll(benchmark::State& state) {
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 7, 10, 12);
  const auto probes = make_probes(bench_seeds(40), combos, bench_table(), default_targets());
  SyntheticBackend backend(SyntheticProfile::spread(0.2, 0.9, -0.1, -1.0), 3);
  std::vector<InferenceRecord> records;
  for (const auto& p : probes) records.push_back(run_single_round(p, backend, DecodeSettings{}));
  for (auto _ : state) benchmark::DoNotOptimize(score_all(records, probes, exec_of(state)));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * records.size()));
}
BENCHMARK(BM_ScoreAll)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Normalize(benchmark::State& state) {
  RawImportanceMatrix m;
  m.probe_id = "bench";
  const std::size_t rows = 512;
  const std::size_t cols = 2048;
  for (std::size_t i = 0; i < rows; ++i) m.instruction_tokens.push_back({"t", i, i + 1});
  m.response_token_count = cols;
  m.matrix.resize(rows * cols);
  Rng rng(5);
  for (auto& v : m.matrix) v = rng.uniform01() - 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(normalize(m, {}, exec_of(state)));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * m.matrix.size() * sizeof(double)));
}
BENCHMARK(BM_Normalize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  probe::log::set_level(probe::log::Level::error);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
