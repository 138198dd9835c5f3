#include <gtest/gtest.h>

#include "probe/evaluation.hpp"
#include "probe/importance.hpp"
#include "probe/pipeline.hpp"
#include "support.hpp"

namespace probe {
namespace {

DifficultyTable table_for_test() {
  std::vector<DifficultyEntry> entries;
  for (Kind k : all_kinds()) {
    DifficultyEntry e;
    e.kind = k;
    e.accuracy = 0.1 + 0.035 * static_cast<double>((static_cast<int>(k) * 5) % 23);
    entries.push_back(e);
  }
  return DifficultyTable::from_entries(entries);
}

TEST(Parallel, OrdersMatchSerial) {
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 8, 40, 11);
  const auto table = table_for_test();
  const auto a = orders_for_combinations(combos, table, default_targets(), SearchMode::automatic, Execution::serial);
  const auto b = orders_for_combinations(combos, table, default_targets(), SearchMode::automatic, Execution::parallel);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    for (std::size_t t = 0; t < a[i].size(); ++t) {
      EXPECT_EQ(a[i][t].order, b[i][t].order);
      EXPECT_EQ(a[i][t].realized_cddi, b[i][t].realized_cddi);
    }
  }
}

TEST(Parallel, ScoringMatchesSerial) {
  const auto seeds = testing::make_seeds(10);
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 6, 5, 12);
  const auto probes = make_probes(seeds, combos, table_for_test(), default_targets());
  SyntheticBackend backend(SyntheticProfile::spread(0.2, 0.9, -0.1, -1.0), 3);
  std::vector<InferenceRecord> records;
  for (const auto& p : probes) records.push_back(run_single_round(p, backend, DecodeSettings{}));
  const auto a = score_all(records, probes, Execution::serial);
  const auto b = score_all(records, probes, Execution::parallel);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].probe_id, b[i].probe_id);
    EXPECT_EQ(a[i].verdicts, b[i].verdicts);
  }
}

RawImportanceMatrix fuzz_matrix(Rng& rng, const ProbeInstance& p) {
  RawImportanceMatrix m;
  m.probe_id = p.probe_id;
  const std::size_t rows = 3 + 4 * p.constraints.size();
  for (std::size_t i = 0; i < rows; ++i) m.instruction_tokens.push_back({"t", i, i + 1});
  for (std::size_t j = 0; j < p.constraints.size(); ++j) {
    m.constraint_spans.push_back({std::string(kind_name(p.constraints[j].kind)), 3 + 4 * j, 7 + 4 * j});
  }
  m.response_token_count = 64;
  m.matrix.resize(rows * 64);
  for (auto& v : m.matrix) v = rng.uniform01() - 0.5;
  return m;
}

TEST(Parallel, NormalizeAndProfilesMatchSerial) {
  const auto seeds = testing::make_seeds(4);
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 5, 3, 13);
  const auto probes = make_probes(seeds, combos, table_for_test(), default_targets());
  Rng rng(4);
  std::vector<RawImportanceMatrix> matrices;
  for (const auto& p : probes) matrices.push_back(fuzz_matrix(rng, p));
  for (const auto& m : matrices) {
    EXPECT_EQ(normalize(m, {}, Execution::serial).values, normalize(m, {}, Execution::parallel).values);
  }
  const auto a = build_profiles(matrices, probes, {}, nullptr, Execution::serial);
  const auto b = build_profiles(matrices, probes, {}, nullptr, Execution::parallel);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].to_json(), b[i].to_json());
}

}  // namespace
}  // namespace probe
