#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "probe/error.hpp"
#include "probe/synthesis.hpp"
#include "support.hpp"

namespace probe {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(LoadSeeds, ParsesValidLines) {
  TempDir dir("seeds");
  std::string content;
  for (int i = 0; i < 200; ++i) {
    content += nlohmann::json{{"id", "s" + std::to_string(i)}, {"text", "Task " + std::to_string(i)},
                              {"source", i % 2 ? "self_instruct" : "natural_instructions"}}
                   .dump() +
               "\n";
  }
  write_file(dir / "seeds.jsonl", content);
  const auto seeds = load_seeds(dir / "seeds.jsonl");
  ASSERT_EQ(seeds.size(), 200u);
  EXPECT_EQ(seeds[1].source, SeedSource::self_instruct);
  EXPECT_EQ(seeds[199].text, "Task 199");
}

TEST(LoadSeeds, EmptyFileGivesNoSeeds) {
  TempDir dir("seeds");
  write_file(dir / "seeds.jsonl", "");
  EXPECT_TRUE(load_seeds(dir / "seeds.jsonl").empty());
}

TEST(LoadSeeds, MissingTextReportsTheLine) {
  TempDir dir("seeds");
  write_file(dir / "seeds.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"source\":\"custom\"}\n{\"id\":\"b\",\"source\":\"custom\"}\n");
  try {
    load_seeds(dir / "seeds.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadSeeds, DuplicateIdIsDataError) {
  TempDir dir("seeds");
  write_file(dir / "seeds.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
  EXPECT_THROW(load_seeds(dir / "seeds.jsonl"), DataError);
}

TEST(LoadSeeds, MalformedJsonAndMissingFile) {
  TempDir dir("seeds");
  write_file(dir / "seeds.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{oops\n");
  EXPECT_THROW(load_seeds(dir / "seeds.jsonl"), ParseError);
  EXPECT_THROW(load_seeds(dir / "absent.jsonl"), ConfigError);
}

void expect_valid(const std::vector<ConstraintCombination>& combos, std::size_t n) {
  const auto& conflicts = ConflictMatrix::shared();
  std::set<std::set<Kind>> kind_sets;
  for (const auto& c : combos) {
    ASSERT_EQ(c.members.size(), n);
    std::set<Kind> kinds;
    for (std::size_t a = 0; a < n; ++a) {
      kinds.insert(c.members[a].kind);
      for (std::size_t b = a + 1; b < n; ++b) ASSERT_FALSE(conflicts.conflicts(c.members[a], c.members[b]));
    }
    ASSERT_EQ(kinds.size(), n);
    kind_sets.insert(kinds);
  }
  EXPECT_EQ(kind_sets.size(), combos.size());
}

TEST(SampleCombinations, SevenOfTen) {
  Rng rng(1);
  const auto combos = sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 7, 10, rng);
  ASSERT_EQ(combos.size(), 10u);
  expect_valid(combos, 7);
}

TEST(SampleCombinations, ManySeedsStayConflictFree) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    expect_valid(sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 9, 10, rng), 9);
  }
}

TEST(SampleCombinations, SingletonsAreTriviallyFine) {
  Rng rng(2);
  const auto combos = sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 1, 5, rng);
  ASSERT_EQ(combos.size(), 5u);
  expect_valid(combos, 1);
}

TEST(SampleCombinations, ZeroSizesAreArgumentErrors) {
  Rng rng(3);
  EXPECT_THROW(sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 0, 5, rng), ArgumentError);
  EXPECT_THROW(sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 3, 0, rng), ArgumentError);
}

// Largest conflict-free kind set, by exhaustive search over all subsets.
std::size_t maximum_independent_set() {
  const auto& m = ConflictMatrix::shared();
  constexpr std::size_t k = kKindCount;
  std::array<std::uint32_t, k> adjacent{};
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a != b && m.conflicts(all_kinds()[a], all_kinds()[b])) adjacent[a] |= 1u << b;
    }
  }
  std::vector<char> independent(std::size_t{1} << k, 0);
  independent[0] = 1;
  std::size_t best = 0;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    const int low = __builtin_ctz(mask);
    const std::uint32_t rest = mask & (mask - 1);
    independent[mask] = independent[rest] && (adjacent[static_cast<std::size_t>(low)] & rest) == 0;
    if (independent[mask]) best = std::max<std::size_t>(best, static_cast<std::size_t>(__builtin_popcount(mask)));
  }
  return best;
}

TEST(SampleCombinations, BeyondTheLargestConflictFreeSetIsSamplingError) {
  const std::size_t mis = maximum_independent_set();
  ASSERT_GE(mis, 9u);
  ASSERT_LT(mis, kKindCount);
  Rng rng(4);
  EXPECT_THROW(sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), mis + 1, 1, rng), SamplingError);
}

TEST(SampleCombinations, TooManyDistinctSetsIsSamplingError) {
  Rng rng(5);
  // 23 singletons exist, so 24 distinct ones cannot.
  EXPECT_THROW(sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 1, 24, rng), SamplingError);
}

TEST(SampleCombinations, RoundTripsThroughJson) {
  Rng rng(6);
  const auto combos = sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 5, 3, rng);
  for (const auto& c : combos) {
    const auto back = ConstraintCombination::from_json(c.to_json());
    EXPECT_EQ(back.id, c.id);
    EXPECT_EQ(back.members, c.members);
  }
}

ConstraintCombination two_constraints() {
  ConstraintCombination comb;
  comb.id = "c000";
  comb.members.push_back(testing::make(Kind::NoCommas));
  comb.members.push_back(testing::make(Kind::Title));
  return comb;
}

TEST(Compose, ConcatenatesWithSingleNewlines) {
  const SeedInstruction seed{"s1", "Write a story", SeedSource::custom};
  const auto comb = two_constraints();
  const auto ab = compose(seed, comb, {0, 1});
  EXPECT_EQ(ab.text, "Write a story\n" + comb.members[0].rendered_text + "\n" + comb.members[1].rendered_text);
  const auto ba = compose(seed, comb, {1, 0});
  EXPECT_EQ(ba.text, "Write a story\n" + comb.members[1].rendered_text + "\n" + comb.members[0].rendered_text);
  ASSERT_EQ(ab.spans.size(), 2u);
  EXPECT_EQ(ab.text.substr(ab.spans[1].begin, ab.spans[1].end - ab.spans[1].begin), comb.members[1].rendered_text);
}

TEST(Compose, LineMultisetIsOrderInvariant) {
  Rng rng(8);
  const auto combos = sample_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 7, 1, rng);
  const SeedInstruction seed{"s1", "Describe your city.", SeedSource::custom};
  std::vector<std::size_t> order{0, 1, 2, 3, 4, 5, 6};
  const auto lines_of = [](const std::string& t) {
    std::multiset<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= t.size(); ++i) {
      if (i == t.size() || t[i] == '\n') {
        out.insert(t.substr(start, i - start));
        start = i + 1;
      }
    }
    return out;
  };
  const auto base = lines_of(compose(seed, combos[0], order).text);
  EXPECT_EQ(base.size(), 8u);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(std::span(order));
    const auto composed = compose(seed, combos[0], order);
    EXPECT_EQ(lines_of(composed.text), base);
    for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(composed.ordered[i], combos[0].members[order[i]]);
  }
}

TEST(Compose, RejectsNonPermutations) {
  const SeedInstruction seed{"s1", "Write a story", SeedSource::custom};
  const auto comb = two_constraints();
  EXPECT_THROW(compose(seed, comb, {0, 0}), ArgumentError);
  EXPECT_THROW(compose(seed, comb, {0}), ArgumentError);
  EXPECT_THROW(compose(seed, comb, {0, 2}), ArgumentError);
}

TEST(ProbeInstance, JsonRoundTrip) {
  const SeedInstruction seed{"s1", "Write a story", SeedSource::custom};
  const auto composed = compose(seed, two_constraints(), {1, 0});
  ProbeInstance p;
  p.probe_id = "s1/c000/t00";
  p.seed_id = "s1";
  p.seed_text = seed.text;
  p.combination_id = "c000";
  p.constraints = composed.ordered;
  p.spans = composed.spans;
  p.text = composed.text;
  p.target_cddi = -0.05;
  p.realized_cddi = -1.0 / 21.0;
  p.discordant_pairs = 11;
  const auto j = p.to_json();
  EXPECT_EQ(j.at("order"), (nlohmann::json{"Title", "NoCommas"}));
  const auto back = ProbeInstance::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.family_id(), "s1/c000");
}

}  // namespace
}  // namespace probe
