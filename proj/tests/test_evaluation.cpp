#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "probe/error.hpp"
#include "probe/evaluation.hpp"
#include "support.hpp"

namespace probe {
namespace {

ProbeInstance probe_with(const std::string& id, std::vector<ConstraintInstance> constraints, double cddi = 0.0) {
  ProbeInstance p;
  p.probe_id = id;
  p.seed_id = "s";
  p.seed_text = "Write something.";
  p.combination_id = "c";
  p.constraints = std::move(constraints);
  p.text = p.seed_text;
  for (const auto& c : p.constraints) p.text += "\n" + c.rendered_text;
  p.target_cddi = cddi;
  p.realized_cddi = cddi;
  return p;
}

InferenceRecord record_for(const std::string& id, const std::string& response, Mode mode = Mode::single_round) {
  InferenceRecord r;
  r.probe_id = id;
  r.mode = mode;
  r.final_response = response;
  return r;
}

ScoredRecord scored(std::vector<Kind> kinds, std::vector<bool> verdicts, double cddi = 0.0,
                    Mode mode = Mode::single_round) {
  ScoredRecord s;
  s.probe_id = "p";
  s.kinds = std::move(kinds);
  s.verdicts = std::move(verdicts);
  s.realized_cddi = cddi;
  s.target_cddi = cddi;
  s.mode = mode;
  return s;
}

TEST(Score, OnlyNoCommasPasses) {
  const auto probe = probe_with("a", {testing::make(Kind::Title), testing::make(Kind::NoCommas),
                                      testing::make(Kind::AllUppercase)});
  const auto s = score(record_for("a", "just a plain lowercase reply without any title"), probe);
  EXPECT_EQ(s.verdicts, (std::vector<bool>{false, true, false}));
  EXPECT_EQ(s.kinds, (std::vector<Kind>{Kind::Title, Kind::NoCommas, Kind::AllUppercase}));
  EXPECT_FALSE(s.errored);
}

TEST(Score, SatisfyingResponsePassesAll) {
  const auto probe = probe_with("a", {testing::make(Kind::Title), testing::make(Kind::NoCommas),
                                      testing::make(Kind::AllUppercase)});
  const auto s = score(record_for("a", "<<A TITLE>>\nEVERYTHING HERE IS LOUD AND CLEAR."), probe);
  EXPECT_TRUE(s.all_followed());
}

TEST(Score, ErroredRecordFailsEverything) {
  const auto probe = probe_with("a", {testing::make(Kind::NoCommas), testing::make(Kind::AllLowercase)});
  auto r = record_for("a", "");
  r.error = "timeout";
  const auto s = score(r, probe);
  EXPECT_TRUE(s.errored);
  EXPECT_EQ(s.verdicts, (std::vector<bool>{false, false}));
}

TEST(Score, JoinErrors) {
  const auto probe = probe_with("a", {testing::make(Kind::NoCommas)});
  EXPECT_THROW(score(record_for("b", "x"), probe), JoinError);
  const std::vector<InferenceRecord> records{record_for("zzz", "x")};
  const std::vector<ProbeInstance> probes{probe};
  EXPECT_THROW(score_all(records, probes), JoinError);
}

TEST(Aggregate, HandComputedMetrics) {
  const std::vector<ScoredRecord> s{scored({Kind::Title, Kind::NoCommas}, {true, true}),
                                    scored({Kind::Title, Kind::NoCommas}, {true, false})};
  const auto reports = aggregate(s);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_NEAR(reports[0].acc_cons(), 0.75, 1e-12);
  EXPECT_NEAR(reports[0].acc_inst(), 0.5, 1e-12);
  EXPECT_EQ(reports[0].m, 2u);
  EXPECT_EQ(reports[0].n, 2u);
  EXPECT_DOUBLE_EQ(reports[0].kind(Kind::NoCommas).accuracy(), 0.5);
  EXPECT_DOUBLE_EQ(reports[0].group(Group::Format).accuracy(), 1.0);
}

TEST(Aggregate, AllTrueAndSingleMixed) {
  const std::vector<ScoredRecord> all{scored({Kind::Title, Kind::NoCommas}, {true, true})};
  EXPECT_DOUBLE_EQ(aggregate(all)[0].acc_cons(), 1.0);
  EXPECT_DOUBLE_EQ(aggregate(all)[0].acc_inst(), 1.0);
  const std::vector<ScoredRecord> mixed{scored({Kind::Title, Kind::NoCommas, Kind::Quotation}, {true, false, true})};
  EXPECT_DOUBLE_EQ(aggregate(mixed)[0].acc_inst(), 0.0);
  EXPECT_NEAR(aggregate(mixed)[0].acc_cons(), 2.0 / 3.0, 1e-12);
}

TEST(Aggregate, BucketsByModeAndExactCddiDescending) {
  const std::vector<ScoredRecord> s{scored({Kind::Title, Kind::NoCommas}, {true, true}, -1.0),
                                    scored({Kind::Title, Kind::NoCommas}, {true, true}, 1.0),
                                    scored({Kind::Title, Kind::NoCommas}, {false, true}, 1.0, Mode::multi_round),
                                    scored({Kind::Title, Kind::NoCommas}, {true, false}, 1.0)};
  const auto reports = aggregate(s);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0].mode, Mode::single_round);
  EXPECT_DOUBLE_EQ(reports[0].cddi, 1.0);
  EXPECT_EQ(reports[0].m, 2u);
  EXPECT_DOUBLE_EQ(reports[1].cddi, -1.0);
  EXPECT_EQ(reports[2].mode, Mode::multi_round);
}

std::vector<ScoredRecord> fuzz_records(Rng& rng, std::size_t m, std::size_t n) {
  std::vector<ScoredRecord> out;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<Kind> kinds(all_kinds().begin(), all_kinds().end());
    rng.shuffle(std::span(kinds));
    kinds.resize(n);
    std::vector<bool> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = rng.uniform01() < 0.7;
    out.push_back(scored(kinds, v));
  }
  return out;
}

TEST(Aggregate, PermutationInvariantAndPositionSumCheck) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto records = fuzz_records(rng, 30, 5);
    const auto a = aggregate(records);
    rng.shuffle(std::span(records));
    const auto b = aggregate(records);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].to_json(), b[0].to_json());
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& p : a[0].positions) {
      weighted += p.accuracy() * static_cast<double>(p.total);
      total += p.total;
    }
    EXPECT_NEAR(weighted / static_cast<double>(total), a[0].acc_cons(), 1e-12);
    EXPECT_LE(a[0].acc_inst(), a[0].acc_cons());
  }
}

TEST(Aggregate, FollowRecordsFlattenVerdicts) {
  const std::vector<ScoredRecord> s{scored({Kind::Title, Kind::NoCommas}, {true, false})};
  const auto f = follow_records(s);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[1].kind, Kind::NoCommas);
  EXPECT_FALSE(f[1].followed);
}

EvaluationReport report_from(Rng& rng, double p) {
  std::vector<ScoredRecord> records;
  for (int i = 0; i < 40; ++i) {
    std::vector<bool> v;
    for (Kind k : all_kinds()) v.push_back(rng.uniform01() < p + (static_cast<int>(k) % 3) * 0.05);
    records.push_back(scored(std::vector<Kind>(all_kinds().begin(), all_kinds().end()), v));
  }
  return aggregate(records)[0];
}

TEST(Robustness, IdenticalRunsGivePOne) {
  Rng rng(1);
  const auto run = report_from(rng, 0.6);
  const std::vector<EvaluationReport> runs{run, run, run};
  const auto r = robustness_test(runs);
  EXPECT_DOUBLE_EQ(r.f, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  RobustnessOptions perm;
  perm.method = RobustnessMethod::permutation;
  perm.permutations = 500;
  EXPECT_DOUBLE_EQ(robustness_test(runs, perm).p_value, 1.0);
}

TEST(Robustness, HugeDifferenceGivesSmallP) {
  const std::vector<std::vector<double>> groups{{10, 11, 9, 10, 12}, {90, 91, 89, 92, 90}};
  EXPECT_LT(one_way_anova(groups).p_value, 1e-6);
  EXPECT_LT(permutation_anova(groups, 2000, 3).p_value, 0.05);
}

// Textbook one-way ANOVA F statistic.
double reference_f(const std::vector<std::vector<double>>& groups) {
  double n = 0.0;
  double sum = 0.0;
  for (const auto& g : groups) {
    for (double x : g) {
      sum += x;
      n += 1.0;
    }
  }
  const double grand = sum / n;
  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double x : g) mean += x;
    mean /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double x : g) ssw += (x - mean) * (x - mean);
  }
  const double k = static_cast<double>(groups.size());
  return (ssb / (k - 1.0)) / (ssw / (n - k));
}

TEST(Robustness, PublishedThreeRunTable) {
  const std::vector<std::vector<double>> runs{
      {29.93, 73.46, 44.40, 50.68, 76.59, 77.11, 59.92, 34.40, 56.01, 2.70},
      {29.83, 73.29, 43.80, 50.79, 73.36, 78.17, 61.50, 32.60, 55.49, 2.65},
      {30.27, 73.46, 42.90, 52.14, 74.95, 77.50, 60.50, 36.80, 56.91, 2.90}};
  const auto r = one_way_anova(runs);
  EXPECT_NEAR(r.f, reference_f(runs), 1e-9);
  EXPECT_DOUBLE_EQ(r.df_between, 2.0);
  EXPECT_DOUBLE_EQ(r.df_within, 27.0);
  EXPECT_NEAR(r.p_value, 0.9979, 5e-5);
}

TEST(Robustness, PermutationPValueIsBounded) {
  const std::vector<std::vector<double>> groups{{1, 2, 3}, {2, 3, 4}};
  const auto r = permutation_anova(groups, 999, 5);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
  EXPECT_DOUBLE_EQ(r.f, one_way_anova(groups).f);
  EXPECT_EQ(permutation_anova(groups, 999, 5).p_value, r.p_value);
}

TEST(Robustness, ArgumentErrors) {
  Rng rng(2);
  const auto run = report_from(rng, 0.5);
  const std::vector<EvaluationReport> one{run};
  EXPECT_THROW(robustness_test(one), ArgumentError);
  EvaluationReport partial;
  partial.m = 1;
  partial.groups[0].add(true);
  const std::vector<EvaluationReport> mismatched{run, partial};
  EXPECT_THROW(robustness_test(mismatched), ArgumentError);
  EXPECT_THROW(permutation_anova({{1, 2}, {3, 4}}, 0, 1), ArgumentError);
}

TEST(Robustness, ColumnsOption) {
  Rng rng(3);
  const auto run = report_from(rng, 0.5);
  EXPECT_EQ(metric_columns(run, RobustnessColumns::all_metrics).size(), 10u);
  EXPECT_EQ(metric_columns(run, RobustnessColumns::groups_only).size(), 8u);
  EXPECT_NEAR(metric_columns(run, RobustnessColumns::all_metrics)[8], 100.0 * run.acc_cons(), 1e-12);
}

std::vector<ScoredRecord> twelve_buckets(Rng& rng) {
  std::vector<ScoredRecord> out;
  for (int d = 0; d < 12; ++d) {
    const double cddi = (21.0 - 2.0 * (d * 21 / 11)) / 21.0;
    for (int i = 0; i < 5; ++i) {
      std::vector<Kind> kinds(all_kinds().begin(), all_kinds().begin() + 7);
      std::vector<bool> v(7);
      for (auto&& x : v) x = rng.uniform01() < 0.6;
      out.push_back(scored(kinds, v, cddi));
    }
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

TEST(Report, TwelveRowsAndCsvRoundTrip) {
  Rng rng(4);
  const auto reports = aggregate(twelve_buckets(rng));
  ASSERT_EQ(reports.size(), 12u);
  const auto rows = parse_csv(emit_report(reports, ReportFormat::csv));
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows[0][0], "Mode");
  EXPECT_EQ(rows[0].back(), "I_level (%)");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& row = rows[i + 1];
    EXPECT_EQ(std::stod(row[1]), reports[i].cddi);
    EXPECT_EQ(std::stoul(row[2]), reports[i].m);
    EXPECT_EQ(std::stod(row[row.size() - 2]), 100.0 * reports[i].acc_cons());
    EXPECT_EQ(std::stod(row.back()), 100.0 * reports[i].acc_inst());
  }
  const auto table = emit_report(reports, ReportFormat::table);
  EXPECT_NE(table.find("C_level (%)"), std::string::npos);
  std::size_t lines = std::count(table.begin(), table.end(), '\n');
  EXPECT_EQ(lines, 14u);
}

TEST(Report, EmptyBucketIsOmitted) {
  Rng rng(5);
  auto reports = aggregate(twelve_buckets(rng));
  reports.push_back(EvaluationReport{});
  EXPECT_EQ(parse_csv(emit_report(reports, ReportFormat::csv)).size(), 13u);
}

TEST(Report, GroupColumnsFollowDifficulty) {
  Rng rng(6);
  const auto reports = aggregate(twelve_buckets(rng));
  std::vector<DifficultyEntry> entries;
  for (Kind k : all_kinds()) {
    DifficultyEntry e;
    e.kind = k;
    // Punctuation hardest, then the rest by reverse taxonomy order.
    e.accuracy = group_of(k) == Group::Punctuation ? 0.01 : 0.1 + 0.1 * static_cast<double>(group_of(k));
    entries.push_back(e);
  }
  const auto table = DifficultyTable::from_entries(entries);
  const auto header = parse_csv(emit_report(reports, ReportFormat::csv, &table))[0];
  const auto expected = table.groups_hardest_first();
  ASSERT_EQ(expected.front(), Group::Punctuation);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(header[4 + i], std::string(group_name(expected[i])) + " (%)");
  }
}

TEST(Report, FormatNames) {
  EXPECT_EQ(parse_report_format("table_text"), ReportFormat::table);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::csv);
  EXPECT_THROW(parse_report_format("xlsx"), ArgumentError);
}

TEST(Report, KindReportListsSeenKinds) {
  const std::vector<ScoredRecord> s{scored({Kind::Title, Kind::NoCommas}, {true, false})};
  const auto text = emit_kind_report(aggregate(s), ReportFormat::csv);
  EXPECT_NE(text.find("Title,"), std::string::npos);
  EXPECT_EQ(text.find("Quotation"), std::string::npos);
}

}  // namespace
}  // namespace probe
