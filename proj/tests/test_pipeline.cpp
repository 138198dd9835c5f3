#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/pipeline.hpp"
#include "support.hpp"

namespace probe {
namespace {

using testing::TempDir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_seeds(const std::filesystem::path& path, std::size_t count) {
  std::string content;
  for (const auto& s : testing::make_seeds(count)) {
    content += nlohmann::json{{"id", s.id}, {"text", s.text}, {"source", "custom"}}.dump() + "\n";
  }
  testing::write_file(path, content);
}

DifficultyTable spread_table() {
  std::vector<DifficultyEntry> entries;
  for (Kind k : all_kinds()) {
    DifficultyEntry e;
    e.kind = k;
    e.accuracy = 0.05 + 0.04 * static_cast<double>((static_cast<int>(k) * 7) % 23);
    entries.push_back(e);
  }
  return DifficultyTable::from_entries(entries);
}

RunConfig desk_config(const TempDir& dir, std::uint64_t seed = 1) {
  write_seeds(dir / "seeds.jsonl", 5);
  return RunConfig::from_json({{"n", 7},
                               {"n_cc", 2},
                               {"targets", {1.0, -0.05, -1.0}},
                               {"seeds", "seeds.jsonl"},
                               {"modes", {"single_round", "multi_round"}},
                               {"endpoint", {{"kind", "synthetic"}, {"profile", {{"spread", {0.2, 0.9}}, {"beta", -0.1}, {"gamma", -1.0}}}}},
                               {"out_dir", "run"},
                               {"seed", seed}},
                              dir.path());
}

TEST(Corpus, TwentyFourThousandProbes) {
  const auto seeds = testing::make_seeds(200);
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 7, 10, 42);
  const auto probes = make_probes(seeds, combos, spread_table(), default_targets());
  ASSERT_EQ(probes.size(), 24000u);
  std::set<std::string> ids;
  for (const auto& p : probes) ids.insert(p.probe_id);
  EXPECT_EQ(ids.size(), 24000u);
  EXPECT_EQ(probes.front().probe_id, "s000/" + combos[0].id + "/t00");
  EXPECT_EQ(probes[11].probe_id, "s000/" + combos[0].id + "/t11");
  EXPECT_EQ(probes[12].combination_id, combos[1].id);
  EXPECT_EQ(probes[120].seed_id, "s001");
}

TEST(Corpus, ProbesCarryConsistentCddi) {
  const auto seeds = testing::make_seeds(3);
  const auto table = spread_table();
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 7, 4, 3);
  for (const auto& p : make_probes(seeds, combos, table, default_targets())) {
    std::vector<Kind> kinds;
    for (const auto& c : p.constraints) kinds.push_back(c.kind);
    ASSERT_NEAR(cddi(kinds, table), p.realized_cddi, 1e-12);
    ASSERT_EQ(cddi_from_discordant(7, p.discordant_pairs), p.realized_cddi);
    ASSERT_LE(std::fabs(p.realized_cddi - p.target_cddi), 1.0 / 21.0 + 1e-12);
    ASSERT_EQ(p.text.rfind(p.seed_text, 0), 0u);
  }
}

TEST(Corpus, NineConstraintsUseThirtySixPairs) {
  const auto seeds = testing::make_seeds(2);
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 9, 3, 5);
  const auto probes = make_probes(seeds, combos, spread_table(), default_targets());
  ASSERT_EQ(probes.size(), 72u);
  for (const auto& p : probes) {
    ASSERT_EQ(p.constraints.size(), 9u);
    const double d = (36.0 - 36.0 * p.realized_cddi) / 2.0;
    EXPECT_NEAR(d, std::round(d), 1e-9);
    EXPECT_LE(std::fabs(p.realized_cddi - p.target_cddi), 1.0 / 36.0 + 1e-12);
  }
}

TEST(Corpus, CalibrationProbesOnePerFamily) {
  const auto seeds = testing::make_seeds(4);
  const auto combos = synthesize_combinations(Taxonomy::shared(), ConflictMatrix::shared(), 5, 3, 9);
  const auto all = calibration_probes(seeds, combos, 9);
  EXPECT_EQ(all.size(), 12u);
  std::set<std::string> families;
  for (const auto& p : all) families.insert(p.family_id());
  EXPECT_EQ(families.size(), 12u);
  EXPECT_EQ(calibration_probes(seeds, combos, 9, 5).size(), 5u);
  EXPECT_EQ(calibration_probes(seeds, combos, 9)[3].text, all[3].text);
}

TEST(Pipeline, DeskConfigProducesThirtyProbesAndReports) {
  TempDir dir("desk");
  const auto config = desk_config(dir);
  const auto result = run_pipeline(config);
  EXPECT_EQ(result.probes, 30u);
  for (const char* f : {"combinations.jsonl", "difficulty.json", "probes.jsonl", "records_single_round.jsonl",
                        "records_multi_round.jsonl", "state.json", "evaluation/report.txt", "evaluation/report.json",
                        "evaluation/scored.jsonl", "evaluation/accuracy.svg"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / f)) << f;
  }
  EXPECT_EQ(load_records(dir / "run/records_single_round.jsonl").size(), 30u);
  EXPECT_EQ(load_records(dir / "run/records_multi_round.jsonl").size(), 30u);
  std::size_t single = 0;
  for (const auto& r : result.reports) {
    EXPECT_LE(r.acc_inst(), r.acc_cons());
    single += r.mode == Mode::single_round ? r.m : 0;
  }
  EXPECT_EQ(single, 30u);
}

TEST(Pipeline, RerunWithTheSameSeedIsByteIdentical) {
  TempDir a("rerun-a");
  TempDir b("rerun-b");
  run_pipeline(desk_config(a, 7));
  run_pipeline(desk_config(b, 7));
  for (const char* f : {"combinations.jsonl", "probes.jsonl", "difficulty.json", "evaluation/report.txt"}) {
    EXPECT_EQ(slurp(a / "run" / f), slurp(b / "run" / f)) << f;
  }
  TempDir c("rerun-c");
  run_pipeline(desk_config(c, 8));
  EXPECT_NE(slurp(a / "run/probes.jsonl"), slurp(c / "run/probes.jsonl"));
}

TEST(Pipeline, ResumesAfterAnInterruptedInferencePhase) {
  TempDir dir("kill");
  const auto config = desk_config(dir, 3);
  const auto first = run_pipeline(config);
  const auto report_before = slurp(dir / "run/evaluation/report.txt");

  // Simulate a kill midway through single-round inference.
  auto state = read_json_file(dir / "run/state.json");
  state["completed"] = {"synthesize", "calibrate", "reorder"};
  testing::write_file(dir / "run/state.json", state.dump());
  const auto records_path = dir / "run/records_single_round.jsonl";
  std::ifstream in(records_path);
  std::string kept;
  std::string line;
  for (int i = 0; i < 11 && std::getline(in, line); ++i) kept += line + "\n";
  in.close();
  testing::write_file(records_path, kept + line.substr(0, line.size() / 2));
  std::filesystem::remove(dir / "run/records_multi_round.jsonl");

  const auto second = run_pipeline(config);
  EXPECT_EQ(second.resumed_phases, (std::vector<std::string>{"synthesize", "calibrate", "reorder"}));
  const auto records = load_records(records_path);
  ASSERT_EQ(records.size(), 30u);
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.probe_id);
  EXPECT_EQ(ids.size(), 30u);
  EXPECT_EQ(slurp(dir / "run/evaluation/report.txt"), report_before);

  const auto third = run_pipeline(config);
  EXPECT_EQ(third.resumed_phases.size(), 5u);
}

TEST(Pipeline, DifferentConfigInTheSameDirectoryIsRejected) {
  TempDir dir("mismatch");
  run_pipeline(desk_config(dir, 1));
  EXPECT_THROW(run_pipeline(desk_config(dir, 2)), ConfigError);
}

TEST(Pipeline, PreparedDifficultySkipsCalibration) {
  TempDir dir("prepared");
  spread_table().save(dir / "table.json");
  auto config = desk_config(dir);
  config.difficulty = dir / "table.json";
  run_pipeline(config);
  EXPECT_FALSE(std::filesystem::exists(dir / "run/calibration_records.jsonl"));
  EXPECT_EQ(slurp(dir / "run/difficulty.json"), slurp(dir / "table.json"));
}

TEST(Config, ValidationErrors) {
  TempDir dir("config");
  auto c = desk_config(dir);
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.n = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.n_cc = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.targets = {1.5};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.seed.reset();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.modes.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"modes", {"batch"}}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"n", "seven"}}), ConfigError);
  EXPECT_THROW(RunConfig::load(dir / "missing.json"), ConfigError);
}

TEST(Config, SyntheticEndpointInheritsTheRunSeed) {
  TempDir dir("inherit");
  const auto c = desk_config(dir, 99);
  EXPECT_EQ(c.endpoint.synthetic_seed, 99u);
  EXPECT_EQ(c.seeds, dir / "seeds.jsonl");
  const auto j = c.to_json();
  EXPECT_EQ(RunConfig::from_json(j).to_json(), j);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PROBE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, PipelineRequiresASeed) {
  TempDir dir("cli");
  desk_config(dir);
  testing::write_file(dir / "config.json",
                      nlohmann::json{{"n", 7}, {"n_cc", 2}, {"targets", {1.0, -1.0}}, {"seeds", "seeds.jsonl"}, {"out_dir", "run"}}
                          .dump());
  const auto config = (dir / "config.json").string();
  EXPECT_NE(run_cli("pipeline --config " + config), 0);
  EXPECT_FALSE(std::filesystem::exists(dir / "run/probes.jsonl"));
  EXPECT_EQ(run_cli("pipeline --config " + config + " --seed 4"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "run/probes.jsonl"));
}

TEST(Cli, VerifyReportsThroughTheExitCode) {
  TempDir dir("cli-verify");
  testing::write_file(dir / "c.json", R"({"kind": "NoCommas", "params": {}, "variant_index": 0})");
  testing::write_file(dir / "ok.txt", "no commas here at all");
  testing::write_file(dir / "bad.txt", "one, two");
  const auto c = (dir / "c.json").string();
  EXPECT_EQ(run_cli("verify --constraint " + c + " --response " + (dir / "ok.txt").string()), 0);
  EXPECT_EQ(run_cli("verify --constraint " + c + " --response " + (dir / "bad.txt").string()), 3);
}

TEST(Cli, SynthesizeCountsProbes) {
  TempDir dir("cli-synth");
  write_seeds(dir / "seeds.jsonl", 5);
  spread_table().save(dir / "table.json");
  EXPECT_EQ(run_cli("synthesize --seeds " + (dir / "seeds.jsonl").string() + " --n 7 --n-cc 2 --targets 1,-0.05,-1 --seed 3" +
                    " --difficulty " + (dir / "table.json").string() + " --out " + (dir / "out").string()),
            0);
  std::ifstream in(dir / "out/probes.jsonl");
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) lines += line.empty() ? 0 : 1;
  EXPECT_EQ(lines, 30u);
}

}  // namespace
}  // namespace probe
