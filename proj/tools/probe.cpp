#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "probe/constraints.hpp"
#include "probe/error.hpp"
#include "probe/evaluation.hpp"
#include "probe/importance.hpp"
#include "probe/inference.hpp"
#include "probe/json_io.hpp"
#include "probe/log.hpp"
#include "probe/ordering.hpp"
#include "probe/pipeline.hpp"
#include "probe/synthesis.hpp"
#include "probe/verifier.hpp"

namespace {

using namespace probe;

log::Level parse_level(const std::string& name) {
  static const std::map<std::string, log::Level> levels{{"debug", log::Level::debug},
                                                        {"info", log::Level::info},
                                                        {"warn", log::Level::warn},
                                                        {"error", log::Level::error},
                                                        {"quiet", log::Level::quiet}};
  const auto it = levels.find(name);
  if (it == levels.end()) throw ArgumentError("unknown log level '" + name + "'");
  return it->second;
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  return read_text_file(path);
}

struct SynthesizeArgs {
  std::string seeds;
  std::size_t n = 7;
  std::size_t n_cc = 10;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string conflicts;
  std::string difficulty;
  std::vector<double> targets = default_targets();
  std::string search = "auto";
  std::size_t calibration_families = 0;
};

int cmd_synthesize(const SynthesizeArgs& a) {
  const auto seeds = load_seeds(a.seeds);
  const ConflictMatrix conflicts = a.conflicts.empty() ? ConflictMatrix::shared() : ConflictMatrix::load(a.conflicts);
  const auto combos = synthesize_combinations(Taxonomy::shared(), conflicts, a.n, a.n_cc, *a.seed);
  std::filesystem::create_directories(a.out);
  const std::filesystem::path out(a.out);
  save_combinations(out / "combinations.jsonl", combos);
  const auto calib = calibration_probes(seeds, combos, *a.seed, a.calibration_families);
  save_probes(out / "calibration_probes.jsonl", calib);
  std::cout << "combinations: " << combos.size() << "\ncalibration probes: " << calib.size() << "\n";
  if (!a.difficulty.empty()) {
    const auto table = DifficultyTable::load(a.difficulty);
    const auto probes = make_probes(seeds, combos, table, a.targets, parse_search_mode(a.search));
    save_probes(out / "probes.jsonl", probes);
    std::cout << "probes: " << probes.size() << "\n";
  }
  return 0;
}

struct CalibrateArgs {
  std::string probes;
  std::string records;
  std::string endpoint_config;
  std::string out;
  int max_tokens = 2048;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const auto probes = load_probes(a.probes);
  if (!a.endpoint_config.empty()) {
    const auto config = EndpointConfig::load(a.endpoint_config);
    const auto backend = make_backend(config);
    DecodeSettings decode;
    decode.max_tokens = a.max_tokens;
    Orchestrator orch(*backend, decode, config.max_parallel);
    const auto stats = orch.run(probes, Mode::single_round, a.records);
    log::info("calibration: " + std::to_string(stats.launched) + " run, " + std::to_string(stats.skipped) +
              " resumed, " + std::to_string(stats.errors) + " errors");
  }
  const auto records = load_records(a.records);
  const auto table = difficulty_from_records(records, probes);
  table.save(a.out);
  for (const auto& e : table.entries()) {
    std::printf("%-28s N=%-6zu Acc=%.4f Dff=%.6f\n", std::string(kind_name(e.kind)).c_str(), e.samples, e.accuracy,
                e.difficulty);
  }
  return 0;
}

struct ReorderArgs {
  std::string seeds;
  std::string combinations;
  std::string difficulty;
  std::vector<double> targets = default_targets();
  std::string search = "auto";
  std::string out;
};

int cmd_reorder(const ReorderArgs& a) {
  const auto seeds = load_seeds(a.seeds);
  const auto combos = load_combinations(a.combinations);
  const auto table = DifficultyTable::load(a.difficulty);
  const auto probes = make_probes(seeds, combos, table, a.targets, parse_search_mode(a.search));
  save_probes(a.out, probes);
  std::cout << "probes: " << probes.size() << "\n";
  return 0;
}

struct InferArgs {
  std::string mode = "single";
  std::string endpoint_config;
  std::string in;
  std::string out;
  int max_tokens = 2048;
  int max_parallel = 0;
};

int cmd_infer(const InferArgs& a) {
  const Mode mode = parse_mode(a.mode);
  const auto config = EndpointConfig::load(a.endpoint_config);
  const auto probes = load_probes(a.in);
  const auto backend = make_backend(config);
  DecodeSettings decode;
  decode.max_tokens = a.max_tokens;
  Orchestrator orch(*backend, decode, a.max_parallel > 0 ? a.max_parallel : config.max_parallel);
  const auto stats = orch.run(probes, mode, a.out);
  std::cout << "launched: " << stats.launched << "\nskipped: " << stats.skipped << "\nerrors: " << stats.errors
            << "\n";
  return 0;
}

struct EvaluateArgs {
  std::vector<std::string> records;
  std::string probes;
  std::string out;
  std::string format = "table";
  std::string difficulty;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const ReportFormat format = parse_report_format(a.format);
  const auto probes = load_probes(a.probes);
  std::vector<InferenceRecord> records;
  for (const auto& path : a.records) {
    auto part = load_records(path);
    records.insert(records.end(), part.begin(), part.end());
  }
  std::optional<DifficultyTable> table;
  if (!a.difficulty.empty()) table = DifficultyTable::load(a.difficulty);
  const auto result = evaluate_to_dir(records, probes, a.out, format, table ? &*table : nullptr);
  std::cout << emit_report(result.reports, ReportFormat::table, table ? &*table : nullptr);
  return 0;
}

struct RobustnessArgs {
  std::vector<std::string> runs;
  std::string probes;
  std::string method = "anova";
  std::string columns = "all";
  std::size_t permutations = 10000;
  std::uint64_t seed = 0;
};

int cmd_robustness(const RobustnessArgs& a) {
  RobustnessOptions options;
  if (a.method == "anova") options.method = RobustnessMethod::anova;
  else if (a.method == "permutation") options.method = RobustnessMethod::permutation;
  else throw ArgumentError("unknown method '" + a.method + "'");
  if (a.columns == "all") options.columns = RobustnessColumns::all_metrics;
  else if (a.columns == "groups") options.columns = RobustnessColumns::groups_only;
  else throw ArgumentError("unknown column set '" + a.columns + "'");
  options.permutations = a.permutations;
  options.seed = a.seed;

  const auto probes = load_probes(a.probes);
  // Every run contributes one report per (mode, CDDI) bucket.
  std::map<std::pair<int, double>, std::vector<EvaluationReport>> buckets;
  for (const auto& path : a.runs) {
    const auto records = load_records(path);
    const auto scored = score_all(records, probes);
    for (auto& r : aggregate(scored)) buckets[{static_cast<int>(r.mode), r.cddi}].push_back(std::move(r));
  }
  int compared = 0;
  for (const auto& [key, reports] : buckets) {
    if (reports.size() != a.runs.size()) continue;
    const auto result = robustness_test(reports, options);
    std::printf("%s CDDI=%.4f F=%.6g df=(%g, %g) p=%.6f\n", std::string(mode_name(reports.front().mode)).c_str(),
                reports.front().cddi, result.f, result.df_between, result.df_within, result.p_value);
    ++compared;
  }
  if (compared == 0) throw ArgumentError("no CDDI bucket is present in every run");
  return 0;
}

struct AttributeArgs {
  std::string matrices;
  std::string probes;
  std::string out;
  double scale = kDefaultImportanceScale;
  std::optional<double> floor;
};

int cmd_attribute(const AttributeArgs& a) {
  const auto matrices = load_matrices(a.matrices);
  const auto probes = load_probes(a.probes);
  NormalizeOptions options;
  options.scale = a.scale;
  options.floor = a.floor;
  ProfileStats stats;
  const auto profiles = aggregate_importance_to_dir(matrices, probes, a.out, options, &stats);
  std::cout << "joined: " << stats.joined << "\nskipped: " << stats.skipped << "\nprofiles: " << profiles.size()
            << "\n";
  return 0;
}

struct VerifyArgs {
  std::string constraint;
  std::string response = "-";
};

int cmd_verify(const VerifyArgs& a) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(std::filesystem::exists(a.constraint) ? read_text_file(a.constraint) : a.constraint);
  } catch (const nlohmann::json::parse_error& e) {
    throw ArgumentError(std::string("constraint is not valid JSON: ") + e.what());
  }
  ConstraintInstance c = constraint_from_json(j);
  const Verdict v = verify(read_input(a.response), c);
  std::cout << nlohmann::json{{"kind", kind_name(c.kind)}, {"satisfied", v.satisfied}, {"detail", v.detail}}.dump()
            << "\n";
  return v.satisfied ? 0 : 3;
}

struct PipelineArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_pipeline(const PipelineArgs& a) {
  auto j = read_json_file(a.config);
  j["seed"] = *a.seed;
  const auto base = std::filesystem::path(a.config).parent_path();
  RunConfig config = RunConfig::from_json(j, base);
  if (!a.out.empty()) config.out_dir = a.out;
  const auto result = run_pipeline(config);
  std::cout << "probes: " << result.probes << "\n";
  std::cout << emit_report(result.reports, ReportFormat::table, &result.table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-order probing toolkit"};
  app.require_subcommand(1);
  std::string data_dir;
  std::string level = "info";
  app.add_option("--data-dir", data_dir, "Directory with taxonomy, conflicts and language data");
  app.add_option("--log-level", level, "debug, info, warn, error or quiet");

  SynthesizeArgs syn;
  auto* s = app.add_subcommand("synthesize", "Sample constraint combinations and compose probes");
  s->add_option("--seeds", syn.seeds, "Seed instructions (JSONL)")->required();
  s->add_option("--n", syn.n, "Constraints per instruction");
  s->add_option("--n-cc", syn.n_cc, "Constraint combinations");
  s->add_option("--seed", syn.seed, "Random seed")->required();
  s->add_option("--out", syn.out, "Output directory")->required();
  s->add_option("--conflicts", syn.conflicts, "Conflict matrix override");
  s->add_option("--difficulty", syn.difficulty, "Difficulty table; also writes the CDDI probe grid");
  s->add_option("--targets", syn.targets, "CDDI targets")->delimiter(',');
  s->add_option("--search", syn.search, "auto, exhaustive or constructive");
  s->add_option("--calibration-families", syn.calibration_families, "Families in the calibration batch (0 = all)");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Estimate the difficulty table from a calibration batch");
  c->add_option("--probes", cal.probes, "Calibration probes (JSONL)")->required();
  c->add_option("--records", cal.records, "Calibration records (JSONL)")->required();
  c->add_option("--endpoint-config", cal.endpoint_config, "Run the batch against this endpoint first");
  c->add_option("--out", cal.out, "Difficulty table output")->required();
  c->add_option("--max-tokens", cal.max_tokens, "Generation cap");

  ReorderArgs reo;
  auto* r = app.add_subcommand("reorder", "Realize CDDI targets for every combination");
  r->add_option("--seeds", reo.seeds, "Seed instructions (JSONL)")->required();
  r->add_option("--combinations", reo.combinations, "Combinations (JSONL)")->required();
  r->add_option("--difficulty", reo.difficulty, "Difficulty table")->required();
  r->add_option("--targets", reo.targets, "CDDI targets")->delimiter(',');
  r->add_option("--search", reo.search, "auto, exhaustive or constructive");
  r->add_option("--out", reo.out, "Probes output (JSONL)")->required();

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Run probes against an endpoint");
  i->add_option("--mode", inf.mode, "single or multi");
  i->add_option("--endpoint-config", inf.endpoint_config, "Endpoint configuration (JSON)")->required();
  i->add_option("--in", inf.in, "Probes (JSONL)")->required();
  i->add_option("--out", inf.out, "Records (JSONL, appended and resumable)")->required();
  i->add_option("--max-tokens", inf.max_tokens, "Generation cap");
  i->add_option("--max-parallel", inf.max_parallel, "Concurrent conversations");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score records and write accuracy reports");
  e->add_option("--records", ev.records, "Records (JSONL)")->required();
  e->add_option("--probes", ev.probes, "Probes (JSONL)")->required();
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--format", ev.format, "csv or table");
  e->add_option("--difficulty", ev.difficulty, "Difficulty table for column order");

  RobustnessArgs rob;
  auto* b = app.add_subcommand("robustness", "Compare runs that share CDDI values");
  b->add_option("--runs", rob.runs, "Records of each run (JSONL)")->required()->expected(2, -1);
  b->add_option("--probes", rob.probes, "Probes (JSONL)")->required();
  b->add_option("--method", rob.method, "anova or permutation");
  b->add_option("--columns", rob.columns, "all or groups");
  b->add_option("--permutations", rob.permutations, "Permutations for the permutation test");
  b->add_option("--seed", rob.seed, "Random seed for the permutation test");

  AttributeArgs att;
  auto* t = app.add_subcommand("attribute-aggregate", "Aggregate token importance matrices");
  t->add_option("--matrices", att.matrices, "Raw importance matrices (JSONL)")->required();
  t->add_option("--probes", att.probes, "Probes (JSONL)")->required();
  t->add_option("--out", att.out, "Output directory")->required();
  t->add_option("--scale", att.scale, "Normalization scale L");
  t->add_option("--floor", att.floor, "Zero standardized values below this");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Check one response against one constraint");
  v->add_option("--constraint", ver.constraint, "Constraint JSON or a file holding it")->required();
  v->add_option("--response", ver.response, "Response file, - for stdin");

  PipelineArgs pip;
  auto* p = app.add_subcommand("pipeline", "Run every phase from one configuration");
  p->add_option("--config", pip.config, "Run configuration (JSON)")->required();
  p->add_option("--seed", pip.seed, "Random seed")->required();
  p->add_option("--out", pip.out, "Output directory override");

  CLI11_PARSE(app, argc, argv);

  try {
    log::set_level(parse_level(level));
    if (!data_dir.empty()) setenv("PROBE_DATA_DIR", data_dir.c_str(), 1);
    if (*s) return cmd_synthesize(syn);
    if (*c) return cmd_calibrate(cal);
    if (*r) return cmd_reorder(reo);
    if (*i) return cmd_infer(inf);
    if (*e) return cmd_evaluate(ev);
    if (*b) return cmd_robustness(rob);
    if (*t) return cmd_attribute(att);
    if (*v) return cmd_verify(ver);
    if (*p) return cmd_pipeline(pip);
  } catch (const ParseError& ex) {
    std::cerr << "parse error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
