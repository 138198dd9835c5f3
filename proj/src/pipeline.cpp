#include "probe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/log.hpp"
#include "probe/plot.hpp"

namespace probe {

namespace {

constexpr const char* kStateFile = "state.json";

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string target_tag(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "t%02zu", index);
  return buf;
}

std::string jsonl(std::span<const nlohmann::json> items) {
  std::string out;
  for (const auto& j : items) out += j.dump() + "\n";
  return out;
}

class PhaseState {
 public:
  PhaseState(std::filesystem::path dir, nlohmann::json config) : path_(dir / kStateFile), config_(std::move(config)) {
    if (std::filesystem::exists(path_)) {
      const auto j = read_json_file(path_);
      if (j.at("config") != config_) {
        throw ConfigError("output directory " + dir.string() + " holds a run with a different configuration");
      }
      for (const auto& p : j.at("completed")) done_.insert(p.get<std::string>());
    }
  }

  bool done(const std::string& phase) const { return done_.count(phase) > 0; }

  void finish(const std::string& phase) {
    done_.insert(phase);
    write_file_atomic(path_, nlohmann::json{{"config", config_}, {"completed", done_}}.dump(2) + "\n");
  }

 private:
  std::filesystem::path path_;
  nlohmann::json config_;
  std::set<std::string> done_;
};

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    c.n = j.value("n", c.n);
    c.n_cc = j.value("n_cc", c.n_cc);
    if (j.contains("targets")) c.targets = j.at("targets").get<std::vector<double>>();
    if (j.contains("seeds")) c.seeds = resolve(base_dir, j.at("seeds").get<std::string>());
    if (j.contains("endpoint")) {
      c.endpoint_json = j.at("endpoint");
    } else if (j.contains("endpoint_config")) {
      c.endpoint_json = read_json_file(resolve(base_dir, j.at("endpoint_config").get<std::string>()));
    } else {
      c.endpoint_json = {{"kind", "synthetic"}};
    }
    if (j.contains("modes")) {
      c.modes.clear();
      for (const auto& m : j.at("modes")) c.modes.push_back(parse_mode(m.get<std::string>()));
    }
    if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j.at("out_dir").get<std::string>());
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("search")) c.search = parse_search_mode(j.at("search").get<std::string>());
    if (j.contains("difficulty")) c.difficulty = resolve(base_dir, j.at("difficulty").get<std::string>());
    c.calibration_families = j.value("calibration_families", c.calibration_families);
    c.decode.greedy = j.value("greedy", c.decode.greedy);
    c.decode.max_tokens = j.value("max_tokens", c.decode.max_tokens);
    if (j.contains("format")) c.format = parse_report_format(j.at("format").get<std::string>());
    if (j.contains("matrices")) c.matrices = resolve(base_dir, j.at("matrices").get<std::string>());
    if (j.contains("conflicts")) c.conflicts = resolve(base_dir, j.at("conflicts").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid run configuration: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("invalid run configuration: ") + e.what());
  }
  if (c.seed && c.endpoint_json.value("kind", std::string("http")) == "synthetic" &&
      !c.endpoint_json.contains("synthetic_seed")) {
    c.endpoint_json["synthetic_seed"] = *c.seed;
  }
  c.endpoint = EndpointConfig::from_json(c.endpoint_json);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("run configuration not found: " + path.string());
  return from_json(read_json_file(path), path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json modes_json = nlohmann::json::array();
  for (Mode m : modes) modes_json.push_back(mode_name(m));
  nlohmann::json endpoint_view = endpoint_json;
  // Tuning knobs that do not change results may differ between resumes.
  for (const char* k : {"max_parallel", "timeout_seconds", "max_retries", "backoff_initial_seconds", "backoff_max_seconds"}) {
    endpoint_view.erase(k);
  }
  const char* search_names[] = {"auto", "exhaustive", "constructive"};
  nlohmann::json j{{"n", n},
                   {"n_cc", n_cc},
                   {"targets", targets},
                   {"seeds", seeds.string()},
                   {"endpoint", endpoint_view},
                   {"modes", modes_json},
                   {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)},
                   {"search", search_names[static_cast<int>(search)]},
                   {"calibration_families", calibration_families},
                   {"greedy", decode.greedy},
                   {"max_tokens", decode.max_tokens}};
  if (difficulty) j["difficulty"] = difficulty->string();
  if (matrices) j["matrices"] = matrices->string();
  if (conflicts) j["conflicts"] = conflicts->string();
  return j;
}

void RunConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2");
  if (n_cc < 1) throw ConfigError("n_cc must be at least 1");
  if (targets.empty()) throw ConfigError("no CDDI targets");
  for (double t : targets) {
    if (!(t >= -1.0 && t <= 1.0)) throw ConfigError("CDDI target outside [-1, 1]");
  }
  if (modes.empty()) throw ConfigError("no inference modes");
  if (!seed) throw ConfigError("a random seed is required");
  if (seeds.empty()) throw ConfigError("no seeds file");
  if (out_dir.empty()) throw ConfigError("no output directory");
}

std::vector<ConstraintCombination> synthesize_combinations(const Taxonomy& taxonomy, const ConflictMatrix& conflicts,
                                                           std::size_t n, std::size_t n_cc, std::uint64_t seed) {
  Rng rng = Rng(seed).derive("combinations");
  return sample_combinations(taxonomy, conflicts, n, n_cc, rng);
}

ProbeInstance make_probe(const SeedInstruction& seed, const ConstraintCombination& combination,
                         const std::vector<std::size_t>& order, std::string probe_id) {
  ComposedInstruction composed = compose(seed, combination, order);
  ProbeInstance p;
  p.probe_id = std::move(probe_id);
  p.seed_id = seed.id;
  p.seed_text = seed.text;
  p.combination_id = combination.id;
  p.constraints = std::move(composed.ordered);
  p.spans = std::move(composed.spans);
  p.text = std::move(composed.text);
  return p;
}

std::vector<ProbeInstance> calibration_probes(std::span<const SeedInstruction> seeds,
                                              std::span<const ConstraintCombination> combinations,
                                              std::uint64_t seed, std::size_t limit) {
  std::vector<std::pair<std::size_t, std::size_t>> families;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (std::size_t c = 0; c < combinations.size(); ++c) families.emplace_back(s, c);
  }
  if (limit > 0 && limit < families.size()) {
    Rng pick = Rng(seed).derive("calibration-families");
    pick.shuffle(std::span(families));
    families.resize(limit);
    std::sort(families.begin(), families.end());
  }
  std::vector<ProbeInstance> out;
  out.reserve(families.size());
  for (const auto& [s, c] : families) {
    const auto& comb = combinations[c];
    std::vector<std::size_t> order(comb.members.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng(seed).derive("calibration/" + seeds[s].id + "/" + comb.id);
    rng.shuffle(std::span(order));
    out.push_back(make_probe(seeds[s], comb, order, seeds[s].id + "/" + comb.id + "/calib"));
  }
  return out;
}

std::vector<std::vector<OrderWithIndex>> orders_for_combinations(std::span<const ConstraintCombination> combinations,
                                                                 const DifficultyTable& table,
                                                                 std::span<const double> targets, SearchMode mode,
                                                                 Execution exec) {
  std::vector<std::vector<Kind>> kinds(combinations.size());
  for (std::size_t c = 0; c < combinations.size(); ++c) {
    for (const auto& m : combinations[c].members) kinds[c].push_back(m.kind);
  }
  std::vector<std::vector<OrderWithIndex>> out(combinations.size());
  const auto count = static_cast<std::ptrdiff_t>(combinations.size());
  if (exec == Execution::serial) {
    for (std::ptrdiff_t c = 0; c < count; ++c) out[c] = orders_for_targets(kinds[c], table, targets, mode);
    return out;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    try {
      out[c] = orders_for_targets(kinds[c], table, targets, mode);
    } catch (...) {
#pragma omp critical(probe_orders_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<ProbeInstance> make_probes(std::span<const SeedInstruction> seeds,
                                       std::span<const ConstraintCombination> combinations,
                                       const DifficultyTable& table, std::span<const double> targets, SearchMode mode,
                                       Execution exec) {
  const auto orders = orders_for_combinations(combinations, table, targets, mode, exec);
  std::vector<ProbeInstance> out;
  out.reserve(seeds.size() * combinations.size() * targets.size());
  for (const auto& seed : seeds) {
    for (std::size_t c = 0; c < combinations.size(); ++c) {
      for (std::size_t t = 0; t < orders[c].size(); ++t) {
        const auto& o = orders[c][t];
        ProbeInstance p = make_probe(seed, combinations[c], o.order,
                                     seed.id + "/" + combinations[c].id + "/" + target_tag(t));
        p.target_cddi = o.target_cddi;
        p.realized_cddi = o.realized_cddi;
        p.discordant_pairs = o.discordant;
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

DifficultyTable difficulty_from_records(std::span<const InferenceRecord> records,
                                        std::span<const ProbeInstance> probes) {
  std::set<Kind> scope;
  for (const auto& p : probes) {
    for (const auto& c : p.constraints) scope.insert(c.kind);
  }
  const auto scored = score_all(records, probes);
  const auto follows = follow_records(scored);
  const std::vector<Kind> kinds(scope.begin(), scope.end());
  return estimate_difficulty(follows, kinds);
}

std::vector<ConstraintCombination> load_combinations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("combinations file not found: " + path.string());
  std::vector<ConstraintCombination> out;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      out.push_back(ConstraintCombination::from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid combination: ") + e.what(), line);
    }
  });
  return out;
}

void save_combinations(const std::filesystem::path& path, std::span<const ConstraintCombination> combinations) {
  std::vector<nlohmann::json> items;
  for (const auto& c : combinations) items.push_back(c.to_json());
  write_file_atomic(path, jsonl(items));
}

void save_probes(const std::filesystem::path& path, std::span<const ProbeInstance> probes) {
  std::string out;
  for (const auto& p : probes) out += p.to_json().dump() + "\n";
  write_file_atomic(path, out);
}

EvaluationOutputs evaluate_to_dir(std::span<const InferenceRecord> records, std::span<const ProbeInstance> probes,
                                  const std::filesystem::path& out_dir, ReportFormat format,
                                  const DifficultyTable* table) {
  std::filesystem::create_directories(out_dir);
  EvaluationOutputs out;
  const auto scored = score_all(records, probes);
  out.scored = scored.size();
  for (const auto& s : scored) out.errored += s.errored ? 1 : 0;
  if (out.errored > 0) log::warn(std::to_string(out.errored) + " records carry errors and score as unfollowed");
  out.reports = aggregate(scored);

  const bool csv = format == ReportFormat::csv;
  write_file_atomic(out_dir / (csv ? "report.csv" : "report.txt"), emit_report(out.reports, format, table));
  write_file_atomic(out_dir / (csv ? "kinds.csv" : "kinds.txt"), emit_kind_report(out.reports, format));
  nlohmann::json reports_json = nlohmann::json::array();
  for (const auto& r : out.reports) reports_json.push_back(r.to_json());
  write_file_atomic(out_dir / "report.json", reports_json.dump(2) + "\n");
  std::string scored_lines;
  for (const auto& s : scored) {
    nlohmann::json kinds = nlohmann::json::array();
    for (Kind k : s.kinds) kinds.push_back(kind_name(k));
    scored_lines += nlohmann::json{{"probe_id", s.probe_id},
                                   {"mode", mode_name(s.mode)},
                                   {"order", kinds},
                                   {"verdicts", s.verdicts},
                                   {"realized_cddi", s.realized_cddi},
                                   {"errored", s.errored}}
                        .dump() +
                    "\n";
  }
  write_file_atomic(out_dir / "scored.jsonl", scored_lines);
  write_file_atomic(out_dir / "accuracy.svg", render_svg(accuracy_plot(out.reports)));
  return out;
}

std::vector<ImportanceProfile> aggregate_importance_to_dir(std::span<const RawImportanceMatrix> matrices,
                                                           std::span<const ProbeInstance> probes,
                                                           const std::filesystem::path& out_dir,
                                                           const NormalizeOptions& options, ProfileStats* stats) {
  std::filesystem::create_directories(out_dir);
  const auto profiles = build_profiles(matrices, probes, options, stats);
  write_file_atomic(out_dir / "position_profile.csv", emit_position_profiles(profiles));
  write_file_atomic(out_dir / "group_profile.csv", emit_group_profiles(profiles));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : profiles) j.push_back(p.to_json());
  write_file_atomic(out_dir / "importance.json", j.dump(2) + "\n");
  write_file_atomic(out_dir / "importance.svg", render_svg(importance_plot(profiles)));
  return profiles;
}

PipelineResult run_pipeline(const RunConfig& config, ChatBackend* backend_override) {
  config.validate();
  const auto& dir = config.out_dir;
  std::filesystem::create_directories(dir);
  PhaseState state(dir, config.to_json());
  PipelineResult result;
  const std::uint64_t seed = *config.seed;

  const Taxonomy& taxonomy = Taxonomy::shared();
  const auto seeds = load_seeds(config.seeds);
  if (seeds.empty()) throw ConfigError("seeds file is empty: " + config.seeds.string());

  std::unique_ptr<ChatBackend> owned;
  ChatBackend* backend = backend_override;
  const auto get_backend = [&]() -> ChatBackend& {
    if (!backend) {
      owned = make_backend(config.endpoint);
      backend = owned.get();
    }
    return *backend;
  };
  const auto resumed = [&](const char* phase) {
    result.resumed_phases.emplace_back(phase);
    log::info(std::string("phase ") + phase + " already complete");
  };

  // synthesize
  const auto combos_path = dir / "combinations.jsonl";
  std::vector<ConstraintCombination> combos;
  if (state.done("synthesize") && std::filesystem::exists(combos_path)) {
    combos = load_combinations(combos_path);
    resumed("synthesize");
  } else {
    const ConflictMatrix conflicts =
        config.conflicts ? ConflictMatrix::load(*config.conflicts) : ConflictMatrix::shared();
    combos = synthesize_combinations(taxonomy, conflicts, config.n, config.n_cc, seed);
    save_combinations(combos_path, combos);
    state.finish("synthesize");
  }

  // calibrate
  const auto table_path = dir / "difficulty.json";
  if (state.done("calibrate") && std::filesystem::exists(table_path)) {
    result.table = DifficultyTable::load(table_path);
    resumed("calibrate");
  } else if (config.difficulty) {
    result.table = DifficultyTable::load(*config.difficulty);
    result.table.save(table_path);
    state.finish("calibrate");
  } else {
    const auto probes = calibration_probes(seeds, combos, seed, config.calibration_families);
    save_probes(dir / "calibration_probes.jsonl", probes);
    const auto records_path = dir / "calibration_records.jsonl";
    Orchestrator orch(get_backend(), config.decode, config.endpoint.max_parallel);
    const auto stats = orch.run(probes, Mode::single_round, records_path);
    log::info("calibration: " + std::to_string(stats.launched) + " run, " + std::to_string(stats.skipped) +
              " resumed, " + std::to_string(stats.errors) + " errors");
    const auto records = load_records(records_path);
    result.table = difficulty_from_records(records, probes);
    result.table.save(table_path);
    state.finish("calibrate");
  }

  // reorder
  const auto probes_path = dir / "probes.jsonl";
  std::vector<ProbeInstance> probes;
  if (state.done("reorder") && std::filesystem::exists(probes_path)) {
    probes = load_probes(probes_path);
    resumed("reorder");
  } else {
    probes = make_probes(seeds, combos, result.table, config.targets, config.search);
    save_probes(probes_path, probes);
    state.finish("reorder");
  }
  result.probes = probes.size();

  // infer
  std::vector<InferenceRecord> records;
  for (Mode mode : config.modes) {
    const auto path = dir / ("records_" + std::string(mode_name(mode)) + ".jsonl");
    const std::string phase = "infer:" + std::string(mode_name(mode));
    if (state.done(phase) && std::filesystem::exists(path)) {
      resumed(phase.c_str());
    } else {
      Orchestrator orch(get_backend(), config.decode, config.endpoint.max_parallel);
      const auto stats = orch.run(probes, mode, path);
      log::info(std::string(mode_name(mode)) + ": " + std::to_string(stats.launched) + " run, " +
                std::to_string(stats.skipped) + " resumed, " + std::to_string(stats.errors) + " errors");
      state.finish(phase);
    }
    auto part = load_records(path);
    records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }

  // evaluate
  result.reports = evaluate_to_dir(records, probes, dir / "evaluation", config.format, &result.table).reports;
  state.finish("evaluate");

  // attribute-aggregate
  if (config.matrices) {
    const auto matrices = load_matrices(*config.matrices);
    ProfileStats stats;
    aggregate_importance_to_dir(matrices, probes, dir / "importance", {}, &stats);
    log::info("importance: " + std::to_string(stats.joined) + " joined, " + std::to_string(stats.skipped) + " skipped");
    state.finish("attribute-aggregate");
  }
  return result;
}

}  // namespace probe
