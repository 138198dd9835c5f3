#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "probe/evaluation.hpp"
#include "probe/execution.hpp"
#include "probe/importance.hpp"
#include "probe/inference.hpp"
#include "probe/ordering.hpp"
#include "probe/synthesis.hpp"

namespace probe {

struct RunConfig {
  std::size_t n = 7;
  std::size_t n_cc = 10;
  std::vector<double> targets = default_targets();
  std::filesystem::path seeds;
  EndpointConfig endpoint;
  nlohmann::json endpoint_json = nlohmann::json::object();  // as configured
  std::vector<Mode> modes{Mode::single_round};
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  SearchMode search = SearchMode::automatic;
  // A prepared difficulty table skips the calibration batch.
  std::optional<std::filesystem::path> difficulty;
  // Families used for calibration; 0 means all.
  std::size_t calibration_families = 0;
  DecodeSettings decode;
  ReportFormat format = ReportFormat::table;
  std::optional<std::filesystem::path> matrices;
  std::optional<std::filesystem::path> conflicts;

  // Relative paths resolve against `base_dir`. A synthetic endpoint without
  // its own seed takes the run seed.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // ConfigError for n < 2, n_cc < 1, targets outside [-1, 1], no modes or
  // a missing seed.
  void validate() const;
};

std::vector<ConstraintCombination> synthesize_combinations(const Taxonomy& taxonomy, const ConflictMatrix& conflicts,
                                                           std::size_t n, std::size_t n_cc, std::uint64_t seed);

ProbeInstance make_probe(const SeedInstruction& seed, const ConstraintCombination& combination,
                         const std::vector<std::size_t>& order, std::string probe_id);

// One uniformly random order per seed x combination family; `limit` keeps
// a random subset of families (0 keeps all).
std::vector<ProbeInstance> calibration_probes(std::span<const SeedInstruction> seeds,
                                              std::span<const ConstraintCombination> combinations,
                                              std::uint64_t seed, std::size_t limit = 0);

// Target orders for each combination.
std::vector<std::vector<OrderWithIndex>> orders_for_combinations(std::span<const ConstraintCombination> combinations,
                                                                 const DifficultyTable& table,
                                                                 std::span<const double> targets, SearchMode mode,
                                                                 Execution exec = Execution::parallel);

// seeds x combinations x targets probes, seed-major.
std::vector<ProbeInstance> make_probes(std::span<const SeedInstruction> seeds,
                                       std::span<const ConstraintCombination> combinations,
                                       const DifficultyTable& table, std::span<const double> targets,
                                       SearchMode mode = SearchMode::automatic, Execution exec = Execution::parallel);

// Difficulty over the kinds the probes use, from scored calibration runs.
DifficultyTable difficulty_from_records(std::span<const InferenceRecord> records,
                                        std::span<const ProbeInstance> probes);

std::vector<ConstraintCombination> load_combinations(const std::filesystem::path& path);
void save_combinations(const std::filesystem::path& path, std::span<const ConstraintCombination> combinations);
void save_probes(const std::filesystem::path& path, std::span<const ProbeInstance> probes);

struct EvaluationOutputs {
  std::vector<EvaluationReport> reports;
  std::size_t scored = 0;
  std::size_t errored = 0;
};

// Scores records against probes and writes the report files into `out_dir`.
EvaluationOutputs evaluate_to_dir(std::span<const InferenceRecord> records, std::span<const ProbeInstance> probes,
                                  const std::filesystem::path& out_dir, ReportFormat format,
                                  const DifficultyTable* table);

// Builds importance profiles and writes their tables and plot into `out_dir`.
std::vector<ImportanceProfile> aggregate_importance_to_dir(std::span<const RawImportanceMatrix> matrices,
                                                           std::span<const ProbeInstance> probes,
                                                           const std::filesystem::path& out_dir,
                                                           const NormalizeOptions& options, ProfileStats* stats = nullptr);

struct PipelineResult {
  std::size_t probes = 0;
  DifficultyTable table;
  std::vector<EvaluationReport> reports;
  std::vector<std::string> resumed_phases;
};

// synthesize, calibrate, reorder, infer, evaluate and, when matrices are
// configured, attribute-aggregate. Each artifact is written atomically and a
// state file records finished phases, so a rerun continues where the last
// one stopped. A different configuration in the same directory is a
// ConfigError.
PipelineResult run_pipeline(const RunConfig& config, ChatBackend* backend_override = nullptr);

}  // namespace probe
