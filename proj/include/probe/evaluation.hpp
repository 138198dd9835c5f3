#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "probe/constraints.hpp"
#include "probe/execution.hpp"
#include "probe/inference.hpp"
#include "probe/ordering.hpp"
#include "probe/synthesis.hpp"
#include "probe/verifier.hpp"

namespace probe {

struct ScoredRecord {
  std::string probe_id;
  std::vector<Kind> kinds;      // presented order
  std::vector<bool> verdicts;   // aligned to kinds
  double target_cddi = 0.0;
  double realized_cddi = 0.0;
  Mode mode = Mode::single_round;
  bool errored = false;

  bool all_followed() const;
};

// JoinError when the ids differ. A record carrying an error scores false on
// every constraint and is flagged.
ScoredRecord score(const InferenceRecord& record, const ProbeInstance& probe,
                   const Verifier& verifier = Verifier::shared());

// Joins records to probes by id (JoinError for a record without a probe).
std::vector<ScoredRecord> score_all(std::span<const InferenceRecord> records, std::span<const ProbeInstance> probes,
                                    Execution exec = Execution::parallel, const Verifier& verifier = Verifier::shared());

struct Tally {
  std::size_t followed = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(followed) / static_cast<double>(total); }
  void add(bool ok) {
    followed += ok ? 1 : 0;
    ++total;
  }
};

struct EvaluationReport {
  double cddi = 0.0;
  Mode mode = Mode::single_round;
  std::size_t m = 0;  // records
  std::size_t n = 0;  // constraints per record (largest seen)
  std::size_t errored = 0;
  std::array<Tally, kGroupCount> groups{};
  std::array<Tally, kKindCount> kinds{};
  std::vector<Tally> positions;
  Tally constraints;  // every verdict
  std::size_t instructions_followed = 0;

  double acc_cons() const { return constraints.accuracy(); }
  double acc_inst() const { return m == 0 ? 0.0 : static_cast<double>(instructions_followed) / static_cast<double>(m); }
  const Tally& group(Group g) const { return groups[static_cast<std::size_t>(g)]; }
  const Tally& kind(Kind k) const { return kinds[static_cast<std::size_t>(k)]; }

  nlohmann::json to_json() const;
};

// One report per (realized CDDI, mode), modes in declaration order and CDDI
// descending. Realized values are compared exactly.
std::vector<EvaluationReport> aggregate(std::span<const ScoredRecord> scored);

// Per-kind follow records for difficulty estimation.
std::vector<FollowRecord> follow_records(std::span<const ScoredRecord> scored);

enum class RobustnessColumns { all_metrics, groups_only };
enum class RobustnessMethod { anova, permutation };

struct RobustnessOptions {
  RobustnessColumns columns = RobustnessColumns::all_metrics;
  RobustnessMethod method = RobustnessMethod::anova;
  std::size_t permutations = 10000;
  std::uint64_t seed = 0;
};

struct RobustnessResult {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p_value = 1.0;
};

// One-way ANOVA with the runs as groups; observations are the accuracy
// columns of each run in percent.
RobustnessResult one_way_anova(const std::vector<std::vector<double>>& groups);

// Same statistic; p is the share of label permutations with F at least the
// observed one.
RobustnessResult permutation_anova(const std::vector<std::vector<double>>& groups, std::size_t permutations,
                                   std::uint64_t seed);

// Metric columns of one run: group accuracies in taxonomy order, then
// Acc_cons and Acc_inst unless groups_only. Groups without verdicts are
// left out, so runs must cover the same groups.
std::vector<double> metric_columns(const EvaluationReport& report, RobustnessColumns columns);

// ArgumentError for fewer than 2 runs or mismatched columns.
RobustnessResult robustness_test(std::span<const EvaluationReport> runs, const RobustnessOptions& options = {});

enum class ReportFormat { table, csv };

ReportFormat parse_report_format(std::string_view name);

// Rows are the reports with at least one record; groups are ordered
// hardest-first by the table when given, taxonomy order otherwise.
// Accuracies are percentages.
std::string emit_report(std::span<const EvaluationReport> reports, ReportFormat format,
                        const DifficultyTable* table = nullptr);

// Per-kind accuracy rows, one column per report.
std::string emit_kind_report(std::span<const EvaluationReport> reports, ReportFormat format);

}  // namespace probe
