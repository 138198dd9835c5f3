#include "probe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <boost/math/distributions/fisher_f.hpp>

#include "probe/error.hpp"
#include "probe/log.hpp"
#include "probe/rng.hpp"

namespace probe {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string csv_number(double v) { return fmt("%.17g", v); }

std::vector<Group> column_groups(const DifficultyTable* table) {
  std::vector<Group> out;
  if (table) out = table->groups_hardest_first();
  for (Group g : all_groups()) {
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

struct Anova {
  double f;
  double df_b;
  double df_w;
};

Anova anova_statistic(const std::vector<std::vector<double>>& groups) {
  std::size_t total = 0;
  double sum = 0.0;
  for (const auto& g : groups) {
    total += g.size();
    sum += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const double grand = sum / static_cast<double>(total);
  double ss_b = 0.0;
  double ss_w = 0.0;
  for (const auto& g : groups) {
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    ss_b += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double x : g) ss_w += (x - mean) * (x - mean);
  }
  const double df_b = static_cast<double>(groups.size() - 1);
  const double df_w = static_cast<double>(total - groups.size());
  // Rounding noise in identical groups must read as exactly zero.
  const double scale = std::max(1.0, std::fabs(grand));
  if (ss_b <= 1e-24 * scale * scale * static_cast<double>(total)) ss_b = 0.0;
  double f = 0.0;
  if (ss_b > 0.0) f = ss_w > 0.0 ? (ss_b / df_b) / (ss_w / df_w) : std::numeric_limits<double>::infinity();
  return {f, df_b, df_w};
}

void check_groups(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ArgumentError("robustness test needs at least 2 runs");
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw ArgumentError("robustness test run without observations");
    total += g.size();
  }
  if (total <= groups.size()) throw ArgumentError("robustness test needs more observations than runs");
}

}  // namespace

bool ScoredRecord::all_followed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](bool v) { return v; });
}

ScoredRecord score(const InferenceRecord& record, const ProbeInstance& probe, const Verifier& verifier) {
  if (record.probe_id != probe.probe_id) {
    throw JoinError("record " + record.probe_id + " does not belong to probe " + probe.probe_id);
  }
  ScoredRecord s;
  s.probe_id = probe.probe_id;
  s.target_cddi = probe.target_cddi;
  s.realized_cddi = probe.realized_cddi;
  s.mode = record.mode;
  s.errored = record.error.has_value();
  for (const auto& c : probe.constraints) {
    s.kinds.push_back(c.kind);
    s.verdicts.push_back(!s.errored && verifier.verify(record.final_response, c).satisfied);
  }
  return s;
}

std::vector<ScoredRecord> score_all(std::span<const InferenceRecord> records, std::span<const ProbeInstance> probes,
                                    Execution exec, const Verifier& verifier) {
  std::unordered_map<std::string_view, const ProbeInstance*> by_id;
  for (const auto& p : probes) by_id.emplace(p.probe_id, &p);
  std::vector<const ProbeInstance*> joined(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = by_id.find(records[i].probe_id);
    if (it == by_id.end()) throw JoinError("record " + records[i].probe_id + " has no matching probe");
    joined[i] = it->second;
  }
  std::vector<ScoredRecord> out(records.size());
  const auto count = static_cast<std::ptrdiff_t>(records.size());
  if (exec == Execution::serial) {
    for (std::ptrdiff_t i = 0; i < count; ++i) out[i] = score(records[i], *joined[i], verifier);
    return out;
  }
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < count; ++i) out[i] = score(records[i], *joined[i], verifier);
  return out;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json groups_json = nlohmann::json::object();
  for (Group g : all_groups()) {
    const auto& t = group(g);
    if (t.total > 0) groups_json[std::string(group_name(g))] = {{"followed", t.followed}, {"total", t.total}, {"accuracy", t.accuracy()}};
  }
  nlohmann::json kinds_json = nlohmann::json::object();
  for (Kind k : all_kinds()) {
    const auto& t = kind(k);
    if (t.total > 0) kinds_json[std::string(kind_name(k))] = {{"followed", t.followed}, {"total", t.total}, {"accuracy", t.accuracy()}};
  }
  nlohmann::json positions_json = nlohmann::json::array();
  for (const auto& t : positions) positions_json.push_back({{"followed", t.followed}, {"total", t.total}, {"accuracy", t.accuracy()}});
  return {{"cddi", cddi},           {"mode", mode_name(mode)},   {"m", m},
          {"n", n},                 {"errored", errored},        {"acc_cons", acc_cons()},
          {"acc_inst", acc_inst()}, {"groups", groups_json},     {"kinds", kinds_json},
          {"positions", positions_json}};
}

std::vector<EvaluationReport> aggregate(std::span<const ScoredRecord> scored) {
  std::map<std::pair<int, double>, EvaluationReport> buckets;
  for (const auto& s : scored) {
    if (s.kinds.size() != s.verdicts.size()) throw ArgumentError("verdicts misaligned for " + s.probe_id);
    auto [it, fresh] = buckets.try_emplace({static_cast<int>(s.mode), -s.realized_cddi});
    EvaluationReport& r = it->second;
    if (fresh) {
      r.cddi = s.realized_cddi;
      r.mode = s.mode;
    }
    ++r.m;
    r.errored += s.errored ? 1 : 0;
    r.n = std::max(r.n, s.verdicts.size());
    if (r.positions.size() < s.verdicts.size()) r.positions.resize(s.verdicts.size());
    for (std::size_t j = 0; j < s.verdicts.size(); ++j) {
      const bool ok = s.verdicts[j];
      r.constraints.add(ok);
      r.positions[j].add(ok);
      r.kinds[static_cast<std::size_t>(s.kinds[j])].add(ok);
      r.groups[static_cast<std::size_t>(group_of(s.kinds[j]))].add(ok);
    }
    r.instructions_followed += s.all_followed() ? 1 : 0;
  }
  std::vector<EvaluationReport> out;
  out.reserve(buckets.size());
  for (auto& [key, r] : buckets) out.push_back(std::move(r));
  return out;
}

std::vector<FollowRecord> follow_records(std::span<const ScoredRecord> scored) {
  std::vector<FollowRecord> out;
  for (const auto& s : scored) {
    for (std::size_t j = 0; j < s.kinds.size(); ++j) out.push_back({s.kinds[j], s.verdicts[j]});
  }
  return out;
}

RobustnessResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  check_groups(groups);
  const Anova a = anova_statistic(groups);
  RobustnessResult r{a.f, a.df_b, a.df_w, 1.0};
  if (a.f == 0.0) return r;
  if (std::isinf(a.f)) {
    r.p_value = 0.0;
    return r;
  }
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::fisher_f(a.df_b, a.df_w), a.f));
  return r;
}

RobustnessResult permutation_anova(const std::vector<std::vector<double>>& groups, std::size_t permutations,
                                   std::uint64_t seed) {
  check_groups(groups);
  if (permutations == 0) throw ArgumentError("permutation count must be positive");
  const Anova observed = anova_statistic(groups);
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
  Rng rng(seed);
  std::size_t at_least = 0;
  std::vector<std::vector<double>> shuffled(groups.size());
  for (std::size_t k = 0; k < permutations; ++k) {
    rng.shuffle(std::span<double>(pooled));
    std::size_t at = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      shuffled[g].assign(pooled.begin() + static_cast<std::ptrdiff_t>(at),
                         pooled.begin() + static_cast<std::ptrdiff_t>(at + groups[g].size()));
      at += groups[g].size();
    }
    at_least += anova_statistic(shuffled).f >= observed.f ? 1 : 0;
  }
  return {observed.f, observed.df_b, observed.df_w,
          static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1)};
}

std::vector<double> metric_columns(const EvaluationReport& report, RobustnessColumns columns) {
  std::vector<double> out;
  for (Group g : all_groups()) {
    if (report.group(g).total > 0) out.push_back(100.0 * report.group(g).accuracy());
  }
  if (columns == RobustnessColumns::all_metrics) {
    out.push_back(100.0 * report.acc_cons());
    out.push_back(100.0 * report.acc_inst());
  }
  return out;
}

RobustnessResult robustness_test(std::span<const EvaluationReport> runs, const RobustnessOptions& options) {
  if (runs.size() < 2) throw ArgumentError("robustness test needs at least 2 runs");
  std::vector<std::vector<double>> groups;
  for (const auto& run : runs) {
    for (Group g : all_groups()) {
      if ((run.group(g).total > 0) != (runs.front().group(g).total > 0)) {
        throw ArgumentError("runs do not cover the same constraint groups");
      }
    }
    groups.push_back(metric_columns(run, options.columns));
  }
  return options.method == RobustnessMethod::anova ? one_way_anova(groups)
                                                   : permutation_anova(groups, options.permutations, options.seed);
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "table" || name == "table_text") return ReportFormat::table;
  if (name == "csv") return ReportFormat::csv;
  throw ArgumentError("unknown report format '" + std::string(name) + "'");
}

std::string emit_report(std::span<const EvaluationReport> reports, ReportFormat format, const DifficultyTable* table) {
  const auto groups = column_groups(table);
  std::vector<std::string> header{"Mode", "CDDI", "m", "n"};
  for (Group g : groups) header.push_back(std::string(group_name(g)) + " (%)");
  header.push_back("C_level (%)");
  header.push_back("I_level (%)");

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    if (r.m == 0) {
      log::warn("omitting empty bucket at CDDI " + fmt("%.4f", r.cddi));
      continue;
    }
    const bool csv = format == ReportFormat::csv;
    const auto pct = [&](double v) { return csv ? csv_number(100.0 * v) : fmt("%.2f", 100.0 * v); };
    std::vector<std::string> row{std::string(mode_name(r.mode)), csv ? csv_number(r.cddi) : fmt("%.4f", r.cddi),
                                 std::to_string(r.m), std::to_string(r.n)};
    for (Group g : groups) row.push_back(r.group(g).total > 0 ? pct(r.group(g).accuracy()) : (csv ? "" : "-"));
    row.push_back(pct(r.acc_cons()));
    row.push_back(pct(r.acc_inst()));
    rows.push_back(std::move(row));
  }

  std::ostringstream out;
  if (format == ReportFormat::csv) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
    return out.str();
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      out << std::string(width[c] - cells[c].size(), ' ') << cells[c];
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : rows) line(row);
  return out.str();
}

std::string emit_kind_report(std::span<const EvaluationReport> reports, ReportFormat format) {
  std::ostringstream out;
  const bool csv = format == ReportFormat::csv;
  const char* sep = csv ? "," : "\t";
  out << "Kind" << sep << "Group";
  for (const auto& r : reports) {
    out << sep << mode_name(r.mode) << '@' << (csv ? csv_number(r.cddi) : fmt("%.4f", r.cddi)) << " (%)";
  }
  out << '\n';
  for (Kind k : all_kinds()) {
    const bool seen = std::any_of(reports.begin(), reports.end(), [&](const auto& r) { return r.kind(k).total > 0; });
    if (!seen) continue;
    out << kind_name(k) << sep << group_name(group_of(k));
    for (const auto& r : reports) {
      out << sep;
      if (r.kind(k).total > 0) out << (csv ? csv_number(100.0 * r.kind(k).accuracy()) : fmt("%.2f", 100.0 * r.kind(k).accuracy()));
      else if (!csv) out << '-';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace probe
