#include "probe/importance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/log.hpp"

namespace probe {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Spans line up one-to-one with the probe's constraints.
bool spans_match(const RawImportanceMatrix& m, const ProbeInstance& p) {
  if (m.constraint_spans.size() != p.constraints.size()) return false;
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    if (m.constraint_spans[i].kind != kind_name(p.constraints[i].kind)) return false;
  }
  return true;
}

struct Weights {
  std::vector<double> per_position;
  double total = 0.0;
};

Weights instance_weights(const RawImportanceMatrix& m, const NormalizeOptions& options) {
  const StandardizedMatrix s = normalize(m, options);
  if (s.skipped_columns() > 0) {
    log::warn(m.probe_id + ": skipped " + std::to_string(s.skipped_columns()) + " all-zero response columns");
  }
  Weights w;
  for (const auto& span : m.constraint_spans) {
    w.per_position.push_back(constraint_weight(s, span, m.response_token_count));
    w.total += w.per_position.back();
  }
  return w;
}

}  // namespace

void RawImportanceMatrix::validate() const {
  if (probe_id.empty()) throw DataError("importance matrix without probe_id");
  if (response_token_count == 0) throw DataError(probe_id + ": response_token_count must be positive");
  if (matrix.size() != rows() * cols()) {
    throw DataError(probe_id + ": matrix has " + std::to_string(matrix.size()) + " values, expected " +
                    std::to_string(rows()) + " x " + std::to_string(cols()));
  }
  for (double v : matrix) {
    if (!std::isfinite(v)) throw DataError(probe_id + ": non-finite importance value");
  }
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (const auto& s : constraint_spans) {
    if (s.token_start >= s.token_end || s.token_end > rows()) {
      throw DataError(probe_id + ": constraint span [" + std::to_string(s.token_start) + ", " +
                      std::to_string(s.token_end) + ") outside the instruction");
    }
    ranges.emplace_back(s.token_start, s.token_end);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first < ranges[i - 1].second) throw DataError(probe_id + ": constraint spans overlap");
  }
}

nlohmann::json RawImportanceMatrix::to_json() const {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : instruction_tokens) {
    tokens.push_back({{"text", t.text}, {"char_start", t.char_start}, {"char_end", t.char_end}});
  }
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : constraint_spans) {
    spans.push_back({{"kind", s.kind}, {"token_start", s.token_start}, {"token_end", s.token_end}});
  }
  return {{"probe_id", probe_id},
          {"instruction_tokens", tokens},
          {"constraint_spans", spans},
          {"response_token_count", response_token_count},
          {"matrix", matrix}};
}

RawImportanceMatrix RawImportanceMatrix::from_json(const nlohmann::json& j) {
  RawImportanceMatrix m;
  m.probe_id = j.at("probe_id").get<std::string>();
  for (const auto& t : j.at("instruction_tokens")) {
    m.instruction_tokens.push_back({t.at("text").get<std::string>(), t.at("char_start").get<std::size_t>(),
                                    t.at("char_end").get<std::size_t>()});
  }
  for (const auto& s : j.at("constraint_spans")) {
    m.constraint_spans.push_back(
        {s.at("kind").get<std::string>(), s.at("token_start").get<std::size_t>(), s.at("token_end").get<std::size_t>()});
  }
  m.response_token_count = j.at("response_token_count").get<std::size_t>();
  const auto& values = j.at("matrix");
  // Accept row-major flat arrays and nested rows.
  for (const auto& v : values) {
    if (v.is_array()) {
      for (const auto& x : v) m.matrix.push_back(x.get<double>());
    } else {
      m.matrix.push_back(v.get<double>());
    }
  }
  return m;
}

std::vector<RawImportanceMatrix> load_matrices(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("matrices file not found: " + path.string());
  std::vector<RawImportanceMatrix> out;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      out.push_back(RawImportanceMatrix::from_json(j));
      out.back().validate();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid importance record: ") + e.what(), line);
    } catch (const DataError& e) {
      throw ParseError(e.what(), line);
    }
  });
  return out;
}

std::size_t StandardizedMatrix::skipped_columns() const {
  return static_cast<std::size_t>(std::count(column_used.begin(), column_used.end(), false));
}

StandardizedMatrix normalize(const RawImportanceMatrix& raw, const NormalizeOptions& options, Execution exec) {
  if (raw.matrix.size() != raw.rows() * raw.cols()) throw DataError(raw.probe_id + ": matrix shape mismatch");
  if (!(options.scale > 0.0)) throw ArgumentError("importance scale must be positive");
  StandardizedMatrix s;
  s.rows = raw.rows();
  s.cols = raw.cols();
  s.values.assign(s.rows * s.cols, 0.0);
  std::vector<char> used(s.cols, 0);
  const auto column = [&](std::size_t y) {
    double peak = 0.0;
    for (std::size_t x = 0; x < s.rows; ++x) peak = std::max(peak, std::fabs(raw.at(x, y)));
    if (peak == 0.0) return;
    used[y] = 1;
    for (std::size_t x = 0; x < s.rows; ++x) {
      const double a = std::fabs(raw.at(x, y));
      // The peak maps to the scale exactly.
      double v = a == peak ? options.scale : options.scale * (a / peak);
      if (options.floor && v < *options.floor) v = 0.0;
      s.values[x * s.cols + y] = v;
    }
  };
  const auto cols = static_cast<std::ptrdiff_t>(s.cols);
  if (exec == Execution::serial) {
    for (std::ptrdiff_t y = 0; y < cols; ++y) column(static_cast<std::size_t>(y));
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t y = 0; y < cols; ++y) column(static_cast<std::size_t>(y));
  }
  s.column_used.assign(used.begin(), used.end());
  return s;
}

double constraint_weight(const StandardizedMatrix& s, const TokenSpan& span, std::size_t n_y) {
  if (span.token_start >= span.token_end) throw ArgumentError("empty constraint span");
  if (span.token_end > s.rows) throw ArgumentError("constraint span outside the matrix");
  if (n_y == 0 || n_y > s.cols) throw ArgumentError("response token count out of range");
  double sum = 0.0;
  for (std::size_t y = 0; y < n_y; ++y) {
    for (std::size_t x = span.token_start; x < span.token_end; ++x) sum += s.at(x, y);
  }
  return sum / static_cast<double>(n_y);
}

nlohmann::json ImportanceProfile::to_json() const {
  nlohmann::json groups = nlohmann::json::object();
  for (Group g : all_groups()) {
    const auto i = static_cast<std::size_t>(g);
    if (group_count[i] > 0) groups[std::string(group_name(g))] = {{"mean", group_mean[i]}, {"count", group_count[i]}};
  }
  return {{"cddi", cddi},
          {"instances", instances},
          {"position_mean", position_mean},
          {"position_count", position_count},
          {"groups", groups},
          {"total_mean", total_mean}};
}

std::vector<ImportanceProfile> build_profiles(std::span<const RawImportanceMatrix> matrices,
                                              std::span<const ProbeInstance> probes, const NormalizeOptions& options,
                                              ProfileStats* stats, Execution exec) {
  std::unordered_map<std::string_view, const ProbeInstance*> by_id;
  for (const auto& p : probes) by_id.emplace(p.probe_id, &p);

  std::vector<const ProbeInstance*> joined(matrices.size(), nullptr);
  ProfileStats local;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto it = by_id.find(matrices[i].probe_id);
    if (it == by_id.end()) {
      log::warn("skipping importance matrix for unknown probe " + matrices[i].probe_id);
      ++local.skipped;
      continue;
    }
    if (!spans_match(matrices[i], *it->second)) {
      log::warn("skipping importance matrix for " + matrices[i].probe_id + ": spans do not match its constraints");
      ++local.skipped;
      continue;
    }
    joined[i] = it->second;
    ++local.joined;
  }

  std::vector<Weights> weights(matrices.size());
  const auto count = static_cast<std::ptrdiff_t>(matrices.size());
  if (exec == Execution::serial) {
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      if (joined[i]) weights[i] = instance_weights(matrices[i], options);
    }
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      if (joined[i]) weights[i] = instance_weights(matrices[i], options);
    }
  }

  std::map<double, ImportanceProfile, std::greater<>> profiles;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    if (!joined[i]) continue;
    const ProbeInstance& p = *joined[i];
    ImportanceProfile& prof = profiles[p.realized_cddi];
    prof.cddi = p.realized_cddi;
    ++prof.instances;
    const auto& w = weights[i];
    if (prof.position_mean.size() < w.per_position.size()) {
      prof.position_mean.resize(w.per_position.size(), 0.0);
      prof.position_count.resize(w.per_position.size(), 0);
    }
    for (std::size_t j = 0; j < w.per_position.size(); ++j) {
      prof.position_mean[j] += w.per_position[j];
      ++prof.position_count[j];
      const auto g = static_cast<std::size_t>(group_of(p.constraints[j].kind));
      prof.group_mean[g] += w.per_position[j];
      ++prof.group_count[g];
    }
    prof.total_mean += w.total;
  }

  std::vector<ImportanceProfile> out;
  for (auto& [cddi, prof] : profiles) {
    for (std::size_t j = 0; j < prof.position_mean.size(); ++j) {
      prof.position_mean[j] /= static_cast<double>(prof.position_count[j]);
    }
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (prof.group_count[g] > 0) prof.group_mean[g] /= static_cast<double>(prof.group_count[g]);
    }
    prof.total_mean /= static_cast<double>(prof.instances);
    out.push_back(std::move(prof));
  }
  if (stats) *stats = local;
  return out;
}

std::string emit_position_profiles(std::span<const ImportanceProfile> profiles) {
  std::size_t width = 0;
  for (const auto& p : profiles) width = std::max(width, p.position_mean.size());
  std::ostringstream out;
  out << "CDDI,instances";
  for (std::size_t j = 0; j < width; ++j) out << ",C" << j + 1;
  out << ",total\n";
  for (const auto& p : profiles) {
    out << num(p.cddi) << ',' << p.instances;
    for (std::size_t j = 0; j < width; ++j) out << ',' << (j < p.position_mean.size() ? num(p.position_mean[j]) : "");
    out << ',' << num(p.total_mean) << '\n';
  }
  return out.str();
}

std::string emit_group_profiles(std::span<const ImportanceProfile> profiles) {
  std::ostringstream out;
  out << "CDDI,instances";
  for (Group g : all_groups()) out << ',' << group_name(g);
  out << '\n';
  for (const auto& p : profiles) {
    out << num(p.cddi) << ',' << p.instances;
    for (Group g : all_groups()) {
      const auto i = static_cast<std::size_t>(g);
      out << ',' << (p.group_count[i] > 0 ? num(p.group_mean[i]) : "");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace probe
