#include "probe/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/log.hpp"

namespace probe {

namespace {

constexpr double kNearTolerance = 1e-12;

// Anchor rank of each input position (0 = hardest).
std::vector<std::size_t> anchor_ranks(std::span<const Kind> kinds, const DifficultyTable& table) {
  const auto anchor = table.anchor(kinds);
  std::vector<std::size_t> ranks(kinds.size());
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    ranks[i] = static_cast<std::size_t>(std::find(anchor.begin(), anchor.end(), kinds[i]) - anchor.begin());
  }
  return ranks;
}

std::size_t inversions(std::span<const std::size_t> order, std::span<const std::size_t> ranks) {
  std::size_t d = 0;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) d += ranks[order[a]] > ranks[order[b]] ? 1 : 0;
  }
  return d;
}

bool name_less(std::span<const Kind> kinds, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [&](std::size_t x, std::size_t y) {
    return kind_name(kinds[x]) < kind_name(kinds[y]);
  });
}

// Discordance values whose CDDI is nearest to the target (one, or two on a tie).
std::vector<std::size_t> nearest_discordance(std::size_t n, double target) {
  const std::size_t pairs = n * (n - 1) / 2;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d <= pairs; ++d) {
    const double dist = std::fabs(cddi_from_discordant(n, d) - target);
    if (dist < best - kNearTolerance) {
      best = dist;
      out = {d};
    } else if (std::fabs(dist - best) <= kNearTolerance) {
      out.push_back(d);
    }
  }
  return out;
}

void check_distinct(std::span<const Kind> kinds) {
  std::vector<Kind> sorted(kinds.begin(), kinds.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ArgumentError("combination contains duplicate kinds");
  }
}

void warn_on_ties(std::span<const Kind> kinds, const DifficultyTable& table) {
  for (std::size_t a = 0; a < kinds.size(); ++a) {
    for (std::size_t b = a + 1; b < kinds.size(); ++b) {
      if (table.entry(kinds[a]).difficulty == table.entry(kinds[b]).difficulty) {
        log::warn(std::string("equal difficulty for ") + std::string(kind_name(kinds[a])) + " and " +
                  std::string(kind_name(kinds[b])) + "; anchor breaks the tie by kind name");
      }
    }
  }
}

}  // namespace

DifficultyTable DifficultyTable::from_entries(std::vector<DifficultyEntry> entries) {
  DifficultyTable t;
  if (entries.empty()) return t;
  double max_h = -std::numeric_limits<double>::infinity();
  for (auto& e : entries) {
    e.hardness = 1.0 - e.accuracy;
    max_h = std::max(max_h, e.hardness);
  }
  double z = 0.0;
  for (const auto& e : entries) z += std::exp(e.hardness - max_h);
  for (auto& e : entries) e.difficulty = std::exp(e.hardness - max_h) / z;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.kind < b.kind; });
  t.entries_ = std::move(entries);
  return t;
}

nlohmann::json DifficultyTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries_) {
    rows.push_back({{"kind", kind_name(e.kind)},
                    {"N_x", e.samples},
                    {"followed", e.followed},
                    {"Acc", e.accuracy},
                    {"Dff", e.difficulty}});
  }
  return {{"kinds", rows}};
}

DifficultyTable DifficultyTable::from_json(const nlohmann::json& j) {
  std::vector<DifficultyEntry> entries;
  for (const auto& row : j.at("kinds")) {
    DifficultyEntry e;
    e.kind = parse_kind(row.at("kind").get<std::string>());
    e.samples = row.value("N_x", std::size_t{0});
    e.followed = row.value("followed", std::size_t{0});
    e.accuracy = row.at("Acc").get<double>();
    if (e.accuracy < 0.0 || e.accuracy > 1.0) throw DataError("accuracy out of [0,1] for " + std::string(kind_name(e.kind)));
    entries.push_back(e);
  }
  return from_entries(std::move(entries));
}

DifficultyTable DifficultyTable::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("difficulty table not found: " + path.string());
  return from_json(read_json_file(path));
}

void DifficultyTable::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

bool DifficultyTable::contains(Kind kind) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.kind == kind; });
}

const DifficultyEntry& DifficultyTable::entry(Kind kind) const {
  for (const auto& e : entries_) {
    if (e.kind == kind) return e;
  }
  throw ArgumentError("kind " + std::string(kind_name(kind)) + " is not in the difficulty table");
}

std::vector<Kind> DifficultyTable::anchor(std::span<const Kind> kinds) const {
  std::vector<Kind> out(kinds.begin(), kinds.end());
  std::stable_sort(out.begin(), out.end(), [&](Kind a, Kind b) {
    const double da = entry(a).difficulty;
    const double db = entry(b).difficulty;
    if (da != db) return da > db;
    return kind_name(a) < kind_name(b);
  });
  return out;
}

std::vector<Group> DifficultyTable::groups_hardest_first() const {
  std::vector<std::pair<double, Group>> scored;
  for (Group g : all_groups()) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& e : entries_) {
      if (group_of(e.kind) == g) {
        sum += e.difficulty;
        ++count;
      }
    }
    if (count) scored.emplace_back(sum / static_cast<double>(count), g);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Group> out;
  for (const auto& [_, g] : scored) out.push_back(g);
  return out;
}

DifficultyTable estimate_difficulty(std::span<const FollowRecord> records, std::span<const Kind> scope) {
  std::array<std::size_t, kKindCount> samples{};
  std::array<std::size_t, kKindCount> followed{};
  for (const auto& r : records) {
    ++samples[static_cast<std::size_t>(r.kind)];
    followed[static_cast<std::size_t>(r.kind)] += r.followed ? 1 : 0;
  }
  std::vector<DifficultyEntry> entries;
  std::string missing;
  for (Kind k : scope) {
    const auto i = static_cast<std::size_t>(k);
    if (samples[i] == 0) {
      missing += (missing.empty() ? "" : ", ") + std::string(kind_name(k));
      continue;
    }
    DifficultyEntry e;
    e.kind = k;
    e.samples = samples[i];
    e.followed = followed[i];
    e.accuracy = static_cast<double>(followed[i]) / static_cast<double>(samples[i]);
    entries.push_back(e);
  }
  if (!missing.empty()) throw CoverageError("no evaluation records for: " + missing);
  return DifficultyTable::from_entries(std::move(entries));
}

DifficultyTable estimate_difficulty(std::span<const FollowRecord> records) {
  return estimate_difficulty(records, all_kinds());
}

std::size_t discordant_pairs(std::span<const Kind> order, const DifficultyTable& table) {
  const auto ranks = anchor_ranks(order, table);
  std::vector<std::size_t> identity(order.size());
  std::iota(identity.begin(), identity.end(), 0);
  return inversions(identity, ranks);
}

double cddi(std::span<const Kind> order, const DifficultyTable& table) {
  if (order.size() < 2) throw ArgumentError("CDDI needs at least two constraints");
  return cddi_from_discordant(order.size(), discordant_pairs(order, table));
}

const std::vector<double>& default_targets() {
  static const std::vector<double> targets{1.0, 0.8, 0.6, 0.4, 0.2, 0.05, -0.05, -0.2, -0.4, -0.6, -0.8, -1.0};
  return targets;
}

SearchMode parse_search_mode(std::string_view name) {
  if (name == "auto") return SearchMode::automatic;
  if (name == "exhaustive") return SearchMode::exhaustive;
  if (name == "constructive") return SearchMode::constructive;
  throw ArgumentError("unknown search mode '" + std::string(name) + "'");
}

std::vector<std::size_t> smallest_order_with_discordance(std::span<const Kind> kinds, const DifficultyTable& table,
                                                         std::size_t discordant) {
  const std::size_t n = kinds.size();
  if (discordant > n * (n - 1) / 2) throw ArgumentError("discordance exceeds the number of pairs");
  const auto ranks = anchor_ranks(kinds, table);
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::sort(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) { return kind_name(kinds[a]) < kind_name(kinds[b]); });
  std::vector<std::size_t> order;
  std::size_t d = discordant;
  while (!remaining.empty()) {
    const std::size_t m = remaining.size();
    const std::size_t capacity = (m - 1) * (m - 2) / 2;
    bool placed = false;
    for (std::size_t pos = 0; pos < m; ++pos) {
      const std::size_t x = remaining[pos];
      // Pairs this choice makes discordant: harder kinds still to come.
      const std::size_t r = static_cast<std::size_t>(
          std::count_if(remaining.begin(), remaining.end(), [&](std::size_t y) { return ranks[y] < ranks[x]; }));
      if (r <= d && d - r <= capacity) {
        order.push_back(x);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
        d -= r;
        placed = true;
        break;
      }
    }
    if (!placed) throw ArgumentError("unreachable discordance");
  }
  return order;
}

std::vector<OrderWithIndex> orders_for_targets(std::span<const Kind> kinds, const DifficultyTable& table,
                                               std::span<const double> targets, SearchMode mode) {
  const std::size_t n = kinds.size();
  if (n < 2) throw ArgumentError("CDDI needs at least two constraints");
  check_distinct(kinds);
  warn_on_ties(kinds, table);
  if (mode == SearchMode::automatic) mode = n <= 8 ? SearchMode::exhaustive : SearchMode::constructive;

  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<std::vector<std::size_t>> first_with(pairs + 1);
  if (mode == SearchMode::exhaustive) {
    const auto ranks = anchor_ranks(kinds, table);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    const auto by_name = [&](std::size_t a, std::size_t b) { return kind_name(kinds[a]) < kind_name(kinds[b]); };
    std::sort(perm.begin(), perm.end(), by_name);
    do {
      auto& slot = first_with[inversions(perm, ranks)];
      if (slot.empty()) slot = perm;
    } while (std::next_permutation(perm.begin(), perm.end(), by_name));
  }

  std::vector<OrderWithIndex> out;
  for (double target : targets) {
    if (!(target >= -1.0 && target <= 1.0)) throw ArgumentError("CDDI target outside [-1, 1]");
    OrderWithIndex best;
    bool have = false;
    for (std::size_t d : nearest_discordance(n, target)) {
      auto order = mode == SearchMode::exhaustive ? first_with[d] : smallest_order_with_discordance(kinds, table, d);
      if (!have || name_less(kinds, order, best.order)) {
        best.order = std::move(order);
        best.discordant = d;
        have = true;
      }
    }
    best.target_cddi = target;
    best.realized_cddi = cddi_from_discordant(n, best.discordant);
    out.push_back(std::move(best));
  }
  return out;
}

}  // namespace probe
