#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "probe/constraints.hpp"

namespace probe {

struct DifficultyEntry {
  Kind kind = Kind::NoCommas;
  std::size_t samples = 0;
  std::size_t followed = 0;
  double accuracy = 0.0;
  double hardness = 0.0;    // 1 - accuracy
  double difficulty = 0.0;  // softmax of hardness over the table
};

class DifficultyTable {
 public:
  DifficultyTable() = default;

  // Builds Dff = softmax(hardness) over the given entries.
  static DifficultyTable from_entries(std::vector<DifficultyEntry> entries);

  static DifficultyTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  nlohmann::json to_json() const;
  static DifficultyTable from_json(const nlohmann::json& j);

  bool contains(Kind kind) const;
  const DifficultyEntry& entry(Kind kind) const;
  std::span<const DifficultyEntry> entries() const { return entries_; }

  // Kinds sorted hardest-first; equal difficulty falls back to kind name.
  std::vector<Kind> anchor(std::span<const Kind> kinds) const;

  // Groups with at least one kind in the table, hardest-first by mean Dff.
  std::vector<Group> groups_hardest_first() const;

 private:
  std::vector<DifficultyEntry> entries_;
};

struct FollowRecord {
  Kind kind = Kind::NoCommas;
  bool followed = false;
};

// Every kind in `scope` needs at least one record (CoverageError otherwise);
// records for kinds outside the scope are ignored.
DifficultyTable estimate_difficulty(std::span<const FollowRecord> records, std::span<const Kind> scope);
DifficultyTable estimate_difficulty(std::span<const FollowRecord> records);

// Number of pairs ordered opposite to the hardest-first anchor.
std::size_t discordant_pairs(std::span<const Kind> order, const DifficultyTable& table);

// 2(N_con - N_dis) / (n(n-1)); ArgumentError for n < 2.
double cddi(std::span<const Kind> order, const DifficultyTable& table);

inline double cddi_from_discordant(std::size_t n, std::size_t discordant) {
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  return (pairs - 2.0 * static_cast<double>(discordant)) / pairs;
}

const std::vector<double>& default_targets();

enum class SearchMode { automatic, exhaustive, constructive };

SearchMode parse_search_mode(std::string_view name);

struct OrderWithIndex {
  std::vector<std::size_t> order;  // indices into the input kinds
  double target_cddi = 0.0;
  double realized_cddi = 0.0;
  std::size_t discordant = 0;
};

// For each target, the order whose CDDI is nearest the target; among equally
// near orders, the lexicographically smallest sequence of kind names.
// Exhaustive search scans all permutations; constructive search builds the
// same answer directly. Automatic picks exhaustive for n <= 8.
std::vector<OrderWithIndex> orders_for_targets(std::span<const Kind> kinds, const DifficultyTable& table,
                                               std::span<const double> targets,
                                               SearchMode mode = SearchMode::automatic);

// Lexicographically smallest order (by kind name) with exactly `discordant`
// pairs against the anchor.
std::vector<std::size_t> smallest_order_with_discordance(std::span<const Kind> kinds, const DifficultyTable& table,
                                                         std::size_t discordant);

}  // namespace probe
