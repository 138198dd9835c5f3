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
#include "probe/synthesis.hpp"

namespace probe {

struct InstructionToken {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
};

// Half-open token range [token_start, token_end).
struct TokenSpan {
  std::string kind;
  std::size_t token_start = 0;
  std::size_t token_end = 0;

  std::size_t size() const { return token_end - token_start; }
};

// Raw importance of each instruction token (row) for each response token
// (column), stored row-major.
struct RawImportanceMatrix {
  std::string probe_id;
  std::vector<InstructionToken> instruction_tokens;
  std::vector<TokenSpan> constraint_spans;
  std::size_t response_token_count = 0;
  std::vector<double> matrix;

  std::size_t rows() const { return instruction_tokens.size(); }
  std::size_t cols() const { return response_token_count; }
  double at(std::size_t x, std::size_t y) const { return matrix[x * response_token_count + y]; }

  // DataError on a shape mismatch, non-finite values, or spans that overlap
  // or leave the instruction.
  void validate() const;

  nlohmann::json to_json() const;
  static RawImportanceMatrix from_json(const nlohmann::json& j);
};

// ParseError with the line number for malformed or invalid lines.
std::vector<RawImportanceMatrix> load_matrices(const std::filesystem::path& path);

inline constexpr double kDefaultImportanceScale = 10.0;

struct NormalizeOptions {
  double scale = kDefaultImportanceScale;
  // Standardized values below the floor are zeroed.
  std::optional<double> floor;
};

struct StandardizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;    // row-major
  std::vector<bool> column_used; // false for skipped all-zero columns

  double at(std::size_t x, std::size_t y) const { return values[x * cols + y]; }
  std::size_t skipped_columns() const;
};

// S[x, y] = scale * |I[x, y]| / max_i |I[i, y]| per response column.
// All-zero columns are skipped (left at zero) with a warning.
StandardizedMatrix normalize(const RawImportanceMatrix& raw, const NormalizeOptions& options = {},
                             Execution exec = Execution::serial);

// (1 / n_y) * sum over response columns and span rows of S.
// ArgumentError for an empty span or one outside the matrix.
double constraint_weight(const StandardizedMatrix& s, const TokenSpan& span, std::size_t n_y);

struct ImportanceProfile {
  double cddi = 0.0;
  std::size_t instances = 0;
  std::vector<double> position_mean;  // index i = constraint position i + 1
  std::vector<std::size_t> position_count;
  std::array<double, kGroupCount> group_mean{};
  std::array<std::size_t, kGroupCount> group_count{};
  double total_mean = 0.0;  // constraint-part weight per instruction

  nlohmann::json to_json() const;
};

struct ProfileStats {
  std::size_t joined = 0;
  std::size_t skipped = 0;
};

// Profiles keyed by realized CDDI, descending. A matrix without a probe, or
// whose spans disagree with the probe's constraints, is skipped with a
// warning.
std::vector<ImportanceProfile> build_profiles(std::span<const RawImportanceMatrix> matrices,
                                              std::span<const ProbeInstance> probes,
                                              const NormalizeOptions& options = {}, ProfileStats* stats = nullptr,
                                              Execution exec = Execution::parallel);

std::string emit_position_profiles(std::span<const ImportanceProfile> profiles);
std::string emit_group_profiles(std::span<const ImportanceProfile> profiles);

}  // namespace probe
