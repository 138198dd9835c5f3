#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "probe/constraints.hpp"
#include "probe/rng.hpp"

namespace probe {

enum class SeedSource { natural_instructions, self_instruct, open_assistant, custom };

std::string_view seed_source_name(SeedSource s);
SeedSource parse_seed_source(std::string_view name);

struct SeedInstruction {
  std::string id;
  std::string text;
  SeedSource source = SeedSource::custom;
};

// Line-delimited {id, text, source}. Duplicate ids raise DataError; a
// malformed or incomplete line raises ParseError with its line number.
std::vector<SeedInstruction> load_seeds(const std::filesystem::path& path);

struct ConstraintCombination {
  std::string id;
  std::vector<ConstraintInstance> members;

  nlohmann::json to_json() const;
  static ConstraintCombination from_json(const nlohmann::json& j);
};

inline constexpr int kSamplingRetryCap = 1000;

// n_cc conflict-free combinations of n constraints, distinct as kind-sets.
// Each draw that fails the conflict filter counts against the retry cap.
std::vector<ConstraintCombination> sample_combinations(const Taxonomy& taxonomy, const ConflictMatrix& conflicts,
                                                       std::size_t n, std::size_t n_cc, Rng& rng);

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ComposedInstruction {
  std::string seed_id;
  std::vector<ConstraintInstance> ordered;
  std::string text;
  // Byte range of each constraint line inside `text`, aligned to `ordered`.
  std::vector<CharSpan> spans;
};

// `order` holds indices into combination.members. Joins use single newlines.
ComposedInstruction compose(const SeedInstruction& seed, const ConstraintCombination& combination,
                            const std::vector<std::size_t>& order);

// A composed instruction with provenance and its ordering index.
struct ProbeInstance {
  std::string probe_id;
  std::string seed_id;
  std::string seed_text;
  std::string combination_id;
  std::vector<ConstraintInstance> constraints;  // in presented order
  std::vector<CharSpan> spans;
  double target_cddi = 0.0;
  double realized_cddi = 0.0;
  std::size_t discordant_pairs = 0;
  std::string text;

  std::string family_id() const { return seed_id + "/" + combination_id; }

  nlohmann::json to_json() const;
  static ProbeInstance from_json(const nlohmann::json& j);
};

std::vector<ProbeInstance> load_probes(const std::filesystem::path& path);

}  // namespace probe
