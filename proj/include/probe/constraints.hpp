#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "probe/rng.hpp"

namespace probe {

enum class Group : std::uint8_t { Keyword, Language, Length, Content, Format, ChangeCase, StartEnd, Punctuation };

inline constexpr std::size_t kGroupCount = 8;

enum class Kind : std::uint8_t {
  IncludeKeywords,
  ExcludeKeywords,
  KeywordFrequency,
  LetterFrequency,
  ResponseLanguage,
  NumberParagraphs,
  NumberWords,
  NumberSentences,
  ParagraphsFirstWord,
  Postscript,
  NumberPlaceholders,
  NumberBullets,
  Title,
  ChooseFrom,
  HighlightedSections,
  MultipleSections,
  JsonFormat,
  AllUppercase,
  AllLowercase,
  CapitalWordFrequency,
  EndChecker,
  Quotation,
  NoCommas,
};

inline constexpr std::size_t kKindCount = 23;
inline constexpr int kVariantCount = 8;

const std::array<Kind, kKindCount>& all_kinds();
const std::array<Group, kGroupCount>& all_groups();

std::string_view kind_name(Kind kind);
std::optional<Kind> kind_from_name(std::string_view name);
// Throws DispatchError for names outside the registry.
Kind parse_kind(std::string_view name);

std::string_view group_name(Group group);
Group parse_group(std::string_view name);
Group group_of(Kind kind);

enum class Relation : std::uint8_t { at_least, around, at_most };

std::string_view relation_name(Relation r);
std::string_view relation_phrase(Relation r);
Relation parse_relation(std::string_view name);

using ParamValue = std::variant<std::int64_t, std::string, std::vector<std::string>>;
using Params = std::map<std::string, ParamValue, std::less<>>;

// One parameterized, rendered constraint.
struct ConstraintInstance {
  Kind kind = Kind::NoCommas;
  Params params;
  int variant_index = 0;
  std::string rendered_text;

  bool has(std::string_view name) const { return params.find(name) != params.end(); }
  std::int64_t integer(std::string_view name) const;
  const std::string& str(std::string_view name) const;
  const std::vector<std::string>& list(std::string_view name) const;
  Relation relation() const { return parse_relation(str("relation")); }

  // Every string value carried by the params, lists flattened.
  std::vector<std::string> text_values() const;

  bool operator==(const ConstraintInstance&) const = default;
};

nlohmann::json to_json(const ConstraintInstance& c);
ConstraintInstance constraint_from_json(const nlohmann::json& j);

enum class Domain : std::uint8_t {
  keyword_list,
  keyword,
  int_range,
  int_set,
  relation,
  language,
  letter,
  choice,
  option_set,
  index_of,
};

struct ParamSpec {
  std::string name;
  Domain domain = Domain::int_range;
  std::int64_t min = 0;
  std::int64_t max = 0;
  std::vector<std::int64_t> int_values;
  std::vector<std::string> choices;
  std::vector<std::vector<std::string>> option_sets;
  std::string of;  // index_of: name of the bounding integer param
};

struct KindSpec {
  Kind kind = Kind::NoCommas;
  Group group = Group::Punctuation;
  std::vector<ParamSpec> params;
  std::vector<std::string> templates;

  const ParamSpec* param(std::string_view name) const;
};

struct LanguageInfo {
  std::string code;
  std::string name;
  std::string script;
  std::filesystem::path sample;
};

// Directory holding taxonomy.json, conflicts.json, lexicon.txt and the
// language resources. PROBE_DATA_DIR in the environment wins over the
// build-time default.
std::filesystem::path default_data_dir();

// The constraint taxonomy: kinds, parameter schemas, description variants,
// keyword lexicon and language registry. Immutable after load.
class Taxonomy {
 public:
  static Taxonomy load(const std::filesystem::path& data_dir);
  static const Taxonomy& shared();

  const KindSpec& spec(Kind kind) const { return specs_[static_cast<std::size_t>(kind)]; }
  std::span<const std::string> lexicon() const { return lexicon_; }
  std::span<const LanguageInfo> languages() const { return languages_; }
  const LanguageInfo& language(std::string_view code) const;
  double dominant_share() const { return dominant_share_; }
  const std::filesystem::path& data_dir() const { return data_dir_; }

  ConstraintInstance instantiate(Kind kind, Rng& rng) const;

  // Deterministic substitution of params into the instance's variant.
  std::string render(const ConstraintInstance& instance) const;

  // Throws DataError when params do not satisfy the kind's schema.
  void validate(const ConstraintInstance& instance) const;

 private:
  std::array<KindSpec, kKindCount> specs_{};
  std::vector<std::string> lexicon_;
  std::vector<LanguageInfo> languages_;
  double dominant_share_ = 0.5;
  std::filesystem::path data_dir_;
};

struct ConflictRule {
  Kind a = Kind::NoCommas;
  Kind b = Kind::NoCommas;
  std::string rationale;  // "unsatisfiable" or "policy"
  std::string note;
  // Conditional rules apply only when `a`'s param differs from unless_value.
  std::optional<std::string> when_param;
  std::optional<std::string> unless_value;

  bool satisfiability_based() const { return rationale == "unsatisfiable"; }
};

// Symmetric conflict relation over kinds, plus instance-level rules.
class ConflictMatrix {
 public:
  static ConflictMatrix load(const std::filesystem::path& path);
  static ConflictMatrix from_json(const nlohmann::json& j);
  static const ConflictMatrix& shared();

  // Kind-level relation, including self conflicts.
  bool conflicts(Kind a, Kind b) const {
    return matrix_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }

  // Kind-level relation plus conditional rules and parameter clashes (shared
  // keywords, a counted letter appearing in another constraint's text, ...).
  bool conflicts(const ConstraintInstance& a, const ConstraintInstance& b) const;

  std::span<const ConflictRule> rules() const { return rules_; }
  std::span<const ConflictRule> conditional_rules() const { return conditional_; }

 private:
  std::array<std::array<bool, kKindCount>, kKindCount> matrix_{};
  std::vector<ConflictRule> rules_;
  std::vector<ConflictRule> conditional_;
};

// Parameter-level clash between two instances of different kinds.
bool params_clash(const ConstraintInstance& a, const ConstraintInstance& b);

}  // namespace probe
