#include "probe/constraints.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/text.hpp"

#ifndef PROBE_DATA_DIR
#define PROBE_DATA_DIR "data"
#endif

namespace probe {

namespace {

struct KindRow {
  Kind kind;
  std::string_view name;
  Group group;
};

constexpr std::array<KindRow, kKindCount> kKinds{{
    {Kind::IncludeKeywords, "IncludeKeywords", Group::Keyword},
    {Kind::ExcludeKeywords, "ExcludeKeywords", Group::Keyword},
    {Kind::KeywordFrequency, "KeywordFrequency", Group::Keyword},
    {Kind::LetterFrequency, "LetterFrequency", Group::Keyword},
    {Kind::ResponseLanguage, "ResponseLanguage", Group::Language},
    {Kind::NumberParagraphs, "NumberParagraphs", Group::Length},
    {Kind::NumberWords, "NumberWords", Group::Length},
    {Kind::NumberSentences, "NumberSentences", Group::Length},
    {Kind::ParagraphsFirstWord, "ParagraphsFirstWord", Group::Length},
    {Kind::Postscript, "Postscript", Group::Content},
    {Kind::NumberPlaceholders, "NumberPlaceholders", Group::Content},
    {Kind::NumberBullets, "NumberBullets", Group::Format},
    {Kind::Title, "Title", Group::Format},
    {Kind::ChooseFrom, "ChooseFrom", Group::Format},
    {Kind::HighlightedSections, "HighlightedSections", Group::Format},
    {Kind::MultipleSections, "MultipleSections", Group::Format},
    {Kind::JsonFormat, "JsonFormat", Group::Format},
    {Kind::AllUppercase, "AllUppercase", Group::ChangeCase},
    {Kind::AllLowercase, "AllLowercase", Group::ChangeCase},
    {Kind::CapitalWordFrequency, "CapitalWordFrequency", Group::ChangeCase},
    {Kind::EndChecker, "EndChecker", Group::StartEnd},
    {Kind::Quotation, "Quotation", Group::StartEnd},
    {Kind::NoCommas, "NoCommas", Group::Punctuation},
}};

constexpr std::array<std::string_view, kGroupCount> kGroupNames{
    "Keyword", "Language", "Length", "Content", "Format", "ChangeCase", "StartEnd", "Punctuation"};

Domain parse_domain(std::string_view s) {
  static const std::map<std::string_view, Domain> table{
      {"keyword_list", Domain::keyword_list}, {"keyword", Domain::keyword},
      {"int_range", Domain::int_range},       {"int_set", Domain::int_set},
      {"relation", Domain::relation},         {"language", Domain::language},
      {"letter", Domain::letter},             {"choice", Domain::choice},
      {"option_set", Domain::option_set},     {"index_of", Domain::index_of},
  };
  auto it = table.find(s);
  if (it == table.end()) throw DataError("unknown parameter domain '" + std::string(s) + "'");
  return it->second;
}

std::string render_value(const ParamSpec& spec, const ParamValue& value, const Taxonomy& taxonomy) {
  switch (spec.domain) {
    case Domain::relation:
      return std::string(relation_phrase(parse_relation(std::get<std::string>(value))));
    case Domain::language:
      return taxonomy.language(std::get<std::string>(value)).name;
    case Domain::option_set: {
      std::string out = "(";
      const auto& options = std::get<std::vector<std::string>>(value);
      for (std::size_t i = 0; i < options.size(); ++i) {
        if (i) out += ", ";
        out += "'" + options[i] + "'";
      }
      return out + ")";
    }
    default:
      break;
  }
  if (const auto* n = std::get_if<std::int64_t>(&value)) return std::to_string(*n);
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return text::join(std::get<std::vector<std::string>>(value), ", ");
}

std::vector<std::string> template_placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    const auto close = tmpl.find('}', pos);
    if (close == std::string_view::npos) break;
    names.emplace_back(tmpl.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return names;
}

// Words a constraint forces into (or counts within) the response.
std::vector<std::string> keyword_values(const ConstraintInstance& c) {
  switch (c.kind) {
    case Kind::IncludeKeywords:
    case Kind::ExcludeKeywords:
      return c.list("keywords");
    case Kind::KeywordFrequency:
      return {c.str("keyword")};
    case Kind::ParagraphsFirstWord:
      return {c.str("first_word")};
    default:
      return {};
  }
}

// Words whose count in the response must be controlled exactly.
std::vector<std::string> counted_words(const ConstraintInstance& c) {
  switch (c.kind) {
    case Kind::ExcludeKeywords:
      return c.list("keywords");
    case Kind::KeywordFrequency:
      return {c.str("keyword")};
    default:
      return {};
  }
}

// Literal text a constraint contributes to a satisfying response.
std::vector<std::string> fixed_texts(const ConstraintInstance& c) {
  switch (c.kind) {
    case Kind::ChooseFrom:
      return c.list("options");
    case Kind::EndChecker:
      return {c.str("phrase")};
    case Kind::Postscript:
      return {c.str("marker")};
    case Kind::MultipleSections:
      return {c.str("splitter")};
    default:
      return {};
  }
}

std::size_t capital_words_in(std::string_view s) {
  const auto tokens = text::split_whitespace(s);
  return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), text::is_capital_word));
}

bool one_way_clash(const ConstraintInstance& a, const ConstraintInstance& b) {
  for (const auto& word : counted_words(a)) {
    for (const auto& t : fixed_texts(b)) {
      if (text::count_word(t, word) > 0) return true;
    }
  }
  if (a.kind == Kind::LetterFrequency) {
    const std::string letter = text::fold_case(a.str("letter"));
    std::vector<std::string> texts = fixed_texts(b);
    for (const auto& w : keyword_values(b)) texts.push_back(w);
    for (const auto& t : texts) {
      if (text::fold_case(t).find(letter) != std::string::npos) return true;
    }
  }
  if (a.kind == Kind::CapitalWordFrequency) {
    std::size_t capitals = 0;
    for (const auto& t : fixed_texts(b)) capitals += capital_words_in(t);
    if (static_cast<std::int64_t>(capitals) >= a.integer("N")) return true;
  }
  return false;
}

}  // namespace

const std::array<Kind, kKindCount>& all_kinds() {
  static const auto kinds = [] {
    std::array<Kind, kKindCount> out{};
    for (std::size_t i = 0; i < kKindCount; ++i) out[i] = kKinds[i].kind;
    return out;
  }();
  return kinds;
}

const std::array<Group, kGroupCount>& all_groups() {
  static const std::array<Group, kGroupCount> groups{Group::Keyword,  Group::Language,   Group::Length,
                                                     Group::Content,  Group::Format,     Group::ChangeCase,
                                                     Group::StartEnd, Group::Punctuation};
  return groups;
}

std::string_view kind_name(Kind kind) { return kKinds[static_cast<std::size_t>(kind)].name; }

std::optional<Kind> kind_from_name(std::string_view name) {
  for (const auto& row : kKinds) {
    if (row.name == name) return row.kind;
  }
  return std::nullopt;
}

Kind parse_kind(std::string_view name) {
  if (auto k = kind_from_name(name)) return *k;
  throw DispatchError("unknown constraint kind '" + std::string(name) + "'");
}

std::string_view group_name(Group group) { return kGroupNames[static_cast<std::size_t>(group)]; }

Group parse_group(std::string_view name) {
  for (std::size_t i = 0; i < kGroupCount; ++i) {
    if (kGroupNames[i] == name) return static_cast<Group>(i);
  }
  throw DataError("unknown constraint group '" + std::string(name) + "'");
}

Group group_of(Kind kind) { return kKinds[static_cast<std::size_t>(kind)].group; }

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::at_least: return "at_least";
    case Relation::around: return "around";
    case Relation::at_most: return "at_most";
  }
  return "at_least";
}

std::string_view relation_phrase(Relation r) {
  switch (r) {
    case Relation::at_least: return "at least";
    case Relation::around: return "around";
    case Relation::at_most: return "at most";
  }
  return "at least";
}

Relation parse_relation(std::string_view name) {
  if (name == "at_least") return Relation::at_least;
  if (name == "around") return Relation::around;
  if (name == "at_most") return Relation::at_most;
  throw DataError("unknown relation '" + std::string(name) + "'");
}

std::int64_t ConstraintInstance::integer(std::string_view name) const {
  auto it = params.find(name);
  if (it == params.end() || !std::holds_alternative<std::int64_t>(it->second)) {
    throw DataError(std::string(kind_name(kind)) + ": missing integer param '" + std::string(name) + "'");
  }
  return std::get<std::int64_t>(it->second);
}

const std::string& ConstraintInstance::str(std::string_view name) const {
  auto it = params.find(name);
  if (it == params.end() || !std::holds_alternative<std::string>(it->second)) {
    throw DataError(std::string(kind_name(kind)) + ": missing text param '" + std::string(name) + "'");
  }
  return std::get<std::string>(it->second);
}

const std::vector<std::string>& ConstraintInstance::list(std::string_view name) const {
  auto it = params.find(name);
  if (it == params.end() || !std::holds_alternative<std::vector<std::string>>(it->second)) {
    throw DataError(std::string(kind_name(kind)) + ": missing list param '" + std::string(name) + "'");
  }
  return std::get<std::vector<std::string>>(it->second);
}

std::vector<std::string> ConstraintInstance::text_values() const {
  std::vector<std::string> out;
  for (const auto& [name, value] : params) {
    if (const auto* s = std::get_if<std::string>(&value)) out.push_back(*s);
    if (const auto* l = std::get_if<std::vector<std::string>>(&value)) out.insert(out.end(), l->begin(), l->end());
  }
  return out;
}

nlohmann::json to_json(const ConstraintInstance& c) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, value] : c.params) {
    std::visit([&](const auto& v) { params[name] = v; }, value);
  }
  return {{"kind", kind_name(c.kind)}, {"params", params}, {"variant_index", c.variant_index}, {"text", c.rendered_text}};
}

ConstraintInstance constraint_from_json(const nlohmann::json& j) {
  ConstraintInstance c;
  c.kind = parse_kind(j.at("kind").get<std::string>());
  c.variant_index = j.value("variant_index", 0);
  c.rendered_text = j.value("text", std::string());
  if (j.contains("params")) {
    for (const auto& [name, value] : j.at("params").items()) {
      if (value.is_number_integer()) {
        c.params[name] = value.get<std::int64_t>();
      } else if (value.is_string()) {
        c.params[name] = value.get<std::string>();
      } else if (value.is_array()) {
        c.params[name] = value.get<std::vector<std::string>>();
      } else {
        throw DataError("param '" + name + "' has unsupported type");
      }
    }
  }
  return c;
}

const ParamSpec* KindSpec::param(std::string_view name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("PROBE_DATA_DIR"); env && *env) return env;
  return PROBE_DATA_DIR;
}

Taxonomy Taxonomy::load(const std::filesystem::path& data_dir) {
  Taxonomy t;
  t.data_dir_ = data_dir;
  const auto taxonomy_path = data_dir / "taxonomy.json";
  if (!std::filesystem::exists(taxonomy_path)) {
    throw ConfigError("variant data file not found: " + taxonomy_path.string());
  }
  const auto doc = read_json_file(taxonomy_path);
  std::array<bool, kKindCount> seen{};
  for (const auto& row : doc.at("kinds")) {
    const Kind kind = parse_kind(row.at("kind").get<std::string>());
    const Group group = parse_group(row.at("group").get<std::string>());
    if (group != group_of(kind)) {
      throw DataError(std::string(kind_name(kind)) + " declared in group " + std::string(group_name(group)));
    }
    auto& spec = t.specs_[static_cast<std::size_t>(kind)];
    if (seen[static_cast<std::size_t>(kind)]) throw DataError("duplicate kind " + std::string(kind_name(kind)));
    seen[static_cast<std::size_t>(kind)] = true;
    spec.kind = kind;
    spec.group = group;
    for (const auto& p : row.at("parameters")) {
      ParamSpec ps;
      ps.name = p.at("name").get<std::string>();
      ps.domain = parse_domain(p.at("domain").get<std::string>());
      ps.min = p.value("min", std::int64_t{0});
      ps.max = p.value("max", std::int64_t{0});
      ps.of = p.value("of", std::string());
      if (p.contains("values")) {
        if (ps.domain == Domain::int_set) ps.int_values = p["values"].get<std::vector<std::int64_t>>();
        if (ps.domain == Domain::choice) ps.choices = p["values"].get<std::vector<std::string>>();
        if (ps.domain == Domain::option_set) ps.option_sets = p["values"].get<std::vector<std::vector<std::string>>>();
      }
      spec.params.push_back(std::move(ps));
    }
    spec.templates = row.at("templates").get<std::vector<std::string>>();
    if (spec.templates.size() != static_cast<std::size_t>(kVariantCount)) {
      throw DataError(std::string(kind_name(kind)) + ": expected 8 description variants, found " +
                      std::to_string(spec.templates.size()));
    }
    for (const auto& tmpl : spec.templates) {
      for (const auto& name : template_placeholders(tmpl)) {
        if (!spec.param(name)) {
          throw DataError(std::string(kind_name(kind)) + ": template placeholder {" + name + "} has no parameter");
        }
      }
    }
  }
  for (std::size_t i = 0; i < kKindCount; ++i) {
    if (!seen[i]) throw DataError("taxonomy is missing kind " + std::string(kKinds[i].name));
  }

  std::ifstream lex(data_dir / "lexicon.txt");
  if (!lex) throw ConfigError("keyword lexicon not found in " + data_dir.string());
  std::set<std::string> unique;
  for (std::string word; std::getline(lex, word);) {
    const auto w = std::string(text::trim(word));
    if (!w.empty() && unique.insert(w).second) t.lexicon_.push_back(w);
  }
  if (t.lexicon_.empty()) throw DataError("keyword lexicon is empty");

  const auto langs = read_json_file(data_dir / "languages.json");
  t.dominant_share_ = langs.value("dominant_share", 0.5);
  for (const auto& l : langs.at("languages")) {
    t.languages_.push_back({l.at("code").get<std::string>(), l.at("name").get<std::string>(),
                            l.at("script").get<std::string>(), data_dir / l.at("sample").get<std::string>()});
  }
  return t;
}

const Taxonomy& Taxonomy::shared() {
  static const Taxonomy instance = load(default_data_dir());
  return instance;
}

const LanguageInfo& Taxonomy::language(std::string_view code) const {
  for (const auto& l : languages_) {
    if (l.code == code) return l;
  }
  throw DataError("unknown language '" + std::string(code) + "'");
}

ConstraintInstance Taxonomy::instantiate(Kind kind, Rng& rng) const {
  const auto& s = spec(kind);
  ConstraintInstance c;
  c.kind = kind;
  for (const auto& p : s.params) {
    switch (p.domain) {
      case Domain::keyword_list: {
        const auto count = static_cast<std::size_t>(rng.uniform_int(p.min, p.max));
        std::vector<std::string> words;
        while (words.size() < count) {
          const auto& w = lexicon_[rng.index(lexicon_.size())];
          if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
        }
        c.params[p.name] = std::move(words);
        break;
      }
      case Domain::keyword:
        c.params[p.name] = lexicon_[rng.index(lexicon_.size())];
        break;
      case Domain::int_range:
        c.params[p.name] = rng.uniform_int(p.min, p.max);
        break;
      case Domain::int_set:
        if (p.int_values.empty()) throw DataError(p.name + ": empty value set");
        c.params[p.name] = p.int_values[rng.index(p.int_values.size())];
        break;
      case Domain::relation: {
        static constexpr std::array<Relation, 3> relations{Relation::at_least, Relation::around, Relation::at_most};
        c.params[p.name] = std::string(relation_name(relations[rng.index(3)]));
        break;
      }
      case Domain::language:
        c.params[p.name] = languages_[rng.index(languages_.size())].code;
        break;
      case Domain::letter:
        c.params[p.name] = std::string(1, static_cast<char>('a' + rng.uniform_int(0, 25)));
        break;
      case Domain::choice:
        if (p.choices.empty()) throw DataError(p.name + ": empty choice set");
        c.params[p.name] = p.choices[rng.index(p.choices.size())];
        break;
      case Domain::option_set:
        if (p.option_sets.empty()) throw DataError(p.name + ": empty option sets");
        c.params[p.name] = p.option_sets[rng.index(p.option_sets.size())];
        break;
      case Domain::index_of:
        c.params[p.name] = rng.uniform_int(1, c.integer(p.of));
        break;
    }
  }
  c.variant_index = static_cast<int>(rng.uniform_int(0, kVariantCount - 1));
  c.rendered_text = render(c);
  return c;
}

std::string Taxonomy::render(const ConstraintInstance& instance) const {
  const auto& s = spec(instance.kind);
  if (instance.variant_index < 0 || instance.variant_index >= static_cast<int>(s.templates.size())) {
    throw DataError("variant index out of range for " + std::string(kind_name(instance.kind)));
  }
  const std::string& tmpl = s.templates[static_cast<std::size_t>(instance.variant_index)];
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos);
      break;
    }
    const auto close = tmpl.find('}', open);
    if (close == std::string::npos) throw DataError("unterminated placeholder in template");
    out.append(tmpl, pos, open - pos);
    const std::string name = tmpl.substr(open + 1, close - open - 1);
    const auto* spec = s.param(name);
    auto value = instance.params.find(name);
    if (!spec || value == instance.params.end()) {
      throw DataError(std::string(kind_name(instance.kind)) + ": placeholder {" + name + "} has no matching param");
    }
    out += render_value(*spec, value->second, *this);
    pos = close + 1;
  }
  return out;
}

void Taxonomy::validate(const ConstraintInstance& c) const {
  const auto& s = spec(c.kind);
  const auto fail = [&](const std::string& why) {
    throw DataError(std::string(kind_name(c.kind)) + ": " + why);
  };
  if (c.params.size() != s.params.size()) fail("parameter count does not match schema");
  for (const auto& p : s.params) {
    if (!c.has(p.name)) fail("missing param " + p.name);
    switch (p.domain) {
      case Domain::keyword_list: {
        const auto& words = c.list(p.name);
        if (static_cast<std::int64_t>(words.size()) < p.min || static_cast<std::int64_t>(words.size()) > p.max) {
          fail(p.name + " size out of range");
        }
        break;
      }
      case Domain::keyword:
        if (c.str(p.name).empty()) fail(p.name + " empty");
        break;
      case Domain::int_range: {
        const auto v = c.integer(p.name);
        if (v < p.min || v > p.max) fail(p.name + " out of range");
        break;
      }
      case Domain::int_set: {
        const auto v = c.integer(p.name);
        if (std::find(p.int_values.begin(), p.int_values.end(), v) == p.int_values.end()) fail(p.name + " not allowed");
        break;
      }
      case Domain::relation:
        parse_relation(c.str(p.name));
        break;
      case Domain::language:
        language(c.str(p.name));
        break;
      case Domain::letter: {
        const auto& l = c.str(p.name);
        if (l.size() != 1 || l[0] < 'a' || l[0] > 'z') fail(p.name + " must be a single letter");
        break;
      }
      case Domain::choice:
        if (std::find(p.choices.begin(), p.choices.end(), c.str(p.name)) == p.choices.end()) fail(p.name + " not allowed");
        break;
      case Domain::option_set:
        if (c.list(p.name).empty()) fail(p.name + " empty");
        break;
      case Domain::index_of: {
        const auto v = c.integer(p.name);
        if (v < 1 || v > c.integer(p.of)) fail(p.name + " out of range");
        break;
      }
    }
  }
  if (c.variant_index < 0 || c.variant_index >= kVariantCount) fail("variant index out of range");
}

ConflictMatrix ConflictMatrix::from_json(const nlohmann::json& doc) {
  ConflictMatrix m;
  if (doc.value("self_conflict", true)) {
    for (std::size_t i = 0; i < kKindCount; ++i) m.matrix_[i][i] = true;
  }
  for (const auto& row : doc.at("pairs")) {
    ConflictRule r;
    r.a = parse_kind(row.at("a").get<std::string>());
    r.b = parse_kind(row.at("b").get<std::string>());
    r.rationale = row.value("rationale", std::string("policy"));
    r.note = row.value("note", std::string());
    m.matrix_[static_cast<std::size_t>(r.a)][static_cast<std::size_t>(r.b)] = true;
    m.matrix_[static_cast<std::size_t>(r.b)][static_cast<std::size_t>(r.a)] = true;
    m.rules_.push_back(std::move(r));
  }
  if (doc.contains("conditional")) {
    for (const auto& row : doc.at("conditional")) {
      ConflictRule r;
      r.a = parse_kind(row.at("a").get<std::string>());
      r.b = parse_kind(row.at("b").get<std::string>());
      r.rationale = row.value("rationale", std::string("policy"));
      r.note = row.value("note", std::string());
      r.when_param = row.at("when_param").get<std::string>();
      r.unless_value = row.at("unless_value").get<std::string>();
      m.conditional_.push_back(std::move(r));
    }
  }
  return m;
}

ConflictMatrix ConflictMatrix::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("conflict matrix not found: " + path.string());
  return from_json(read_json_file(path));
}

const ConflictMatrix& ConflictMatrix::shared() {
  static const ConflictMatrix instance = load(default_data_dir() / "conflicts.json");
  return instance;
}

bool ConflictMatrix::conflicts(const ConstraintInstance& a, const ConstraintInstance& b) const {
  if (conflicts(a.kind, b.kind)) return true;
  for (const auto& rule : conditional_) {
    const auto applies = [&](const ConstraintInstance& x, const ConstraintInstance& y) {
      return x.kind == rule.a && y.kind == rule.b && x.has(*rule.when_param) &&
             x.str(*rule.when_param) != *rule.unless_value;
    };
    if (applies(a, b) || applies(b, a)) return true;
  }
  return params_clash(a, b);
}

bool params_clash(const ConstraintInstance& a, const ConstraintInstance& b) {
  for (const auto& wa : keyword_values(a)) {
    for (const auto& wb : keyword_values(b)) {
      if (text::fold_case(wa) == text::fold_case(wb)) return true;
    }
  }
  return one_way_clash(a, b) || one_way_clash(b, a);
}

}  // namespace probe
