#include "probe/verifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <string>

#include <json.hpp>

#include "probe/error.hpp"
#include "probe/text.hpp"

namespace probe {

namespace {

// Tokens ending in one of these do not close a sentence.
constexpr std::array<std::string_view, 17> kAbbreviations{
    "mr.", "mrs.", "ms.", "dr.",   "st.",   "prof.", "jr.", "sr.", "vs.",
    "etc.", "e.g.", "i.e.", "p.s.", "p.p.s.", "u.s.", "a.m.", "p.m.",
};

bool ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

bool has_alnum(std::string_view s) {
  bool found = false;
  text::for_each_code_point(s, [&](char32_t c, std::size_t) { found = found || text::is_alnum(c); });
  return found;
}

// Fullwidth stops close a sentence without trailing whitespace.
std::size_t cjk_terminator_length(std::string_view s, std::size_t i) {
  static constexpr std::array<std::string_view, 3> stops{"。", "！", "？"};
  for (auto stop : stops) {
    if (s.substr(i, stop.size()) == stop) return stop.size();
  }
  return 0;
}

bool guarded(std::string_view text, std::size_t token_end) {
  std::size_t start = token_end;
  while (start > 0 && !ascii_space(text[start - 1])) --start;
  std::string token = text::ascii_lower(text.substr(start, token_end - start));
  while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.front()))) token.erase(token.begin());
  while (!token.empty() && is_closer(token.back())) token.pop_back();
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), token) != kAbbreviations.end();
}

std::string_view ltrim_markup(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (ascii_space(line[i]) || line[i] == '*' || line[i] == '_' || line[i] == '#' ||
                             line[i] == '>' || line[i] == '"')) {
    ++i;
  }
  return line.substr(i);
}

std::string strip_code_fences(std::string_view s) {
  std::string_view t = text::trim(s);
  if (t.starts_with("```")) {
    const auto nl = t.find('\n');
    t = nl == std::string_view::npos ? std::string_view{} : t.substr(nl + 1);
  }
  t = text::trim(t);
  if (t.ends_with("```")) t = text::trim(t.substr(0, t.size() - 3));
  return std::string(t);
}

std::string summarize(std::size_t count, std::string_view what) {
  return "found " + std::to_string(count) + " " + std::string(what);
}

}  // namespace

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  for (auto token : text::split_whitespace(text)) {
    if (std::any_of(token.begin(), token.end(), [](char c) { return c != '*' && c != '#' && c != '>'; })) ++n;
  }
  return n;
}

std::size_t count_sentences(std::string_view text) {
  std::size_t count = 0;
  std::size_t segment_start = 0;
  std::size_t i = 0;
  const auto close_segment = [&](std::size_t end) {
    if (has_alnum(text.substr(segment_start, end - segment_start))) ++count;
    segment_start = end;
  };
  while (i < text.size()) {
    if (const auto len = cjk_terminator_length(text, i)) {
      i += len;
      close_segment(i);
      continue;
    }
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    const std::size_t first = i;
    std::size_t j = i;
    while (j < text.size() && is_terminator(text[j])) ++j;
    const std::size_t punct_end = j;
    while (j < text.size() && is_closer(text[j])) ++j;
    if (j < text.size() && !ascii_space(text[j])) {
      i = j;
      continue;
    }
    const bool only_period = std::all_of(text.begin() + first, text.begin() + punct_end, [](char c) { return c == '.'; });
    if (only_period && punct_end - first == 1 && guarded(text, j)) {
      i = j;
      continue;
    }
    close_segment(j);
    i = j;
  }
  close_segment(text.size());
  return count;
}

std::vector<std::string> split_paragraphs(std::string_view text, ParagraphMode mode) {
  std::vector<std::string> out;
  std::string current;
  const auto flush = [&] {
    const auto t = text::trim(current);
    if (!t.empty()) out.emplace_back(t);
    current.clear();
  };
  for (auto line : text::split_lines(text)) {
    const auto t = text::trim(line);
    const bool separator = mode == ParagraphMode::divider ? t == "***" : t.empty();
    if (separator) {
      flush();
      continue;
    }
    if (!current.empty()) current += '\n';
    current += line;
  }
  flush();
  return out;
}

std::size_t count_letter(std::string_view text, char letter) {
  const char32_t lower = static_cast<char32_t>(std::tolower(static_cast<unsigned char>(letter)));
  const char32_t upper = static_cast<char32_t>(std::toupper(static_cast<unsigned char>(letter)));
  std::size_t n = 0;
  text::for_each_code_point(text, [&](char32_t c, std::size_t) { n += (c == lower || c == upper) ? 1 : 0; });
  return n;
}

std::size_t count_commas(std::string_view text) {
  std::size_t n = 0;
  text::for_each_code_point(text, [&](char32_t c, std::size_t) { n += (c == U',' || c == U'，') ? 1 : 0; });
  return n;
}

std::size_t count_highlights(std::string_view text) {
  std::size_t n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '*' || i + 1 >= text.size() || text[i + 1] == '*' || ascii_space(text[i + 1])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    bool closed = false;
    for (; j < text.size() && text[j] != '\n'; ++j) {
      if (text[j] == '*' && !ascii_space(text[j - 1])) {
        closed = true;
        break;
      }
    }
    if (closed) {
      ++n;
      i = j + 1;
    } else {
      ++i;
    }
  }
  return n;
}

std::size_t count_placeholders(std::string_view text) {
  std::size_t n = 0;
  std::size_t open = std::string_view::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '[') {
      open = i;
    } else if (c == '\n') {
      open = std::string_view::npos;
    } else if (c == ']') {
      if (open != std::string_view::npos && i > open + 1) ++n;
      open = std::string_view::npos;
    }
  }
  return n;
}

std::size_t count_bullets(std::string_view text) {
  std::size_t n = 0;
  for (auto line : text::split_lines(text)) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (line.substr(i).starts_with("* ")) ++n;
  }
  return n;
}

std::size_t count_sections(std::string_view text, std::string_view splitter) {
  std::size_t n = 0;
  for (auto line : text::split_lines(text)) {
    auto rest = ltrim_markup(line);
    if (!text::starts_with_ci(rest, splitter)) continue;
    rest.remove_prefix(splitter.size());
    std::size_t i = 0;
    while (i < rest.size() && ascii_space(rest[i])) ++i;
    if (i == 0) continue;
    std::size_t digits = 0;
    while (i + digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i + digits]))) ++digits;
    if (digits > 0) ++n;
  }
  return n;
}

std::size_t count_capital_words(std::string_view text) {
  const auto tokens = text::split_whitespace(text);
  return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), text::is_capital_word));
}

bool has_title(std::string_view text) {
  for (auto line : text::split_lines(text)) {
    const auto open = line.find("<<");
    if (open == std::string_view::npos) continue;
    const auto close = line.find(">>", open + 3);
    if (close != std::string_view::npos) return true;
  }
  return false;
}

bool has_postscript(std::string_view text, std::string_view marker) {
  const auto paragraphs = split_paragraphs(text, ParagraphMode::blank_line);
  if (paragraphs.empty()) return false;
  for (auto line : text::split_lines(paragraphs.back())) {
    const auto rest = ltrim_markup(line);
    if (text::starts_with_ci(rest, marker) && has_alnum(rest.substr(marker.size()))) return true;
  }
  return false;
}

bool is_json_document(std::string_view text) {
  const std::string body = strip_code_fences(text);
  return !body.empty() && nlohmann::json::accept(body);
}

bool is_all_uppercase(std::string_view text) {
  bool cased = false;
  bool lower = false;
  text::for_each_code_point(text, [&](char32_t c, std::size_t) {
    cased = cased || text::is_upper(c) || text::is_lower(c);
    lower = lower || text::is_lower(c);
  });
  return cased && !lower;
}

bool is_all_lowercase(std::string_view text) {
  bool cased = false;
  bool upper = false;
  text::for_each_code_point(text, [&](char32_t c, std::size_t) {
    cased = cased || text::is_upper(c) || text::is_lower(c);
    upper = upper || text::is_upper(c);
  });
  return cased && !upper;
}

bool is_quoted(std::string_view text) {
  const auto t = text::trim(text);
  return t.size() >= 2 && t.front() == '"' && t.back() == '"';
}

std::string first_word(std::string_view paragraph) {
  for (auto token : text::split_whitespace(paragraph)) {
    const auto core = text::strip_non_alnum(token);
    if (!core.empty()) return text::fold_case(core);
  }
  return {};
}

bool meets(std::size_t count, Relation relation, std::int64_t n, double tolerance) {
  const auto c = static_cast<std::int64_t>(count);
  switch (relation) {
    case Relation::at_least: return c >= n;
    case Relation::at_most: return c <= n;
    case Relation::around:
      return std::fabs(static_cast<double>(c - n)) <= tolerance * static_cast<double>(n) + 1e-9;
  }
  return false;
}

const Verifier& Verifier::shared() {
  static const Verifier instance(LanguageIdentifier::shared());
  return instance;
}

Verdict Verifier::verify(std::string_view response, const ConstraintInstance& instance) const {
  return check(text::normalize_nfc(response), instance);
}

Verdict Verifier::check(const std::string& r, const ConstraintInstance& c) const {
  const double tol = options_.around_tolerance;
  const auto counted = [&](std::size_t found, bool ok, std::string_view what) {
    return Verdict{ok, summarize(found, what)};
  };
  switch (c.kind) {
    case Kind::IncludeKeywords: {
      for (const auto& k : c.list("keywords")) {
        if (text::count_word(r, k) == 0) return {false, "missing keyword '" + k + "'"};
      }
      return {true, "all keywords present"};
    }
    case Kind::ExcludeKeywords: {
      for (const auto& k : c.list("keywords")) {
        if (const auto n = text::count_word(r, k)) return {false, "excluded keyword '" + k + "' appears " + std::to_string(n) + " times"};
      }
      return {true, "no excluded keyword"};
    }
    case Kind::KeywordFrequency: {
      const auto n = text::count_word(r, c.str("keyword"));
      return counted(n, static_cast<std::int64_t>(n) == c.integer("N"), "occurrences of '" + c.str("keyword") + "'");
    }
    case Kind::LetterFrequency: {
      const auto n = count_letter(r, c.str("letter").front());
      return counted(n, static_cast<std::int64_t>(n) == c.integer("N"), "occurrences of '" + c.str("letter") + "'");
    }
    case Kind::ResponseLanguage: {
      const auto code = languages_->identify(r);
      return {code == c.str("language"), "identified '" + (code.empty() ? std::string("none") : code) + "'"};
    }
    case Kind::NumberParagraphs: {
      const auto n = split_paragraphs(r, ParagraphMode::divider).size();
      return counted(n, static_cast<std::int64_t>(n) == c.integer("N"), "paragraphs");
    }
    case Kind::NumberWords: {
      const auto n = count_words(r);
      return counted(n, meets(n, c.relation(), c.integer("N"), tol), "words");
    }
    case Kind::NumberSentences: {
      const auto n = count_sentences(r);
      return counted(n, meets(n, c.relation(), c.integer("N"), tol), "sentences");
    }
    case Kind::ParagraphsFirstWord: {
      const auto paragraphs = split_paragraphs(r, ParagraphMode::blank_line);
      if (static_cast<std::int64_t>(paragraphs.size()) != c.integer("N")) return counted(paragraphs.size(), false, "paragraphs");
      const auto word = first_word(paragraphs[static_cast<std::size_t>(c.integer("i") - 1)]);
      const bool ok = word == text::fold_case(c.str("first_word"));
      return {ok, "paragraph " + std::to_string(c.integer("i")) + " starts with '" + word + "'"};
    }
    case Kind::Postscript: {
      const bool ok = has_postscript(r, c.str("marker"));
      return {ok, ok ? "postscript found" : "no postscript starting with " + c.str("marker")};
    }
    case Kind::NumberPlaceholders: {
      const auto n = count_placeholders(r);
      return counted(n, static_cast<std::int64_t>(n) >= c.integer("N"), "placeholders");
    }
    case Kind::NumberBullets: {
      const auto n = count_bullets(r);
      return counted(n, static_cast<std::int64_t>(n) == c.integer("N"), "bullet points");
    }
    case Kind::Title: {
      const bool ok = has_title(r);
      return {ok, ok ? "title found" : "no <<title>>"};
    }
    case Kind::ChooseFrom: {
      for (const auto& option : c.list("options")) {
        if (text::contains_ci(r, option)) return {true, "contains '" + option + "'"};
      }
      return {false, "none of the options found"};
    }
    case Kind::HighlightedSections: {
      const auto n = count_highlights(r);
      return counted(n, static_cast<std::int64_t>(n) >= c.integer("N"), "highlighted sections");
    }
    case Kind::MultipleSections: {
      const auto n = count_sections(r, c.str("splitter"));
      return counted(n, static_cast<std::int64_t>(n) == c.integer("N"), "sections");
    }
    case Kind::JsonFormat: {
      const bool ok = is_json_document(r);
      return {ok, ok ? "valid JSON" : "not parseable as JSON"};
    }
    case Kind::AllUppercase: {
      const bool ok = is_all_uppercase(r);
      return {ok, ok ? "no lowercase letters" : "lowercase letters present"};
    }
    case Kind::AllLowercase: {
      const bool ok = is_all_lowercase(r);
      return {ok, ok ? "no uppercase letters" : "uppercase letters present"};
    }
    case Kind::CapitalWordFrequency: {
      const auto n = count_capital_words(r);
      return counted(n, static_cast<std::int64_t>(n) >= c.integer("N"), "capital words");
    }
    case Kind::EndChecker: {
      const bool ok = text::ends_with_ci(text::trim_right(r), c.str("phrase"));
      return {ok, ok ? "ends with phrase" : "does not end with phrase"};
    }
    case Kind::Quotation: {
      const bool ok = is_quoted(r);
      return {ok, ok ? "wrapped in quotes" : "not wrapped in double quotes"};
    }
    case Kind::NoCommas: {
      const auto n = count_commas(r);
      return counted(n, n == 0, "commas");
    }
  }
  throw DispatchError("no checker for kind " + std::to_string(static_cast<int>(c.kind)));
}

}  // namespace probe
