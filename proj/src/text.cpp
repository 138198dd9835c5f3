#include "probe/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>

#include "probe/error.hpp"

namespace probe::text {

namespace {

icu::UnicodeString to_icu(std::string_view s) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

std::string from_icu(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

// Splits `s` into alternating alphanumeric runs; calls fn on each run.
template <typename Fn>
void for_each_alnum_run(std::string_view s, Fn&& fn) {
  std::size_t start = std::string_view::npos;
  for_each_code_point(s, [&](char32_t c, std::size_t off) {
    const bool word = is_alnum(c);
    if (word && start == std::string_view::npos) start = off;
    if (!word && start != std::string_view::npos) {
      fn(s.substr(start, off - start));
      start = std::string_view::npos;
    }
  });
  if (start != std::string_view::npos) fn(s.substr(start));
}

}  // namespace

std::string normalize_nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw ConfigError("ICU NFC normalizer unavailable");
  icu::UnicodeString out = nfc->normalize(to_icu(s), status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  return from_icu(out);
}

std::string to_upper(std::string_view s) { return from_icu(to_icu(s).toUpper(icu::Locale::getRoot())); }

std::string to_lower(std::string_view s) { return from_icu(to_icu(s).toLower(icu::Locale::getRoot())); }

std::string fold_case(std::string_view s) { return from_icu(to_icu(s).foldCase()); }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c);
  });
  return out;
}

void for_each_code_point(std::string_view s, const std::function<void(char32_t, std::size_t)>& fn) {
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t offset = i;
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    fn(c < 0 ? U'�' : static_cast<char32_t>(c), static_cast<std::size_t>(offset));
  }
}

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }
bool is_alnum(char32_t c) { return u_isalnum(static_cast<UChar32>(c)); }
bool is_letter(char32_t c) { return u_isalpha(static_cast<UChar32>(c)); }
bool is_upper(char32_t c) { return u_isupper(static_cast<UChar32>(c)); }
bool is_lower(char32_t c) { return u_islower(static_cast<UChar32>(c)); }

bool has_lowercase(std::string_view s) {
  bool found = false;
  for_each_code_point(s, [&](char32_t c, std::size_t) { found = found || is_lower(c); });
  return found;
}

bool has_uppercase(std::string_view s) {
  bool found = false;
  for_each_code_point(s, [&](char32_t c, std::size_t) { found = found || is_upper(c); });
  return found;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

std::string_view trim_right(std::string_view s) {
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  if (last == std::string_view::npos) return {};
  return s.substr(0, last + 1);
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = std::string_view::npos;
  for_each_code_point(s, [&](char32_t c, std::size_t off) {
    if (is_space(c)) {
      if (start != std::string_view::npos) out.push_back(s.substr(start, off - start));
      start = std::string_view::npos;
    } else if (start == std::string_view::npos) {
      start = off;
    }
  });
  if (start != std::string_view::npos) out.push_back(s.substr(start));
  return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\n') {
      std::size_t end = i;
      if (end > start && s[end - 1] == '\r') --end;
      out.push_back(s.substr(start, end - start));
      start = i + 1;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

std::string_view strip_non_alnum(std::string_view token) {
  std::size_t first = std::string_view::npos;
  std::size_t end = 0;
  for_each_code_point(token, [&](char32_t c, std::size_t off) {
    if (!is_alnum(c)) return;
    if (first == std::string_view::npos) first = off;
    end = off + static_cast<std::size_t>(U8_LENGTH(static_cast<UChar32>(c)));
  });
  if (first == std::string_view::npos) return {};
  return token.substr(first, end - first);
}

bool is_capital_word(std::string_view token) {
  std::size_t letters = 0;
  bool all_upper = true;
  for_each_code_point(strip_non_alnum(token), [&](char32_t c, std::size_t) {
    if (!is_letter(c)) return;
    ++letters;
    if (!is_upper(c)) all_upper = false;
  });
  return letters >= 2 && all_upper;
}

std::size_t count_word(std::string_view haystack, std::string_view word) {
  const std::string target = fold_case(word);
  if (target.empty()) return 0;
  std::size_t count = 0;
  for_each_alnum_run(haystack, [&](std::string_view run) {
    if (fold_case(run) == target) ++count;
  });
  return count;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  const std::string a = fold_case(s), b = fold_case(prefix);
  return a.rfind(b, 0) == 0;
}

bool ends_with_ci(std::string_view s, std::string_view suffix) {
  const std::string a = fold_case(s), b = fold_case(suffix);
  return a.size() >= b.size() && a.compare(a.size() - b.size(), b.size(), b) == 0;
}

bool contains_ci(std::string_view s, std::string_view needle) {
  return fold_case(s).find(fold_case(needle)) != std::string::npos;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace probe::text
