#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace probe::text {

// Unicode helpers shared by the checkers and the synthetic response builder.
// All strings are UTF-8.

std::string normalize_nfc(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
std::string fold_case(std::string_view s);
std::string ascii_lower(std::string_view s);

// Calls fn(code_point, byte_offset) for every code point; malformed bytes are
// reported as U+FFFD.
void for_each_code_point(std::string_view s, const std::function<void(char32_t, std::size_t)>& fn);

bool is_space(char32_t c);
bool is_alnum(char32_t c);
bool is_letter(char32_t c);
bool is_upper(char32_t c);
bool is_lower(char32_t c);

bool has_lowercase(std::string_view s);
bool has_uppercase(std::string_view s);

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);

// Maximal runs of non-whitespace code points.
std::vector<std::string_view> split_whitespace(std::string_view s);

// Lines without their terminators; "\r\n" is treated as one break.
std::vector<std::string_view> split_lines(std::string_view s);

// Drops leading and trailing code points that are not letters or digits.
std::string_view strip_non_alnum(std::string_view token);

// Token whose alphanumeric core has at least two letters, all uppercase.
bool is_capital_word(std::string_view token);

// Case-insensitive whole-word occurrences of `word` (a single token).
// Word boundaries are any non-alphanumeric code points.
std::size_t count_word(std::string_view haystack, std::string_view word);

bool starts_with_ci(std::string_view s, std::string_view prefix);
bool ends_with_ci(std::string_view s, std::string_view suffix);
bool contains_ci(std::string_view s, std::string_view needle);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace probe::text
