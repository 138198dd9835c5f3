#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "probe/constraints.hpp"
#include "probe/language.hpp"

namespace probe {

struct Verdict {
  bool satisfied = false;
  std::string detail;
};

enum class ParagraphMode { divider, blank_line };

// Segmentation and counting primitives. Inputs are used as given; verify()
// normalizes to NFC before calling them.
std::size_t count_words(std::string_view text);
std::size_t count_sentences(std::string_view text);
std::vector<std::string> split_paragraphs(std::string_view text, ParagraphMode mode);

std::size_t count_letter(std::string_view text, char letter);
std::size_t count_commas(std::string_view text);
std::size_t count_highlights(std::string_view text);
std::size_t count_placeholders(std::string_view text);
std::size_t count_bullets(std::string_view text);
std::size_t count_sections(std::string_view text, std::string_view splitter);
std::size_t count_capital_words(std::string_view text);
bool has_title(std::string_view text);
bool has_postscript(std::string_view text, std::string_view marker);
bool is_json_document(std::string_view text);
bool is_all_uppercase(std::string_view text);
bool is_all_lowercase(std::string_view text);
bool is_quoted(std::string_view text);
std::string first_word(std::string_view paragraph);

// True when `count` meets `relation` against n. "around" accepts values
// within tolerance * n of n, inclusive.
bool meets(std::size_t count, Relation relation, std::int64_t n, double tolerance);

struct VerifierOptions {
  double around_tolerance = 0.10;
};

class Verifier {
 public:
  Verifier(const LanguageIdentifier& languages, VerifierOptions options = {})
      : languages_(&languages), options_(options) {}

  static const Verifier& shared();

  // Throws DispatchError for a kind outside the registry.
  Verdict verify(std::string_view response, const ConstraintInstance& instance) const;

  const VerifierOptions& options() const { return options_; }

 private:
  Verdict check(const std::string& text, const ConstraintInstance& c) const;

  const LanguageIdentifier* languages_;
  VerifierOptions options_;
};

inline Verdict verify(std::string_view response, const ConstraintInstance& instance) {
  return Verifier::shared().verify(response, instance);
}

}  // namespace probe
