#include "probe/language.hpp"

#include <unicode/uscript.h>

#include <cmath>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/text.hpp"

namespace probe {

namespace {

// Kana share (of all CJK letters) above which Han-heavy text reads as Japanese.
constexpr double kKanaShare = 0.1;

std::string dominant_script(const ScriptShares& s, double threshold) {
  if (s.letters() == 0) return {};
  if (s.share(s.latin) >= threshold) return "Latin";
  if (s.share(s.cyrillic) >= threshold) return "Cyrillic";
  if (s.share(s.hangul) >= threshold) return "Hangul";
  const std::size_t cjk = s.han + s.kana;
  if (s.share(cjk) >= threshold) {
    const double kana = static_cast<double>(s.kana) / static_cast<double>(cjk);
    if (kana >= kKanaShare) return "Japanese";
    if (s.share(s.han) >= threshold) return "Han";
  }
  return {};
}

}  // namespace

ScriptShares script_shares(std::string_view input) {
  ScriptShares s;
  text::for_each_code_point(input, [&](char32_t c, std::size_t) {
    if (!text::is_letter(c)) return;
    UErrorCode status = U_ZERO_ERROR;
    const UScriptCode script = uscript_getScript(static_cast<UChar32>(c), &status);
    switch (script) {
      case USCRIPT_LATIN: ++s.latin; break;
      case USCRIPT_CYRILLIC: ++s.cyrillic; break;
      case USCRIPT_HAN: ++s.han; break;
      case USCRIPT_HIRAGANA:
      case USCRIPT_KATAKANA: ++s.kana; break;
      case USCRIPT_HANGUL: ++s.hangul; break;
      default: ++s.other; break;
    }
  });
  return s;
}

TrigramProfile trigram_profile(std::string_view input) {
  TrigramProfile profile;
  std::u32string word;
  const auto flush = [&] {
    if (word.empty()) return;
    const std::u32string padded = U" " + word + U" ";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) profile[padded.substr(i, 3)] += 1.0;
    word.clear();
  };
  text::for_each_code_point(text::to_lower(input), [&](char32_t c, std::size_t) {
    if (text::is_letter(c)) {
      word.push_back(c);
    } else {
      flush();
    }
  });
  flush();
  double norm = 0.0;
  for (const auto& [_, v] : profile) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (auto& [_, v] : profile) v /= norm;
  }
  return profile;
}

double cosine(const TrigramProfile& a, const TrigramProfile& b) {
  const auto& small = a.size() < b.size() ? a : b;
  const auto& large = a.size() < b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [k, v] : small) {
    if (auto it = large.find(k); it != large.end()) dot += v * it->second;
  }
  return dot;
}

LanguageIdentifier LanguageIdentifier::build(const Taxonomy& taxonomy) {
  LanguageIdentifier id;
  id.dominant_share_ = taxonomy.dominant_share();
  for (const auto& lang : taxonomy.languages()) {
    Entry e{lang.code, lang.script, {}};
    if (lang.script == "Latin" || lang.script == "Cyrillic") {
      e.profile = trigram_profile(read_text_file(lang.sample));
      if (e.profile.empty()) throw DataError("language sample for " + lang.code + " has no letters");
    }
    id.entries_.push_back(std::move(e));
  }
  return id;
}

const LanguageIdentifier& LanguageIdentifier::shared() {
  static const LanguageIdentifier instance = build(Taxonomy::shared());
  return instance;
}

std::string LanguageIdentifier::identify(std::string_view input) const {
  const std::string script = dominant_script(script_shares(input), dominant_share_);
  if (script.empty()) return {};
  std::vector<const Entry*> candidates;
  for (const auto& e : entries_) {
    if (e.script == script) candidates.push_back(&e);
  }
  if (candidates.empty()) return {};
  if (candidates.size() == 1) return candidates.front()->code;
  const TrigramProfile profile = trigram_profile(input);
  const Entry* best = nullptr;
  double best_score = -1.0;
  for (const Entry* e : candidates) {
    const double score = cosine(profile, e->profile);
    if (score > best_score) {
      best_score = score;
      best = e;
    }
  }
  return best->code;
}

}  // namespace probe
