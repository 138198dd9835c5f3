#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "probe/constraints.hpp"

namespace probe {

// Letter counts per writing system. Only letters are counted, so digits,
// punctuation and markdown do not dilute the shares.
struct ScriptShares {
  std::size_t latin = 0;
  std::size_t cyrillic = 0;
  std::size_t han = 0;
  std::size_t kana = 0;
  std::size_t hangul = 0;
  std::size_t other = 0;

  std::size_t letters() const { return latin + cyrillic + han + kana + hangul + other; }
  double share(std::size_t count) const {
    return letters() == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(letters());
  }
};

ScriptShares script_shares(std::string_view text);

using TrigramProfile = std::map<std::u32string, double>;

// Lowercased letter trigrams with word-boundary padding, L2-normalized.
TrigramProfile trigram_profile(std::string_view text);

double cosine(const TrigramProfile& a, const TrigramProfile& b);

// Script heuristics first; Latin-script languages are then told apart by
// trigram similarity against profiles built from the packaged samples.
class LanguageIdentifier {
 public:
  static LanguageIdentifier build(const Taxonomy& taxonomy);
  static const LanguageIdentifier& shared();

  // Language code of the dominant language, or empty when no script holds
  // the dominant share.
  std::string identify(std::string_view text) const;

  double dominant_share() const { return dominant_share_; }

 private:
  struct Entry {
    std::string code;
    std::string script;
    TrigramProfile profile;
  };

  std::vector<Entry> entries_;
  double dominant_share_ = 0.5;
};

}  // namespace probe
