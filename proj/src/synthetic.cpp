#include "probe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_set>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/text.hpp"

namespace probe {

namespace {

constexpr int kAttempts = 12;
constexpr std::size_t kMinPool = 12;

// Tokens that would read as abbreviations once a period follows them.
const std::unordered_set<std::string> kGuardWords{"mr", "mrs", "ms", "dr", "st", "prof", "jr", "sr", "vs", "etc"};

struct Tok {
  std::string text;
  bool flex = false;
  bool period = false;
  bool comma = false;
};

struct Paragraph {
  std::string header;
  std::string title;
  bool title_after_body = false;
  std::vector<Tok> body;
  std::vector<std::string> tail;
};

enum class Layout { single, divider, blank_line, sections };
enum class Casing { none, upper, lower };

std::string capitalize(const std::string& word) {
  std::size_t first_len = 0;
  bool done = false;
  text::for_each_code_point(word, [&](char32_t, std::size_t off) {
    if (done) return;
    if (off > 0) {
      first_len = off;
      done = true;
    }
  });
  if (!done) first_len = word.size();
  return text::to_upper(word.substr(0, first_len)) + word.substr(first_len);
}

struct Draft {
  Layout layout = Layout::single;
  std::vector<Paragraph> paragraphs;
  std::string end_phrase;
  bool json = false;
  bool json_valid = true;
  std::string json_key;
  bool quote = false;
  bool quote_closed = true;
  Casing casing = Casing::none;
  bool cased = true;

  std::string render_body(const std::vector<Tok>& body) const {
    std::string out;
    bool capital_next = true;
    for (const auto& t : body) {
      if (!out.empty()) out += ' ';
      out += (cased && capital_next) ? capitalize(t.text) : t.text;
      if (t.comma) out += ',';
      if (t.period) out += '.';
      capital_next = t.period;
    }
    return out;
  }

  std::string render() const {
    std::vector<std::string> blocks;
    for (const auto& p : paragraphs) {
      std::vector<std::string> lines;
      if (!p.header.empty()) lines.push_back(p.header);
      if (!p.title.empty() && !p.title_after_body) lines.push_back(p.title);
      lines.push_back(render_body(p.body));
      if (!p.title.empty() && p.title_after_body) lines.push_back(p.title);
      lines.insert(lines.end(), p.tail.begin(), p.tail.end());
      blocks.push_back(text::join(lines, "\n"));
    }
    const char* sep = layout == Layout::divider ? "\n***\n" : "\n\n";
    std::string out = text::join(blocks, sep);
    if (!end_phrase.empty()) out += " " + end_phrase;
    if (json) {
      std::replace(out.begin(), out.end(), '\n', ' ');
      out = "{\n  \"" + json_key + "\": " + nlohmann::json(out).dump() + (json_valid ? "\n}" : "");
    }
    if (quote) out = "\"" + out + (quote_closed ? "\"" : "");
    if (casing == Casing::upper) out = text::to_upper(out);
    if (casing == Casing::lower) out = text::to_lower(out);
    return out;
  }
};

struct Range {
  std::int64_t lo;
  std::int64_t hi;
  bool empty() const { return lo > hi; }
};

std::int64_t pick(std::vector<Range> ranges, Rng& rng, std::string_view what) {
  ranges.erase(std::remove_if(ranges.begin(), ranges.end(), [](const Range& r) { return r.empty(); }), ranges.end());
  if (ranges.empty()) throw ConfigError("no feasible " + std::string(what) + " count for the requested verdicts");
  const Range& r = ranges[rng.index(ranges.size())];
  return rng.uniform_int(r.lo, r.hi);
}

std::int64_t around_lo(std::int64_t n, double tol) {
  return static_cast<std::int64_t>(std::ceil(static_cast<double>(n) * (1.0 - tol) - 1e-9));
}

std::int64_t around_hi(std::int64_t n, double tol) {
  return static_cast<std::int64_t>(std::floor(static_cast<double>(n) * (1.0 + tol) + 1e-9));
}

// Count ranges that do (follow) or do not (break) meet `relation` against n,
// restricted to values >= floor. `spread` bounds how far from n we wander.
std::vector<Range> count_ranges(Relation relation, std::int64_t n, bool follow, std::int64_t floor, std::int64_t spread,
                                double tol) {
  switch (relation) {
    case Relation::at_least:
      if (follow) return {{std::max(n, floor), std::max(n, floor) + spread}};
      return {{std::max(floor, n - spread), n - 1}};
    case Relation::at_most:
      if (follow) return {{std::max(floor, n - spread), n}};
      return {{std::max(floor, n + 1), std::max(floor, n + 1) + spread}};
    case Relation::around: {
      const auto lo = around_lo(n, tol);
      const auto hi = around_hi(n, tol);
      if (follow) return {{std::max(lo, floor), hi}};
      return {{std::max(floor, lo - spread), lo - 1}, {std::max(floor, hi + 1), std::max(floor, hi + 1) + spread}};
    }
  }
  return {};
}

std::string other_language(const std::string& code) { return code == "en" ? "fr" : "en"; }

std::string trim_final_punct(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == '?' || s.back() == '!')) s.pop_back();
  return s;
}

std::string drop_last_word(const std::string& s) {
  const auto cut = s.find_last_of(' ');
  return cut == std::string::npos ? s.substr(0, s.size() / 2) : s.substr(0, cut);
}

}  // namespace

double SyntheticProfile::probability(Kind kind, std::size_t position, std::size_t n) const {
  const double base = p[static_cast<std::size_t>(kind)];
  const double offset = n > 1 ? static_cast<double>(position) / static_cast<double>(n - 1) - 0.5 : 0.0;
  return std::clamp(base + (beta + gamma * (1.0 - base)) * offset, 0.0, 1.0);
}

SyntheticProfile SyntheticProfile::uniform(double p, double beta, double gamma) {
  SyntheticProfile s;
  s.p.fill(p);
  s.beta = beta;
  s.gamma = gamma;
  return s;
}

SyntheticProfile SyntheticProfile::spread(double lo, double hi, double beta, double gamma) {
  std::vector<Kind> kinds(all_kinds().begin(), all_kinds().end());
  std::sort(kinds.begin(), kinds.end(), [](Kind a, Kind b) {
    return stable_hash(kind_name(a), 17) < stable_hash(kind_name(b), 17);
  });
  SyntheticProfile s;
  s.beta = beta;
  s.gamma = gamma;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    s.p[static_cast<std::size_t>(kinds[i])] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kinds.size() - 1);
  }
  return s;
}

nlohmann::json SyntheticProfile::to_json() const {
  nlohmann::json ps = nlohmann::json::object();
  for (Kind k : all_kinds()) ps[std::string(kind_name(k))] = p[static_cast<std::size_t>(k)];
  return {{"p", ps}, {"beta", beta}, {"gamma", gamma}};
}

SyntheticProfile SyntheticProfile::from_json(const nlohmann::json& j) {
  SyntheticProfile s;
  if (j.contains("spread")) {
    const auto& sp = j.at("spread");
    s = spread(sp.at(0).get<double>(), sp.at(1).get<double>(), 0.0, 0.0);
  } else {
    s.p.fill(j.value("default_p", 0.5));
  }
  if (j.contains("p")) {
    for (const auto& [name, value] : j.at("p").items()) {
      const double v = value.get<double>();
      if (v < 0.0 || v > 1.0) throw ConfigError("synthetic probability for " + name + " outside [0,1]");
      s.p[static_cast<std::size_t>(parse_kind(name))] = v;
    }
  }
  s.beta = j.value("beta", 0.0);
  s.gamma = j.value("gamma", 0.0);
  return s;
}

double expected_accuracy(const SyntheticProfile& profile, std::span<const Kind> order) {
  if (order.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) sum += profile.probability(order[i], i, order.size());
  return sum / static_cast<double>(order.size());
}

double decision_draw(std::string_view family_id, Kind kind, std::uint64_t seed) {
  std::string key(family_id);
  key += '#';
  key += kind_name(kind);
  return Rng(stable_hash(key, seed)).uniform01();
}

ResponseBuilder::ResponseBuilder(const Taxonomy& taxonomy, const Verifier& verifier)
    : taxonomy_(&taxonomy), verifier_(&verifier) {
  std::unordered_set<std::string> lexicon;
  for (const auto& w : taxonomy.lexicon()) lexicon.insert(text::fold_case(w));
  for (const auto& lang : taxonomy.languages()) {
    const bool joined = lang.script == "Han" || lang.script == "Japanese";
    const bool cased = lang.script == "Latin" || lang.script == "Cyrillic";
    const std::string sample = read_text_file(lang.sample);
    std::vector<std::string> cores;
    for (auto token : text::split_whitespace(sample)) {
      const auto core = text::strip_non_alnum(token);
      if (core.empty()) continue;
      bool digit = false;
      text::for_each_code_point(core, [&](char32_t c, std::size_t) { digit = digit || (c >= U'0' && c <= U'9'); });
      if (digit) continue;
      cores.push_back(cased ? text::to_lower(core) : std::string(core));
    }
    std::vector<std::string> words;
    if (joined) {
      for (std::size_t i = 0; i + 1 < cores.size(); i += 2) words.push_back(cores[i] + cores[i + 1]);
    } else {
      words = cores;
    }
    std::set<std::string> seen;
    std::vector<std::string> pool;
    for (auto& w : words) {
      const auto folded = text::fold_case(w);
      if (lexicon.count(folded) || kGuardWords.count(folded)) continue;
      if (seen.insert(w).second) pool.push_back(w);
    }
    if (pool.size() < kMinPool) throw ConfigError("language sample for " + lang.code + " yields too few filler words");
    pools_[lang.code] = std::move(pool);
    cased_[lang.code] = cased;
  }
}

const ResponseBuilder& ResponseBuilder::shared() {
  static const ResponseBuilder instance(Taxonomy::shared(), Verifier::shared());
  return instance;
}

std::span<const std::string> ResponseBuilder::pool(std::string_view language) const {
  auto it = pools_.find(language);
  if (it == pools_.end()) throw ConfigError("no filler words for language '" + std::string(language) + "'");
  return it->second;
}

std::string ResponseBuilder::build(std::span<const ConstraintInstance> constraints, const std::vector<bool>& follow,
                                   Rng& rng) const {
  if (constraints.size() != follow.size()) throw ArgumentError("one decision per constraint is required");
  std::set<Kind> kinds;
  for (const auto& c : constraints) {
    if (!kinds.insert(c.kind).second) throw ArgumentError("duplicate constraint kind " + std::string(kind_name(c.kind)));
  }
  std::string last_error;
  for (int a = 0; a < kAttempts; ++a) {
    try {
      return attempt(constraints, follow, rng);
    } catch (const ConfigError& e) {
      last_error = e.what();
    }
  }
  throw ConfigError("synthetic response could not be assembled: " + last_error);
}

std::string ResponseBuilder::attempt(std::span<const ConstraintInstance> constraints, const std::vector<bool>& follow,
                                     Rng& rng) const {
  const double tol = verifier_->options().around_tolerance;
  const auto find = [&](Kind k) -> const ConstraintInstance* {
    for (const auto& c : constraints) {
      if (c.kind == k) return &c;
    }
    return nullptr;
  };
  const auto follows = [&](Kind k) {
    for (std::size_t j = 0; j < constraints.size(); ++j) {
      if (constraints[j].kind == k) return static_cast<bool>(follow[j]);
    }
    return false;
  };

  std::string lang = "en";
  if (const auto* c = find(Kind::ResponseLanguage)) {
    lang = follows(Kind::ResponseLanguage) ? c->str("language") : other_language(c->str("language"));
  }
  const auto base_pool = pool(lang);

  std::optional<char> letter;
  if (const auto* c = find(Kind::LetterFrequency)) letter = c->str("letter").front();
  std::vector<std::string> words;
  std::vector<std::string> carriers;
  for (const auto& w : base_pool) {
    const std::size_t hits = letter ? count_letter(w, *letter) : 0;
    if (hits == 0) words.push_back(w);
    if (hits == 1) carriers.push_back(w);
  }
  if (words.size() < kMinPool) throw ConfigError("too few filler words avoid the counted letter");
  const auto word = [&] { return words[rng.index(words.size())]; };
  const auto phrase = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::string> parts;
    const auto count = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    for (std::size_t i = 0; i < count; ++i) parts.push_back(word());
    return text::join(parts, " ");
  };
  const auto flex = [&] { return Tok{word(), true, false, false}; };

  Draft d;
  d.cased = cased_.at(lang);

  // Layout and paragraph count.
  std::size_t paragraphs = 1;
  const ConstraintInstance* pfw = find(Kind::ParagraphsFirstWord);
  const ConstraintInstance* sections = find(Kind::MultipleSections);
  if (const auto* c = find(Kind::NumberParagraphs)) {
    d.layout = Layout::divider;
    const auto n = c->integer("N");
    paragraphs = static_cast<std::size_t>(follows(c->kind) ? n : (rng.bernoulli(0.5) ? n + 1 : n - 1));
  } else if (pfw) {
    d.layout = Layout::blank_line;
    paragraphs = static_cast<std::size_t>(pfw->integer("N"));
  } else if (sections) {
    d.layout = Layout::sections;
    const auto n = sections->integer("N");
    paragraphs = static_cast<std::size_t>(follows(sections->kind) ? n : (rng.bernoulli(0.5) ? n + 1 : n - 1));
  }
  d.paragraphs.resize(paragraphs);
  for (std::size_t p = 0; p < paragraphs; ++p) {
    d.paragraphs[p].body = {flex(), flex()};
    if (sections) d.paragraphs[p].header = sections->str("splitter") + " " + std::to_string(p + 1);
  }
  if (pfw && follows(pfw->kind)) {
    d.paragraphs[static_cast<std::size_t>(pfw->integer("i") - 1)].body.front() = Tok{pfw->str("first_word")};
  }
  auto& first = d.paragraphs.front();
  auto& last = d.paragraphs.back();

  if (find(Kind::Title)) {
    const std::string t = phrase(2, 4);
    first.title = follows(Kind::Title) ? "<<" + t + ">>" : "<" + t + ">";
    first.title_after_body = pfw && pfw->integer("i") == 1;
  }
  if (const auto* c = find(Kind::ChooseFrom)) {
    const auto& options = c->list("options");
    const std::string& option = options[rng.index(options.size())];
    last.tail.push_back(follows(c->kind) ? option : drop_last_word(option));
  }
  if (const auto* c = find(Kind::NumberBullets)) {
    const auto n = c->integer("N");
    const auto count = follows(c->kind) ? n : (rng.bernoulli(0.5) ? n + 1 : n - 1);
    for (std::int64_t b = 0; b < count; ++b) last.tail.push_back("* " + phrase(2, 4));
  }
  if (const auto* c = find(Kind::Postscript)) {
    const std::string& marker = c->str("marker");
    const std::string used = follows(c->kind) ? marker : (marker == "P.S." ? "P.P.S." : "P.S.");
    last.tail.push_back(used + " " + phrase(3, 6));
  }
  if (const auto* c = find(Kind::EndChecker)) {
    d.end_phrase = follows(c->kind) ? c->str("phrase") : trim_final_punct(c->str("phrase"));
  }

  std::vector<Tok> inserted;
  if (const auto* c = find(Kind::IncludeKeywords)) {
    auto keywords = c->list("keywords");
    if (!follows(c->kind)) keywords.erase(keywords.begin() + static_cast<std::ptrdiff_t>(rng.index(keywords.size())));
    for (auto& k : keywords) inserted.push_back({k});
  }
  if (const auto* c = find(Kind::ExcludeKeywords); c && !follows(c->kind)) {
    const auto& keywords = c->list("keywords");
    inserted.push_back({keywords[rng.index(keywords.size())]});
  }
  if (const auto* c = find(Kind::KeywordFrequency)) {
    const auto n = c->integer("N");
    const auto count = follows(c->kind) ? n : (rng.bernoulli(0.5) ? n + 1 : n - 1);
    for (std::int64_t i = 0; i < count; ++i) inserted.push_back({c->str("keyword")});
  }
  if (const auto* c = find(Kind::LetterFrequency)) {
    const auto n = c->integer("N");
    const auto count = follows(c->kind) ? n : (rng.bernoulli(0.5) ? n + 1 : n - 1);
    for (std::int64_t i = 0; i < count; ++i) {
      inserted.push_back({carriers.empty() ? std::string(1, *letter) : carriers[rng.index(carriers.size())]});
    }
  }
  if (const auto* c = find(Kind::NumberPlaceholders)) {
    const auto n = c->integer("N");
    const auto count = follows(c->kind) ? n + rng.uniform_int(0, 1) : n - 1;
    for (std::int64_t i = 0; i < count; ++i) inserted.push_back({"[" + word() + "]"});
  }
  if (const auto* c = find(Kind::HighlightedSections)) {
    const auto n = c->integer("N");
    const auto count = follows(c->kind) ? n + rng.uniform_int(0, 1) : n - 1;
    for (std::int64_t i = 0; i < count; ++i) inserted.push_back({"*" + word() + "*"});
  }
  const auto insert = [&](Tok t) {
    auto& body = d.paragraphs[rng.index(d.paragraphs.size())].body;
    body.insert(body.begin() + static_cast<std::ptrdiff_t>(1 + rng.index(body.size())), std::move(t));
  };
  for (auto& t : inserted) insert(std::move(t));

  if (find(Kind::JsonFormat)) {
    d.json = true;
    d.json_valid = follows(Kind::JsonFormat);
    d.json_key = word();
  }
  if (find(Kind::Quotation)) {
    d.quote = true;
    d.quote_closed = follows(Kind::Quotation);
  }
  if (find(Kind::AllUppercase) && follows(Kind::AllUppercase)) d.casing = Casing::upper;
  if (find(Kind::AllLowercase) && follows(Kind::AllLowercase)) d.casing = Casing::lower;

  if (const auto* c = find(Kind::CapitalWordFrequency); c && follows(c->kind)) {
    std::vector<std::string> long_words;
    for (const auto& w : words) {
      std::size_t letters = 0;
      text::for_each_code_point(w, [&](char32_t ch, std::size_t) { letters += text::is_letter(ch) ? 1 : 0; });
      if (letters >= 2) long_words.push_back(text::to_upper(w));
    }
    if (long_words.empty()) throw ConfigError("no filler word can be written as a capital word");
    const auto target = c->integer("N") + rng.uniform_int(0, 1);
    const auto have = static_cast<std::int64_t>(count_capital_words(d.render()));
    for (std::int64_t i = have; i < target; ++i) insert(Tok{long_words[rng.index(long_words.size())]});
  }

  // Sentence and word targets. Flex runs carry no terminators, so the
  // draft's sentence count is the floor; each period on an interior flex
  // token adds exactly one sentence.
  std::string draft = d.render();
  const auto s0 = static_cast<std::int64_t>(count_sentences(draft));
  const auto w0 = static_cast<std::int64_t>(count_words(draft));
  std::int64_t sentences = s0 + rng.uniform_int(1, 6);
  if (const auto* c = find(Kind::NumberSentences)) {
    sentences = pick(count_ranges(c->relation(), c->integer("N"), follows(c->kind), s0, 3, tol), rng, "sentence");
  }
  const std::int64_t periods = sentences - s0;
  const auto eligible_count = [&] {
    std::int64_t n = 0;
    for (const auto& p : d.paragraphs) {
      for (std::size_t i = 0; i + 1 < p.body.size(); ++i) n += p.body[i].flex ? 1 : 0;
    }
    return n;
  };
  const std::int64_t min_words = w0 + std::max<std::int64_t>(0, periods - eligible_count()) + 2 * static_cast<std::int64_t>(paragraphs);
  std::int64_t total = min_words + rng.uniform_int(15, 60);
  if (const auto* c = find(Kind::NumberWords)) {
    total = pick(count_ranges(c->relation(), c->integer("N"), follows(c->kind), min_words, 15, tol), rng, "word");
  }
  for (std::int64_t i = w0; i < total; ++i) insert(flex());

  std::vector<Tok*> slots;
  for (auto& p : d.paragraphs) {
    for (std::size_t i = 0; i + 1 < p.body.size(); ++i) {
      if (p.body[i].flex) slots.push_back(&p.body[i]);
    }
  }
  if (static_cast<std::int64_t>(slots.size()) < periods) throw ConfigError("not enough filler to place sentence breaks");
  rng.shuffle(std::span<Tok*>(slots));
  for (std::int64_t i = 0; i < periods; ++i) slots[static_cast<std::size_t>(i)]->period = true;
  if (find(Kind::NoCommas) && !follows(Kind::NoCommas)) {
    std::vector<Tok*> open;
    for (auto& p : d.paragraphs) {
      for (auto& t : p.body) {
        if (t.flex && !t.period) open.push_back(&t);
      }
    }
    if (open.empty()) throw ConfigError("no filler token can carry a comma");
    open[rng.index(open.size())]->comma = true;
  }

  std::string response = d.render();
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    const auto verdict = verifier_->verify(response, constraints[j]);
    if (verdict.satisfied != follow[j]) {
      throw ConfigError(std::string(kind_name(constraints[j].kind)) + " verdict mismatch: " + verdict.detail);
    }
  }
  return response;
}

}  // namespace probe
