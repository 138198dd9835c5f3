#include <gtest/gtest.h>

#include <tuple>

#include "probe/error.hpp"
#include "probe/rng.hpp"
#include "probe/text.hpp"
#include "probe/verifier.hpp"
#include "support.hpp"

namespace probe {
namespace {

using testing::make;
using testing::num;

bool ok(std::string_view response, const ConstraintInstance& c) { return verify(response, c).satisfied; }

TEST(Verify, SpecExamples) {
  EXPECT_TRUE(ok("Hello world", make(Kind::NoCommas)));
  EXPECT_TRUE(ok("<<option of joy>>\nA story...", make(Kind::Title)));
  EXPECT_TRUE(ok("P1\n\n***\n\nP2\n\n***\n\nP3", make(Kind::NumberParagraphs, {{"N", num(3)}})));
  EXPECT_FALSE(
      ok("banana banana", make(Kind::KeywordFrequency, {{"keyword", std::string("banana")}, {"N", num(3)}})));
}

TEST(CountWords, Examples) {
  EXPECT_EQ(count_words("one two three"), 3u);
  EXPECT_EQ(count_words(""), 0u);
  EXPECT_EQ(count_words("state-of-the-art model"), 2u);
  EXPECT_EQ(count_words("# Heading\n> quote * item"), 3u);
  EXPECT_EQ(count_words("*** ### >"), 0u);
}

TEST(CountWords, ConcatenationAddsUp) {
  Rng rng(9);
  const std::vector<std::string> pool{"alpha", "beta,", "x", "long-word", "end.", "Ünïcode", "中文", "42"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string a;
    std::string b;
    const auto na = rng.uniform_int(0, 6);
    const auto nb = rng.uniform_int(0, 6);
    for (int i = 0; i < na; ++i) a += pool[rng.index(pool.size())] + (rng.bernoulli(0.3) ? "\n" : " ");
    for (int i = 0; i < nb; ++i) b += pool[rng.index(pool.size())] + (rng.bernoulli(0.3) ? "\t" : " ");
    ASSERT_EQ(count_words(a + " " + b), count_words(a) + count_words(b)) << a << "|" << b;
  }
}

TEST(CountSentences, Examples) {
  EXPECT_EQ(count_sentences("A. B! C?"), 3u);
  EXPECT_EQ(count_sentences(""), 0u);
  EXPECT_EQ(count_sentences("See Dr. Smith today."), 1u);
}

// Hand-labeled sentence counts around the abbreviation guard.
TEST(CountSentences, AbbreviationFixture) {
  const std::vector<std::pair<std::string, std::size_t>> cases{
      {"See Dr. Smith today.", 1},
      {"Mr. and Mrs. Brown arrived. They sat down.", 2},
      {"Ms. Lee spoke first.", 1},
      {"Prof. Adams teaches math. Students like him.", 2},
      {"We met at 5 p.m. and left.", 1},
      {"The meeting is at 9 a.m. sharp.", 1},
      {"Bring fruit, e.g. apples or pears.", 1},
      {"Use a tool, i.e. a hammer.", 1},
      {"Apples, pears, etc. are fruit. I like them.", 2},
      {"He lives on Main St. near the park.", 1},
      {"Martin Luther King Jr. was a leader.", 1},
      {"John Smith Sr. retired. His son took over.", 2},
      {"It was the Lakers vs. the Celtics.", 1},
      {"P.S. Call me later.", 1},
      {"P.P.S. One more thing.", 1},
      {"The U.S. economy grew.", 1},
      {"Hello there. How are you? I am fine!", 3},
      {"Stop! Go! Now!", 3},
      {"Really?! Yes.", 2},
      {"He said \"Stop.\" Then he left.", 2},
      {"(This is quoted.) Next sentence here.", 2},
      {"Version 2.0 is out.", 1},
      {"Pi is 3.14 approximately.", 1},
      {"Visit example.com today.", 1},
      {"Dr. Jones and Dr. Patel met. They talked.", 2},
      {"Call Dr. Who.", 1},
      {"I asked Dr. Lee. She agreed.", 2},
      {"No abbreviation here. None at all.", 2},
      {"", 0},
      {"   ", 0},
      {"No terminal punctuation", 1},
      {"One. Two. Three. Four.", 4},
      {"Mrs. Dalloway bought flowers herself.", 1},
      {"The Sr. engineer approved. The Jr. engineer tested.", 2},
      {"Items include pens, paper, etc. and more.", 1},
      {"E.g. this starts with an example.", 1},
      {"I.e. this restates it.", 1},
      {"St. Louis is a city. It is in Missouri.", 2},
      {"Vs. is short for versus.", 1},
      {"Hi! I'm Prof. X. Nice to meet you.", 3},
      {"What? Why? How?", 3},
      {"Ends with closer.)", 1},
      {"Line one.\nLine two.", 2},
      {"This is fine.   Extra spaces follow.", 2},
      {"Dr. Mr. Mrs. Ms.", 1},
      {"Go to the U.S. embassy tomorrow.", 1},
      {"The end.", 1},
      {"他来了。我们走吧！", 2},
      {"Is it done? Yes. It is done.", 3},
      {"\"Hello.\" \"Goodbye.\"", 2},
  };
  ASSERT_EQ(cases.size(), 50u);
  for (const auto& [input, expected] : cases) EXPECT_EQ(count_sentences(input), expected) << input;
}

TEST(SplitParagraphs, Examples) {
  EXPECT_EQ(split_paragraphs("a\n\nb", ParagraphMode::blank_line), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(split_paragraphs("a\n***\nb", ParagraphMode::divider), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(split_paragraphs("a", ParagraphMode::divider), (std::vector<std::string>{"a"}));
  EXPECT_EQ(split_paragraphs("a", ParagraphMode::blank_line), (std::vector<std::string>{"a"}));
  EXPECT_EQ(split_paragraphs("a\n\n\n\nb\n  \nc", ParagraphMode::blank_line).size(), 3u);
  EXPECT_EQ(split_paragraphs("***\na\n***\n***\nb\n***", ParagraphMode::divider).size(), 2u);
}

TEST(Meets, AroundIsTenPercentInclusive) {
  EXPECT_TRUE(meets(90, Relation::around, 100, 0.10));
  EXPECT_TRUE(meets(110, Relation::around, 100, 0.10));
  EXPECT_FALSE(meets(89, Relation::around, 100, 0.10));
  EXPECT_FALSE(meets(111, Relation::around, 100, 0.10));
  EXPECT_TRUE(meets(5, Relation::at_least, 5, 0.10));
  EXPECT_FALSE(meets(4, Relation::at_least, 5, 0.10));
  EXPECT_TRUE(meets(5, Relation::at_most, 5, 0.10));
  EXPECT_FALSE(meets(6, Relation::at_most, 5, 0.10));
}

TEST(VerifyKinds, Keywords) {
  const auto inc = make(Kind::IncludeKeywords, {{"keywords", std::vector<std::string>{"river", "stone"}}});
  EXPECT_TRUE(ok("The River carried a stone.", inc));
  EXPECT_FALSE(ok("The river was calm.", inc));
  EXPECT_FALSE(ok("The rivers and stones.", inc));
  const auto exc = make(Kind::ExcludeKeywords, {{"keywords", std::vector<std::string>{"cloud"}}});
  EXPECT_TRUE(ok("Clear skies and cloudless nights.", exc));
  EXPECT_FALSE(ok("A CLOUD passed.", exc));
  const auto freq = make(Kind::KeywordFrequency, {{"keyword", std::string("tree")}, {"N", num(2)}});
  EXPECT_TRUE(ok("A tree. Another Tree!", freq));
  EXPECT_FALSE(ok("tree tree tree", freq));
  const auto letter = make(Kind::LetterFrequency, {{"letter", std::string("z")}, {"N", num(3)}});
  EXPECT_FALSE(ok("Zoo zebra buzz", letter));
  EXPECT_FALSE(ok("Zoo zebra", letter));
  EXPECT_TRUE(ok("Zoo zebra fuzy", letter));
}

TEST(VerifyKinds, Language) {
  const auto en = make(Kind::ResponseLanguage, {{"language", std::string("en")}});
  const auto de = make(Kind::ResponseLanguage, {{"language", std::string("de")}});
  const std::string english = "The committee reviewed the proposal and decided to approve the new budget.";
  EXPECT_TRUE(ok(english, en));
  EXPECT_FALSE(ok(english, de));
  EXPECT_TRUE(ok("Der Ausschuss hat den Vorschlag geprüft und beschlossen, das neue Budget zu genehmigen.", de));
}

TEST(VerifyKinds, Length) {
  const auto words = make(Kind::NumberWords, {{"N", num(100)}, {"relation", std::string("around")}});
  std::string text;
  for (int i = 0; i < 95; ++i) text += "word ";
  EXPECT_TRUE(ok(text, words));
  for (int i = 0; i < 20; ++i) text += "word ";
  EXPECT_FALSE(ok(text, words));
  const auto sentences = make(Kind::NumberSentences, {{"N", num(3)}, {"relation", std::string("at_most")}});
  EXPECT_TRUE(ok("One. Two. Three.", sentences));
  EXPECT_FALSE(ok("One. Two. Three. Four.", sentences));
  const auto paragraphs = make(Kind::NumberParagraphs, {{"N", num(2)}});
  EXPECT_TRUE(ok("first\n***\nsecond", paragraphs));
  EXPECT_FALSE(ok("first\n\nsecond", paragraphs));
  const auto first = make(Kind::ParagraphsFirstWord,
                          {{"N", num(2)}, {"i", num(2)}, {"first_word", std::string("garden")}});
  EXPECT_TRUE(ok("Intro text here.\n\n**Garden** paths wind.", first));
  EXPECT_FALSE(ok("Intro text here.\n\nPaths wind through the garden.", first));
  EXPECT_FALSE(ok("Garden.\n\nGarden.\n\nGarden.", first));
}

TEST(VerifyKinds, Content) {
  const auto ps = make(Kind::Postscript, {{"marker", std::string("P.S.")}});
  EXPECT_TRUE(ok("Body text.\n\nP.S. See you soon.", ps));
  EXPECT_TRUE(ok("Body text.\n\n**P.S.** See you soon.", ps));
  EXPECT_FALSE(ok("P.S. early note\n\nBody text at the end.", ps));
  EXPECT_FALSE(ok("Body text.\n\nP.S.", ps));
  const auto pps = make(Kind::Postscript, {{"marker", std::string("P.P.S.")}});
  EXPECT_FALSE(ok("Body.\n\nP.S. note", pps));
  const auto holes = make(Kind::NumberPlaceholders, {{"N", num(2)}});
  EXPECT_TRUE(ok("Send it to [address] by [date].", holes));
  EXPECT_FALSE(ok("Send it to [address] by [da\nte].", holes));
  EXPECT_EQ(count_placeholders("Nested [a [b] c] only."), 1u);
}

TEST(VerifyKinds, Format) {
  const auto bullets = make(Kind::NumberBullets, {{"N", num(2)}});
  EXPECT_TRUE(ok("Intro\n* one\n  * two", bullets));
  EXPECT_FALSE(ok("* one\n* two\n* three", bullets));
  EXPECT_FALSE(ok("*one\n- two", bullets));
  EXPECT_TRUE(ok("title <<a>> here", make(Kind::Title)));
  EXPECT_FALSE(ok("<<>> empty", make(Kind::Title)));
  EXPECT_FALSE(ok("<<split\ntitle>>", make(Kind::Title)));
  EXPECT_TRUE(ok("<<Joy>>", make(Kind::Title)));
  const auto choose = make(Kind::ChooseFrom, {{"options", std::vector<std::string>{"My answer is yes.", "My answer is no."}}});
  EXPECT_TRUE(ok("Well, MY ANSWER IS NO.", choose));
  EXPECT_FALSE(ok("My answer is", choose));
  const auto highlights = make(Kind::HighlightedSections, {{"N", num(2)}});
  EXPECT_TRUE(ok("*one* and *two parts*", highlights));
  EXPECT_FALSE(ok("* not * and *one*", highlights));
  const auto sections = make(Kind::MultipleSections, {{"N", num(2)}, {"splitter", std::string("Section")}});
  EXPECT_TRUE(ok("SECTION 1\nfoo\n## Section 2\nbar", sections));
  EXPECT_FALSE(ok("Section 1\nfoo\nSection 2\nbar\nSection 3", sections));
  EXPECT_FALSE(ok("Section one\nSection two", sections));
  const auto json = make(Kind::JsonFormat);
  EXPECT_TRUE(ok("```json\n{\"a\": [1, 2]}\n```", json));
  EXPECT_TRUE(ok("  [1, \"x\"]  ", json));
  EXPECT_FALSE(ok("{\"a\": 1", json));
  EXPECT_FALSE(ok("Here: {\"a\": 1}", json));
}

TEST(VerifyKinds, ChangeCase) {
  EXPECT_TRUE(ok("HELLO WORLD 42", make(Kind::AllUppercase)));
  EXPECT_FALSE(ok("HELLO World", make(Kind::AllUppercase)));
  EXPECT_FALSE(ok("12345", make(Kind::AllUppercase)));
  EXPECT_TRUE(ok("hello world", make(Kind::AllLowercase)));
  EXPECT_FALSE(ok("hello World", make(Kind::AllLowercase)));
  const auto caps = make(Kind::CapitalWordFrequency, {{"N", num(2)}});
  EXPECT_TRUE(ok("The NASA and ESA teams.", caps));
  EXPECT_FALSE(ok("I saw A NASA rocket.", caps));
}

TEST(VerifyKinds, StartEnd) {
  const auto end = make(Kind::EndChecker, {{"phrase", std::string("That is all.")}});
  EXPECT_TRUE(ok("Some text. That is all.  \n", end));
  EXPECT_TRUE(ok("Some text. that is all.", end));
  EXPECT_FALSE(ok("Some text. That is all", end));
  EXPECT_TRUE(ok("  \"wrapped text\"\n", make(Kind::Quotation)));
  EXPECT_FALSE(ok("\"open only", make(Kind::Quotation)));
  EXPECT_FALSE(ok("\"", make(Kind::Quotation)));
}

TEST(VerifyKinds, Punctuation) {
  EXPECT_TRUE(ok("No commas here.", make(Kind::NoCommas)));
  EXPECT_FALSE(ok("One, two.", make(Kind::NoCommas)));
  EXPECT_FALSE(ok("全角，逗号", make(Kind::NoCommas)));
}

TEST(Verify, NormalizesToNfcFirst) {
  const auto inc = make(Kind::IncludeKeywords, {{"keywords", std::vector<std::string>{"café"}}});
  EXPECT_TRUE(ok("un cafe\xCC\x81 noir", inc));
}

TEST(Verify, UnknownKindIsDispatchError) {
  ConstraintInstance c;
  c.kind = static_cast<Kind>(200);
  EXPECT_THROW(verify("x", c), DispatchError);
}

TEST(Verify, TolerancesAreConfigurable) {
  const Verifier strict(LanguageIdentifier::shared(), VerifierOptions{0.0});
  const auto words = make(Kind::NumberWords, {{"N", num(100)}, {"relation", std::string("around")}});
  std::string text;
  for (int i = 0; i < 99; ++i) text += "w ";
  EXPECT_FALSE(strict.verify(text, words).satisfied);
  EXPECT_TRUE(verify(text, words).satisfied);
}

// Random responses from fragments that stress the checkers.
std::string random_response(Rng& rng) {
  static const std::vector<std::string> fragments{
      "hello", "World", "NASA", "ESA", "the river", "***", "* item", "- item", "<<Title>>", "<title>",
      "{\"a\": 1}", "[\"x\", 2]", "\"quoted\"", "\"", "P.S. note", "\"P.S. note\"", "Section 1", "SECTION 2",
      "That is all.", "Any other questions?", "Is there anything else I can help with?",
      "Let me know if you have additional questions.", "```", "```json", "{", "}", "[", "]", ",", "，",
      "*bold*", "[name]", "Garden", "ÉTÉ", "été", "Привет", "中文", "42", "e.g.", "Dr.", ".", "?", "!"};
  static const std::vector<std::string> joins{" ", "\n", "\n\n", "", "\n***\n"};
  std::string out;
  const auto parts = rng.uniform_int(1, 12);
  for (int i = 0; i < parts; ++i) {
    if (i) out += joins[rng.index(joins.size())];
    out += fragments[rng.index(fragments.size())];
  }
  const auto roll = rng.uniform_int(0, 9);
  if (roll == 0) out = text::to_upper(out);
  if (roll == 1) out = text::to_lower(out);
  if (roll == 2) {
    nlohmann::json doc = nlohmann::json::array();
    doc.push_back(out);
    doc.push_back(fragments[rng.index(fragments.size())]);
    out = doc.dump(static_cast<int>(rng.uniform_int(-1, 2)));
  }
  if (roll == 3) out = "\"" + out + "\"";
  return out;
}

TEST(VerifyProperties, CheckerConflictCoherence) {
  const auto& taxonomy = Taxonomy::shared();
  for (const auto& rule : ConflictMatrix::shared().rules()) {
    if (!rule.satisfiability_based() || rule.a == rule.b) continue;
    Rng rng(stable_hash(std::string(kind_name(rule.a)) + "+" + std::string(kind_name(rule.b))));
    for (int i = 0; i < 10000; ++i) {
      const auto a = taxonomy.instantiate(rule.a, rng);
      const auto b = taxonomy.instantiate(rule.b, rng);
      const std::string r = random_response(rng);
      ASSERT_FALSE(ok(r, a) && ok(r, b)) << kind_name(rule.a) << " + " << kind_name(rule.b) << " both hold for:\n"
                                          << r;
    }
  }
}

TEST(VerifyProperties, PurityLocalityMonotonicity) {
  Rng rng(1234);
  const auto& taxonomy = Taxonomy::shared();
  for (int i = 0; i < 2000; ++i) {
    const std::string r = random_response(rng);
    const std::string s = random_response(rng);
    for (Kind k : all_kinds()) {
      const auto c = taxonomy.instantiate(k, rng);
      ASSERT_EQ(ok(r, c), ok(r, c));
    }
    if (ok(r, make(Kind::NoCommas)) && ok(s, make(Kind::NoCommas))) ASSERT_TRUE(ok(r + s, make(Kind::NoCommas)));
    const auto inc = taxonomy.instantiate(Kind::IncludeKeywords, rng);
    if (ok(r, inc)) ASSERT_TRUE(ok(r + " " + s, inc));
    const auto exc = taxonomy.instantiate(Kind::ExcludeKeywords, rng);
    if (!ok(r, exc)) ASSERT_FALSE(ok(r + " " + s, exc));
  }
}

}  // namespace
}  // namespace probe
