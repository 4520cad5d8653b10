#include <gtest/gtest.h>

#include "mvg/caption_parser.hpp"
#include "mvg/error.hpp"

using namespace mvg;

namespace {

std::vector<Triplet> parse(const std::string& text, Keyframe kf = 0) { return parse_caption(text, kf).triplets; }

}  // namespace

TEST(NormalizePhrase, Examples) {
  EXPECT_EQ(normalize_phrase("The  Lime"), "lime");
  EXPECT_EQ(normalize_phrase("a cocktail shaker"), "cocktail shaker");
  EXPECT_EQ(normalize_phrase(""), "");
  EXPECT_EQ(normalize_phrase("  An   Old\tBike  "), "old bike");
}

TEST(NormalizePhrase, Idempotent) {
  for (const char* s : {"The  Lime", "a the an", "  Big RED ball ", "x", "An apple and a pear"}) {
    const auto once = normalize_phrase(s);
    EXPECT_EQ(normalize_phrase(once), once) << s;
  }
}

TEST(ParseCaption, SimpleTransitive) {
  EXPECT_EQ(parse("A man cuts a lime.", 3), (std::vector<Triplet>{{"man", "cuts", "lime", 3}}));
}

TEST(ParseCaption, IntransitiveYieldsNothing) { EXPECT_TRUE(parse("The dog runs.").empty()); }

TEST(ParseCaption, CoordinationWithPrepositionalLongestMatch) {
  // Trace: NP "A man" | verb "holds" | NP "a shaker" -> (man, holds, shaker);
  // "and" + verb group "pours" starts a clause with the same subject;
  // NP "juice" then PREP "into" + NP "a glass": the longest match takes the
  // prepositional object -> (man, pours into, glass).
  EXPECT_EQ(parse("A man holds a shaker and pours juice into a glass."),
            (std::vector<Triplet>{{"man", "holds", "shaker", 0}, {"man", "pours into", "glass", 0}}));
}

TEST(ParseCaption, VerbWithParticleOrPreposition) {
  EXPECT_EQ(parse("The woman looks at the screen."), (std::vector<Triplet>{}));
  EXPECT_EQ(parse("The boy climbs onto the wall."), (std::vector<Triplet>{{"boy", "climbs onto", "wall", 0}}));
}

TEST(ParseCaption, MultipleSentencesAndAdjectives) {
  EXPECT_EQ(parse("A tall man lifts a heavy box! Then the girl kicks the red ball?"),
            (std::vector<Triplet>{{"tall man", "lifts", "heavy box", 0}, {"girl", "kicks", "red ball", 0}}));
}

TEST(ParseCaption, AuxiliariesAndAdverbsAreSkipped) {
  EXPECT_EQ(parse("The chef is slowly stirring the soup."), (std::vector<Triplet>{{"chef", "stirring", "soup", 0}}));
  EXPECT_EQ(parse("The man carefully fills the cup."), (std::vector<Triplet>{{"man", "fills", "cup", 0}}));
}

TEST(ParseCaption, CoordinatedObjects) {
  EXPECT_EQ(parse("The girl holds a cup and a spoon."),
            (std::vector<Triplet>{{"girl", "holds", "cup", 0}, {"girl", "holds", "spoon", 0}}));
}

TEST(ParseCaption, NewSubjectAfterConjunction) {
  EXPECT_EQ(parse("The man opens the door and the dog chases the cat."),
            (std::vector<Triplet>{{"man", "opens", "door", 0}, {"dog", "chases", "cat", 0}}));
}

TEST(ParseCaption, UnparseableInputIsLenient) {
  EXPECT_TRUE(parse("").empty());
  EXPECT_TRUE(parse("...!!!").empty());
  EXPECT_TRUE(parse("Blue sky.").empty());
}

TEST(ParseCaption, Deterministic) {
  const std::string text = "A man holds a shaker and pours juice into a glass. The dog chases the ball.";
  EXPECT_EQ(parse(text), parse(text));
}

TEST(ParseCaption, PhrasesOccurInSource) {
  const std::string text = "The old man slowly pushes the blue cart across the busy street and waves to a friend.";
  const auto norm = normalize_phrase(text);
  for (const auto& t : parse(text)) {
    EXPECT_NE(norm.find(t.subject), std::string::npos) << t.subject;
    EXPECT_NE(norm.find(t.object), std::string::npos) << t.object;
    EXPECT_FALSE(t.predicate.empty());
  }
}

TEST(CaptionFile, ParsesLines) {
  const auto lines = parse_caption_file("4\tA man cuts a lime.\n14\tThe dog chases the ball.\n");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1].keyframe, 14u);
  EXPECT_EQ(parse_captions(lines),
            (std::vector<Triplet>{{"man", "cuts", "lime", 4}, {"dog", "chases", "ball", 14}}));
}

TEST(CaptionFile, BadLineReportsOffset) {
  try {
    parse_caption_file("4\tA man cuts a lime.\nnot a keyframe\n", "caps.txt");
    FAIL() << "expected FormatError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    EXPECT_EQ(e.file(), "caps.txt");
    ASSERT_TRUE(e.offset().has_value());
    EXPECT_EQ(*e.offset(), 21u);
  }
}

TEST(Lexicon, InflectionsAreRecognized) {
  const auto& lex = Lexicon::bundled();
  for (const char* w : {"cut", "cuts", "cutting", "chops", "chopped", "carries", "carried", "washes", "pours"})
    EXPECT_TRUE(lex.is_verb(w)) << w;
  for (const char* w : {"lime", "glass", "table"}) EXPECT_FALSE(lex.is_verb(w)) << w;
}

TEST(Lexicon, CustomLexiconChangesGrammar) {
  const auto lex = Lexicon::from_json(R"({"determiners":["the"],"prepositions":[],"conjunctions":["and"],
    "auxiliaries":[],"adverbs":[],"stop_verbs":[],"verbs":["zap"]})");
  EXPECT_EQ(parse_caption("The robot zaps the drone.", 0, lex).triplets,
            (std::vector<Triplet>{{"robot", "zaps", "drone", 0}}));
  EXPECT_TRUE(parse_caption("A man cuts a lime.", 0, lex).triplets.empty());
}

TEST(Lexicon, MalformedJsonThrows) {
  EXPECT_THROW(Lexicon::from_json("{"), Error);
  EXPECT_THROW(Lexicon::from_json(R"({"determiners":[]})"), Error);
}
