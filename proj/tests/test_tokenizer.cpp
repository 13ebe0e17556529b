#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "style_audit/textstats.hpp"
#include "style_audit/tokenizer.hpp"

using namespace style_audit;
using V = std::vector<std::string>;

TEST(Tokenizer, SplitsLowercasesAndStripsEdgePunctuation) {
  EXPECT_EQ(tokenize("The cat, sat."), (V{"the", "cat", "sat"}));
  EXPECT_EQ(tokenize("  \"Hello\"  (world)! "), (V{"hello", "world"}));
  EXPECT_EQ(tokenize("don't e-mail U.S.A."), (V{"don't", "e-mail", "u.s.a"}));
}

TEST(Tokenizer, EmptyAndPunctuationOnly) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   \t\n").empty());
  EXPECT_TRUE(tokenize("... -- !!").empty());
}

TEST(Tokenizer, EmojiAreStandaloneTokens) {
  EXPECT_EQ(tokenize("Hi! 👍 ok"), (V{"hi", "👍", "ok"}));
  EXPECT_EQ(tokenize("great👍job"), (V{"great", "👍", "job"}));
  EXPECT_EQ(tokenize("lol😂😂"), (V{"lol", "😂", "😂"}));
}

TEST(Tokenizer, EmojiClustersStayTogether) {
  // thumbs up + skin tone, heart + variation selector, ZWJ family
  EXPECT_EQ(tokenize("👍🏽"), (V{"👍🏽"}));
  EXPECT_EQ(tokenize("❤️!"), (V{"❤️"}));
  EXPECT_EQ(tokenize("👩‍💻 coding"), (V{"👩‍💻", "coding"}));
  EXPECT_EQ(tokenize("🇫🇷🇩🇪"), (V{"🇫🇷", "🇩🇪"}));
}

TEST(Tokenizer, UnicodeWhitespaceAndPunctuation) {
  EXPECT_EQ(tokenize("a b c　d"), (V{"a", "b", "c", "d"}));
  EXPECT_EQ(tokenize("\u201cQuoted\u201d \u2014 text\u2026"), (V{"quoted", "text"}));
  EXPECT_EQ(tokenize("ÉCOLE cafÉ"), (V{"école", "café"}));
}

TEST(Tokenizer, MalformedUtf8BecomesReplacementCharacter) {
  const std::string bad = std::string("ab") + static_cast<char>(0xFF) + "cd";
  const auto t = tokenize(bad);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].size(), 5u + 2u);  // 0xFF decodes to U+FFFD (3 bytes)
}

TEST(TokenLength, Examples) {
  EXPECT_EQ(token_length("the cat sat"), 3u);
  EXPECT_EQ(token_length(""), 0u);
  EXPECT_EQ(token_length("Hi! 👍 ok"), 3u);
}
