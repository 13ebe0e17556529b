#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "style_audit/textstats.hpp"
#include "test_util.hpp"

using namespace style_audit;

namespace {
Tokens words(std::string_view s) { return tokenize(s); }
}  // namespace

TEST(RougeL, HandValues) {
  EXPECT_NEAR(rouge_l("the cat sat on mat", "the cat on the mat"), 0.8, 1e-12);
  EXPECT_EQ(lcs_length(words("a b c d"), words("b d a")), 2u);
  EXPECT_DOUBLE_EQ(rouge_l("a b c", "a b c"), 1.0);
  EXPECT_EQ(rouge_l("a b c", "x y"), 0.0);
  EXPECT_EQ(rouge_l("", "x y"), 0.0);
}

TEST(Meteor, HandValues) {
  // Four exact matches in one chunk: 1 - 0.5 * (1/4)^3.
  EXPECT_DOUBLE_EQ(meteor("the cat sat down", "the cat sat down"), 0.9921875);
  EXPECT_EQ(stem("cats"), "cat");
  EXPECT_EQ(stem("runs"), "run");
  EXPECT_EQ(stem("ponies"), "pony");
  EXPECT_EQ(stem("jumping"), "jump");
  EXPECT_EQ(stem("glass"), "glass");
  // Stem stage: "cats"/"cat" align after exact matching fails.
  const auto a = meteor_align(words("the cat runs"), words("the cats run"));
  EXPECT_EQ(a.matches, 3u);
  EXPECT_EQ(a.chunks, 1u);
  // Swapped halves: two chunks.
  const auto b = meteor_align(words("a b c d"), words("c d a b"));
  EXPECT_EQ(b.matches, 4u);
  EXPECT_EQ(b.chunks, 2u);
  EXPECT_EQ(meteor("a b", "x y"), 0.0);
}

TEST(Bleu, HandValues) {
  // Three-token hypothesis inside a six-token reference: p1..p3 = 1, p4 = 0.1/3.
  EXPECT_NEAR(bleu("a b c d e f", "a b c"), std::exp(-1.0) * std::pow(0.1 / 3.0, 0.25), 1e-12);
  EXPECT_DOUBLE_EQ(bleu("one two three four", "one two three four"), 1.0);
  EXPECT_DOUBLE_EQ(bleu("the quick brown fox jumps", "the quick brown fox jumps"), 1.0);
  EXPECT_EQ(bleu("alpha beta gamma delta", "one two three four"), 0.0);
  EXPECT_EQ(bleu("", "a"), 0.0);
  EXPECT_EQ(bleu("a", ""), 0.0);
  // Clipping: "the the the" against a single "the".
  const double clipped = bleu("the cat", "the the the");
  EXPECT_NEAR(clipped, std::pow((1.0 / 3.0) * std::pow(0.1 / 3.0, 3), 0.25), 1e-12);
}

TEST(Boundaries, IdenticalAndDisjointProperty) {
  std::mt19937_64 rng(21);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "g"};
  const std::vector<std::string> other = {"x", "y", "z"};
  for (int trial = 0; trial < 500; ++trial) {
    const auto t = oracle::random_tokens(rng, 12, vocab, 4);
    EXPECT_DOUBLE_EQ(bleu(t, t), 1.0);
    EXPECT_DOUBLE_EQ(rouge_l(t, t), 1.0);
    EXPECT_NEAR(meteor(t, t), 1.0 - 0.5 * std::pow(1.0 / t.size(), 3), 1e-12);
    const auto u = oracle::random_tokens(rng, 12, other, 1);
    EXPECT_EQ(bleu(t, u), 0.0);
    EXPECT_EQ(rouge_l(t, u), 0.0);
    EXPECT_EQ(meteor(t, u), 0.0);
  }
}

TEST(RougeL, SymmetricProperty) {
  std::mt19937_64 rng(22);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = oracle::random_tokens(rng, 8, vocab, 1);
    const auto b = oracle::random_tokens(rng, 8, vocab, 1);
    EXPECT_DOUBLE_EQ(rouge_l(a, b), rouge_l(b, a));
  }
}

TEST(Oracles, RandomCasesAgree) {
  std::mt19937_64 rng(23);
  const std::vector<std::string> vocab = {"cat", "cats", "run", "runs", "the", "a", "dog"};
  for (int trial = 0; trial < 3000; ++trial) {
    const auto r = oracle::random_tokens(rng, 8, vocab);
    const auto h = oracle::random_tokens(rng, 8, vocab);
    ASSERT_EQ(lcs_length(r, h), oracle::lcs_bruteforce(r, h));
    ASSERT_NEAR(rouge_l(r, h), oracle::rouge_l(r, h), 1e-12);
    ASSERT_NEAR(bleu(r, h), oracle::bleu(r, h), 1e-12);
    ASSERT_NEAR(meteor(r, h), oracle::meteor(r, h), 1e-12);
    for (double x : {bleu(r, h), rouge_l(r, h), meteor(r, h)}) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(StyleStats, DegenerateCorpusIsAllOnes) {
  const auto groups = load_groups(test_util::data_path("groups_echo.jsonl"));
  const auto rows = style_stats(groups, Side::document, 2);
  ASSERT_EQ(rows.size(), kNumStyles);
  for (const auto& row : rows) {
    EXPECT_DOUBLE_EQ(row.mean_bleu, 1.0) << to_string(row.style);
    EXPECT_DOUBLE_EQ(row.mean_rouge_l, 1.0);
    EXPECT_DOUBLE_EQ(row.mean_token_length, rows[0].mean_token_length);
    EXPECT_EQ(row.n, groups.size());
  }
}

TEST(StyleStats, SingleGroupEqualsDirectMetrics) {
  const auto g = test_util::make_group("g", "query words here", "doc text for the test");
  const auto rows = style_stats({g}, Side::document);
  for (auto s : kGeneratedStyles) {
    const auto& row = rows[index_of(s)];
    EXPECT_DOUBLE_EQ(row.mean_bleu, bleu(g.document.at(StyleId::Original), g.document.at(s)));
    EXPECT_DOUBLE_EQ(row.mean_meteor, meteor(g.document.at(StyleId::Original), g.document.at(s)));
    EXPECT_DOUBLE_EQ(row.mean_rouge_l, rouge_l(g.document.at(StyleId::Original), g.document.at(s)));
    EXPECT_DOUBLE_EQ(row.mean_token_length, 6.0);
  }
  EXPECT_EQ(rows[0].mean_bleu, 1.0);
}

TEST(StyleStats, TwoGroupHandAverage) {
  AuditGroup a = test_util::make_group("a", "q", "one two three four");
  AuditGroup b = test_util::make_group("b", "q", "five six");
  a.document.set(StyleId::Original, "one two three four");
  a.document.set(StyleId::Style2, "one two three four");  // rouge 1
  b.document.set(StyleId::Original, "five six");
  b.document.set(StyleId::Style2, "seven");  // rouge 0
  const auto rows = style_stats({a, b}, Side::document);
  const auto& r = rows[index_of(StyleId::Style2)];
  EXPECT_DOUBLE_EQ(r.mean_rouge_l, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_token_length, 2.5);
  EXPECT_DOUBLE_EQ(r.mean_bleu, 0.5);
  EXPECT_DOUBLE_EQ(rows[0].mean_token_length, 3.0);
}

TEST(StyleStats, Errors) {
  EXPECT_THROW(style_stats({}, Side::document), CorpusError);
  const auto groups = load_groups(test_util::data_path("groups_query_incomplete.jsonl"));
  EXPECT_NO_THROW(style_stats(groups, Side::document));
  try {
    style_stats(groups, Side::query);
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("q1"), std::string::npos);
  }
}
