#include <gtest/gtest.h>

#include <cmath>

#include "sbash/embedding.hpp"
#include "sbash/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace sbash {
namespace {

using testing::Gen;
using testing::oracle_distance;

double dot(const Vector& a, const Vector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

TEST(Levenshtein, KnownPairs) {
  EXPECT_EQ(levenshtein_distance("", "abc"), 3u);
  EXPECT_EQ(levenshtein_distance("abc", "abc"), 0u);
  EXPECT_EQ(oracle_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein_distance("flaw", "lawn"), oracle_distance("flaw", "lawn"));
}

TEST(Levenshtein, MatchesOracleOnRandomPairs) {
  Gen g(20261016);
  for (int i = 0; i < 1000; ++i) {
    const auto a = g.string_from("abcd", 40);
    const auto b = g.string_from("abcd", 40);
    ASSERT_EQ(levenshtein_distance(a, b), oracle_distance(a, b)) << a << " / " << b;
  }
}

TEST(Levenshtein, MetricAxioms) {
  Gen g(7);
  for (int i = 0; i < 300; ++i) {
    const auto a = g.string_from("xyz ", 20), b = g.string_from("xyz ", 20),
               c = g.string_from("xyz ", 20);
    const auto ab = levenshtein_distance(a, b);
    ASSERT_EQ(ab, levenshtein_distance(b, a));
    ASSERT_LE(levenshtein_distance(a, c), ab + levenshtein_distance(b, c));
    ASSERT_EQ(levenshtein_distance(a, a), 0u);
  }
}

TEST(Levenshtein, Similarity) {
  EXPECT_DOUBLE_EQ(levenshtein_similarity("abc", "abc"), 100.0);
  EXPECT_DOUBLE_EQ(levenshtein_similarity("", "abc"), 0.0);
  EXPECT_DOUBLE_EQ(levenshtein_similarity("", ""), 100.0);
  EXPECT_NEAR(levenshtein_similarity("kitten", "sitting"), 100.0 * (1.0 - 3.0 / 7.0), 1e-9);
  EXPECT_NEAR(levenshtein_similarity("kitten", "sitting"), 57.14, 0.01);
}

// Noise drawn from characters absent from the reference can only be
// substituted or deleted, so it never lowers the edit distance.
TEST(Levenshtein, NoiseNeverLowersDistance) {
  Gen g(99);
  for (int i = 0; i < 1000; ++i) {
    const auto ref = g.string_from("ab c\n", 30);
    const auto cand = g.string_from("ab c\n", 30);
    const auto noisy = cand + g.string_from("#%&", 10);
    ASSERT_GE(levenshtein_distance(noisy, ref), levenshtein_distance(cand, ref))
        << cand << " / " << ref;
  }
}

// The max-length normalization does not share that property: the longer
// denominator can outweigh the extra edits.
TEST(Levenshtein, NormalizedSimilarityCanRiseWithNoise) {
  // "ab" -> "ba" needs two edits; "ab#" -> "ba" also needs two, over length 3.
  EXPECT_EQ(levenshtein_distance("ab", "ba"), 2u);
  EXPECT_EQ(levenshtein_distance("ab#", "ba"), 2u);
  EXPECT_DOUBLE_EQ(levenshtein_similarity("ab", "ba"), 0.0);
  EXPECT_NEAR(levenshtein_similarity("ab#", "ba"), 100.0 / 3.0, 1e-9);
}

TEST(SentenceCosine, IdentityAndEmptyRule) {
  MockEmbedding m;
  EXPECT_NEAR(sentence_cosine_similarity("ls -la output", "ls -la output", m), 100.0, 1e-6);
  EXPECT_DOUBLE_EQ(sentence_cosine_similarity("ls -la output", "", m), 0.0);
  EXPECT_DOUBLE_EQ(sentence_cosine_similarity("", "x", m), 0.0);
  EXPECT_DOUBLE_EQ(sentence_cosine_similarity("", "", m), 100.0);
}

TEST(SentenceCosine, EqualsDirectDotProduct) {
  MockEmbedding m;
  const std::string a = "total 8\ndrwx------ 2 root root 4096 .\n", b = "drwxr-xr-x 2 root root";
  const Vector va = m.embed_one(a), vb = m.embed_one(b);
  const double expected = 100.0 * std::max(0.0, dot(va, vb) / (norm(va) * norm(vb)));
  EXPECT_NEAR(sentence_cosine_similarity(a, b, m), expected, 1e-9);
}

TEST(TokenF1, BruteForceOverTokenPairs) {
  MockEmbedding m;
  const Vector a = m.embed_one("a"), b = m.embed_one("b");
  auto sim = [](const Vector& x, const Vector& y) {
    return std::clamp(dot(x, y) / (norm(x) * norm(y)), 0.0, 1.0);
  };
  const double p = 100.0 * (sim(a, a) + sim(b, a)) / 2.0;
  const double r = 100.0 * sim(a, a);
  const auto s = token_f1("a b", "a", m);
  EXPECT_NEAR(s.precision, p, 1e-9);
  EXPECT_NEAR(s.recall, r, 1e-9);
  EXPECT_NEAR(s.recall, 100.0, 1e-9);
  EXPECT_NEAR(s.f1, 2 * p * r / (p + r), 1e-9);
}

TEST(TokenF1, DegenerateRules) {
  MockEmbedding m;
  const auto same = token_f1("uid=0(root) gid=0(root)", "uid=0(root) gid=0(root)", m);
  EXPECT_NEAR(same.precision, 100.0, 1e-9);
  EXPECT_NEAR(same.recall, 100.0, 1e-9);
  EXPECT_NEAR(same.f1, 100.0, 1e-9);
  EXPECT_DOUBLE_EQ(token_f1("", "", m).f1, 100.0);
  EXPECT_DOUBLE_EQ(token_f1("x", "", m).f1, 0.0);
  EXPECT_DOUBLE_EQ(token_f1("", "x", m).f1, 0.0);
}

TEST(Metrics, ScoresStayPercentages) {
  MockEmbedding m;
  Gen g(4242);
  for (int i = 0; i < 200; ++i) {
    const auto a = g.string_from("abc xyz\n-", 60), b = g.string_from("abc xyz\n-", 60);
    for (double v : {levenshtein_similarity(a, b), sentence_cosine_similarity(a, b, m),
                     token_f1(a, b, m).f1, token_f1(a, b, m).precision}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 100.0 + 1e-9);
    }
  }
}

}  // namespace
}  // namespace sbash
