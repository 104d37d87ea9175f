// Copyright 2026 The ZeroER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "zeroer/similarity.hpp"

namespace zeroer::similarity {
namespace {

// Plain string q-grams, for an oracle that never hashes.
std::set<std::string> grams(const std::string& s, std::size_t q = 3) {
  const std::string padded = std::string(q - 1, '#') + s + std::string(q - 1, '$');
  std::set<std::string> out;
  for (std::size_t i = 0; i + q <= padded.size(); ++i) out.insert(padded.substr(i, q));
  return out;
}

double set_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::vector<std::string> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  return double(inter.size()) / double(a.size() + b.size() - inter.size());
}

TEST(Similarity, IdenticalStrings) {
  const std::string s = "grill on the alley";
  EXPECT_EQ(exact_match(s, s), 1.0);
  EXPECT_EQ(jaccard(qgram_set(s), qgram_set(s)), 1.0);
  EXPECT_EQ(cosine(qgram_set(s), qgram_set(s)), 1.0);
  EXPECT_EQ(levenshtein_similarity(s, s), 1.0);
  EXPECT_EQ(jaro_winkler(s, s), 1.0);
  EXPECT_EQ(containment(word_set(s), word_set(s)), 1.0);
}

TEST(Similarity, LevenshteinHandValues) {
  EXPECT_EQ(levenshtein_distance("abc", "abd"), 1u);
  EXPECT_NEAR(levenshtein_similarity("abc", "abd"), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(levenshtein_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein_distance("", "abc"), 3u);
  EXPECT_EQ(levenshtein_similarity("", ""), 1.0);
}

TEST(Similarity, JaroWinklerReferenceValues) {
  EXPECT_NEAR(jaro("martha", "marhta"), 0.944444, 1e-6);
  EXPECT_NEAR(jaro_winkler("martha", "marhta"), 0.961111, 1e-6);
  EXPECT_NEAR(jaro("dwayne", "duane"), 0.822222, 1e-6);
  EXPECT_NEAR(jaro_winkler("dwayne", "duane"), 0.84, 1e-6);
  EXPECT_NEAR(jaro("dixon", "dicksonx"), 0.766667, 1e-6);
  EXPECT_NEAR(jaro_winkler("dixon", "dicksonx"), 0.813333, 1e-6);
  EXPECT_EQ(jaro("abc", "xyz"), 0.0);
}

TEST(Similarity, QgramJaccardMatchesStringSetOracle) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"abc", "abd"}, {"arnie mortons", "arnie morton's"}, {"la", "los angeles"}, {"x", "y"}};
  for (const auto& [a, b] : cases) {
    EXPECT_NEAR(jaccard(qgram_set(a), qgram_set(b)), set_jaccard(grams(a), grams(b)), 1e-15)
        << a << " / " << b;
  }
}

TEST(Similarity, SetMeasuresByHand) {
  const TokenSet a = word_set("a b c d");
  const TokenSet b = word_set("c d e");
  EXPECT_NEAR(jaccard(a, b), 2.0 / 5.0, 1e-15);
  EXPECT_NEAR(cosine(a, b), 2.0 / std::sqrt(12.0), 1e-15);
  EXPECT_NEAR(containment(a, b), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(word_set("x  x   x").size(), 1u);
}

TEST(Similarity, Numeric) {
  EXPECT_EQ(absolute_difference_similarity(3, 3), 1.0);
  EXPECT_NEAR(absolute_difference_similarity(1, 3), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(relative_difference_similarity(8, 10), 0.8, 1e-15);
  EXPECT_EQ(relative_difference_similarity(0, 0), 1.0);
  EXPECT_EQ(relative_difference_similarity(-5, 5), 0.0);
  EXPECT_EQ(parse_number("12abc"), std::nullopt);
  EXPECT_EQ(parse_number("1.5e1"), std::optional<double>(15.0));
  EXPECT_EQ(parse_number("inf"), std::nullopt);
}

TEST(Similarity, SymmetricAndBoundedOnRandomStrings) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 12), ch(0, 5);
  auto draw = [&] {
    std::string s;
    for (int i = len(rng); i > 0; --i) s.push_back(ch(rng) == 5 ? ' ' : char('a' + ch(rng)));
    return s;
  };
  for (int t = 0; t < 500; ++t) {
    const std::string a = draw(), b = draw();
    const double vals[][2] = {
        {jaccard(qgram_set(a), qgram_set(b)), jaccard(qgram_set(b), qgram_set(a))},
        {cosine(qgram_set(a), qgram_set(b)), cosine(qgram_set(b), qgram_set(a))},
        {jaccard(word_set(a), word_set(b)), jaccard(word_set(b), word_set(a))},
        {cosine(word_set(a), word_set(b)), cosine(word_set(b), word_set(a))},
        {containment(word_set(a), word_set(b)), containment(word_set(b), word_set(a))},
        {levenshtein_similarity(a, b), levenshtein_similarity(b, a)},
        {jaro_winkler(a, b), jaro_winkler(b, a)},
        {exact_match(a, b), exact_match(b, a)},
    };
    for (const auto& v : vals) {
      EXPECT_NEAR(v[0], v[1], 1e-12) << '"' << a << "\" \"" << b << '"';
      EXPECT_GE(v[0], 0.0);
      EXPECT_LE(v[0], 1.0);
    }
  }
}

}  // namespace
}  // namespace zeroer::similarity
