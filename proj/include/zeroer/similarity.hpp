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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Symmetric similarity functions. All return values in [0, 1].
namespace zeroer::similarity {

using TokenSet = std::vector<std::uint64_t>;  // sorted, unique token hashes

std::uint64_t hash_token(std::string_view token, std::uint64_t seed = 0);

// Padded character q-grams ("#" prefix, "$" suffix) hashed into a set.
TokenSet qgram_set(std::string_view s, std::size_t q = 3);
// Whitespace tokens hashed into a set.
TokenSet word_set(std::string_view s);

std::size_t intersection_size(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

double jaccard(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
double cosine(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
// Overlap coefficient |A n B| / min(|A|, |B|).
double containment(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

std::size_t levenshtein_distance(std::string_view a, std::string_view b);
// 1 - distance / max(|a|, |b|); two empty strings are identical.
double levenshtein_similarity(std::string_view a, std::string_view b);

double jaro(std::string_view a, std::string_view b);
double jaro_winkler(std::string_view a, std::string_view b, double prefix_weight = 0.1);

double exact_match(std::string_view a, std::string_view b);

std::optional<double> parse_number(std::string_view s);
double absolute_difference_similarity(double a, double b);
double relative_difference_similarity(double a, double b);

}  // namespace zeroer::similarity
