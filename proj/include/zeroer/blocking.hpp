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
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "zeroer/table.hpp"

namespace zeroer {

enum class Scope { cross, left, right };

std::string_view to_string(Scope scope);
Scope scope_from_string(std::string_view name);

/// Row indices of one candidate pair. For cross scope `a` indexes the left
/// table and `b` the right table; for same-table scopes a < b.
struct PairIndex {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  friend auto operator<=>(const PairIndex&, const PairIndex&) = default;
};

inline std::uint64_t pair_key(PairIndex p) { return (std::uint64_t{p.a} << 32) | p.b; }

struct CandidateSet {
  Scope scope = Scope::cross;
  std::vector<PairIndex> pairs;  // sorted, unique
  std::string provenance;        // blocking config digest or "cross-join"
};

struct BlockingConfig {
  std::string attribute;  // left-side name of an aligned attribute
  std::size_t qgram = 3;
  std::size_t bands = 8;
  std::size_t rows = 4;
  std::uint64_t seed = 0x5eed0fb10c4ULL;

  std::string digest() const;
};

CandidateSet cross_join(const Table& left, const Table& right, Scope scope);

/// MinHash LSH over q-gram sets of the blocking attribute. A pair survives
/// iff the two tuples agree on all `rows` minhashes of at least one band.
/// Tuples with a null blocking value never pair up.
CandidateSet block_candidates(const Table& left, const Table& right, const AlignedSchema& schema,
                              Scope scope, const BlockingConfig& config);

// Pair list files: header "left_id,right_id" then one pair per line.
void write_pairs(std::ostream& out, const CandidateSet& set, const Table& left,
                 const Table& right);
CandidateSet read_pairs(std::istream& in, const Table& left, const Table& right, Scope scope);

// The two tables a scope draws its tuples from.
inline const Table& first_table(Scope s, const Table& left, const Table& right) {
  return s == Scope::right ? right : left;
}
inline const Table& second_table(Scope s, const Table& left, const Table& right) {
  return s == Scope::left ? left : right;
}

}  // namespace zeroer
