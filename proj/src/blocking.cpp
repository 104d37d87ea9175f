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

#include "zeroer/blocking.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "zeroer/error.hpp"
#include "zeroer/parallel.hpp"
#include "zeroer/similarity.hpp"

namespace zeroer {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

using Signature = std::vector<std::uint64_t>;  // one key per band; empty = no signature

std::vector<Signature> band_keys(const Table& table, std::size_t col,
                                 const BlockingConfig& config) {
  const std::size_t hashes = config.bands * config.rows;
  std::vector<std::uint64_t> salts(hashes);
  for (std::size_t h = 0; h < hashes; ++h) salts[h] = mix(config.seed + h);

  std::vector<Signature> keys(table.size());
  parallel_for(table.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint64_t> mins(hashes);
    for (std::size_t row = begin; row < end; ++row) {
      const Cell& cell = table.value(row, col);
      if (!cell) continue;
      const auto grams = similarity::qgram_set(*cell, config.qgram);
      std::fill(mins.begin(), mins.end(), std::numeric_limits<std::uint64_t>::max());
      for (auto g : grams) {
        for (std::size_t h = 0; h < hashes; ++h) mins[h] = std::min(mins[h], mix(g ^ salts[h]));
      }
      Signature sig(config.bands);
      for (std::size_t band = 0; band < config.bands; ++band) {
        std::uint64_t k = mix(band + 1);
        for (std::size_t r = 0; r < config.rows; ++r) k = mix(k ^ mins[band * config.rows + r]);
        sig[band] = k;
      }
      keys[row] = std::move(sig);
    }
  }, 64);
  return keys;
}

void finalize(CandidateSet& set) {
  std::sort(set.pairs.begin(), set.pairs.end());
  set.pairs.erase(std::unique(set.pairs.begin(), set.pairs.end()), set.pairs.end());
}

}  // namespace

std::string_view to_string(Scope scope) {
  switch (scope) {
    case Scope::cross: return "cross";
    case Scope::left: return "left";
    case Scope::right: return "right";
  }
  return "cross";
}

Scope scope_from_string(std::string_view name) {
  if (name == "cross") return Scope::cross;
  if (name == "left") return Scope::left;
  if (name == "right") return Scope::right;
  throw ParseError("unknown scope: " + std::string(name));
}

std::string BlockingConfig::digest() const {
  std::ostringstream os;
  os << "minhash-lsh:attr=" << attribute << ";q=" << qgram << ";bands=" << bands
     << ";rows=" << rows << ";seed=" << seed;
  return os.str();
}

CandidateSet cross_join(const Table& left, const Table& right, Scope scope) {
  CandidateSet set{scope, {}, "cross-join"};
  if (scope == Scope::cross) {
    set.pairs.reserve(left.size() * right.size());
    for (std::uint32_t a = 0; a < left.size(); ++a)
      for (std::uint32_t b = 0; b < right.size(); ++b) set.pairs.push_back({a, b});
  } else {
    const std::size_t n = first_table(scope, left, right).size();
    set.pairs.reserve(n * (n - (n > 0)) / 2);
    for (std::uint32_t a = 0; a < n; ++a)
      for (std::uint32_t b = a + 1; b < n; ++b) set.pairs.push_back({a, b});
  }
  return set;
}

CandidateSet block_candidates(const Table& left, const Table& right, const AlignedSchema& schema,
                              Scope scope, const BlockingConfig& config) {
  if (config.bands == 0 || config.rows == 0 || config.qgram == 0) {
    throw ParseError("blocking needs positive bands, rows and q-gram size");
  }
  auto it = std::find_if(schema.pairs.begin(), schema.pairs.end(),
                         [&](const AlignedAttribute& a) { return a.left == config.attribute; });
  if (it == schema.pairs.end()) {
    throw ParseError("blocking attribute '" + config.attribute + "' is not an aligned attribute");
  }
  const Table& ta = first_table(scope, left, right);
  const Table& tb = second_table(scope, left, right);
  const std::string& name_a = scope == Scope::right ? it->right : it->left;
  const std::string& name_b = scope == Scope::left ? it->left : it->right;
  const std::size_t col_a = *ta.column(name_a);
  const std::size_t col_b = *tb.column(name_b);

  auto all_null = [](const Table& t, std::size_t col) {
    return std::none_of(t.records().begin(), t.records().end(),
                        [col](const Record& r) { return r[col].has_value(); });
  };
  if (all_null(ta, col_a) || all_null(tb, col_b)) {
    throw ParseError("blocking attribute '" + config.attribute + "' is entirely null");
  }

  const auto keys_a = band_keys(ta, col_a, config);
  const auto keys_b = scope == Scope::cross ? band_keys(tb, col_b, config) : keys_a;

  CandidateSet set{scope, {}, config.digest()};
  for (std::size_t band = 0; band < config.bands; ++band) {
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
    for (std::uint32_t row = 0; row < keys_b.size(); ++row) {
      if (!keys_b[row].empty()) buckets[keys_b[row][band]].push_back(row);
    }
    for (std::uint32_t row = 0; row < keys_a.size(); ++row) {
      if (keys_a[row].empty()) continue;
      auto found = buckets.find(keys_a[row][band]);
      if (found == buckets.end()) continue;
      for (std::uint32_t other : found->second) {
        if (scope == Scope::cross) {
          set.pairs.push_back({row, other});
        } else if (row < other) {
          set.pairs.push_back({row, other});
        }
      }
    }
  }
  finalize(set);
  return set;
}

void write_pairs(std::ostream& out, const CandidateSet& set, const Table& left,
                 const Table& right) {
  const Table& ta = first_table(set.scope, left, right);
  const Table& tb = second_table(set.scope, left, right);
  out << "left_id,right_id\n";
  for (const auto& p : set.pairs) out << ta.id(p.a) << ',' << tb.id(p.b) << '\n';
}

CandidateSet read_pairs(std::istream& in, const Table& left, const Table& right, Scope scope) {
  const Table& ta = first_table(scope, left, right);
  const Table& tb = second_table(scope, left, right);
  auto rows = read_delimited(in, ',');
  CandidateSet set{scope, {}, "file"};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [fields, line] = rows[r];
    if (fields.size() < 2) throw ParseError("pair file line " + std::to_string(line) + " is short");
    auto a = ta.find(fields[0]);
    auto b = tb.find(fields[1]);
    if (!a || !b) {
      throw ParseError("pair file line " + std::to_string(line) + ": unresolvable id '" +
                       (a ? fields[1] : fields[0]) + "'");
    }
    PairIndex p{static_cast<std::uint32_t>(*a), static_cast<std::uint32_t>(*b)};
    if (scope != Scope::cross) {
      if (p.a == p.b) continue;
      if (p.a > p.b) std::swap(p.a, p.b);
    }
    set.pairs.push_back(p);
  }
  finalize(set);
  return set;
}

}  // namespace zeroer
