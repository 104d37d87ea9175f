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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "zeroer/features.hpp"

namespace zeroer {

/// Generating parameters for a synthetic feature dataset. Both classes share
/// one block-diagonal equicorrelation matrix with `rho[g]` inside group g.
struct SynthSpec {
  std::size_t n_pairs = 2000;
  std::vector<std::size_t> groups{3, 3};
  double pi_M = 0.05;
  std::vector<double> mu_M, mu_U;        // size d; defaults 0.8 / 0.2
  std::vector<double> sigma_M, sigma_U;  // size d; defaults 0.08 / 0.1
  std::vector<double> rho;               // size groups; default 0.3
  std::uint64_t seed = 42;
  std::size_t planted_triples = 0;  // left tuples matched to two right duplicates
  std::size_t decoys = 0;           // unmatched cross pairs beside a true match
  double decoy_shift = 0.25;        // subtracted from mu_M for decoy features
  std::size_t within_pairs = 0;     // extra unmatched rows per same-table scope

  std::size_t dimension() const;
  // Fills defaulted vectors and checks sizes and ranges; throws ParseError.
  void normalize();
  CorrelationMatrix correlation() const;
};

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

struct PlantedTriple {
  std::uint32_t left;                  // shared left tuple
  std::uint32_t right_a, right_b;      // its two matching right tuples
};

struct SynthData {
  SynthSpec spec;
  std::size_t left_size = 0, right_size = 0;
  FeatureMatrix cross, left, right;  // left holds no pairs unless within_pairs > 0
  std::vector<std::uint8_t> labels, left_labels, right_labels;  // 1 = match
  std::vector<PlantedTriple> planted;

  std::vector<PairIndex> true_matches() const;
};

/// Draws every row from its class Gaussian and clamps to [0, 1]; each row uses
/// its own generator derived from the seed, so output is seed-deterministic.
/// Throws NumericalError when a class covariance is not positive definite.
SynthData generate(SynthSpec spec);

// Tuple ids used when synthetic data is written out.
std::string synth_left_id(std::size_t row);
std::string synth_right_id(std::size_t row);

/// Writes left.csv/right.csv (id column only), pairs_*.csv, features_*.bin,
/// gold.csv and spec.json under `dir`.
void write_synth(const std::string& dir, const SynthData& data);

}  // namespace zeroer
