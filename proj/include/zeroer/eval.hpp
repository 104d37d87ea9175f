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

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "zeroer/blocking.hpp"

namespace zeroer {

/// Gold matches as row pairs, canonicalized to (left row, right row), or
/// (smaller row, larger row) for a single table. Sorted and unique.
struct GoldLabels {
  Scope scope = Scope::cross;
  std::vector<PairIndex> pairs;
};

/// Reads a two-column id file with a header. A row whose ids only resolve in
/// swapped order is swapped; anything else unresolvable is a ParseError.
GoldLabels read_gold(std::istream& in, const Table& left, const Table& right,
                     Scope scope = Scope::cross);
GoldLabels load_gold(const std::string& path, const Table& left, const Table& right,
                     Scope scope = Scope::cross);

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double blocking_recall = 1.0;  // share of gold pairs present in the candidate set
  std::string variant = "full";
  std::string config_digest;
  double wall_seconds = 0.0;
};

double f1_score(double precision, double recall);

/// Exact set comparison after deduplication. Gold pairs missing from the
/// prediction count as false negatives whether or not blocking kept them;
/// `candidates`, when given, only feeds blocking_recall.
EvalReport evaluate(std::vector<PairIndex> predicted, const GoldLabels& gold,
                    const std::vector<PairIndex>* candidates = nullptr);

enum class AblationVariant {
  full,
  uniform_reg,
  diag_shared_cov,
  postprocess_transitivity,
  no_transitivity,
};

std::string_view to_string(AblationVariant v);
AblationVariant ablation_variant_from_string(std::string_view name);
std::vector<AblationVariant> all_ablation_variants();

/// Duplicate-free resolution of independent predictions: among predicted
/// pairs (gamma > 0.5) sharing a tuple only the one with the highest
/// posterior stays a match. Ties go to the earlier pair. Returns the
/// surviving pairs in input order.
std::vector<PairIndex> postprocess_transitivity(const std::vector<PairIndex>& pairs,
                                                const Eigen::VectorXd& gamma);

void write_report_json(std::ostream& out, const std::vector<EvalReport>& reports);
void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports);

}  // namespace zeroer
