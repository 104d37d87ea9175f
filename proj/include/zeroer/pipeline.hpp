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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zeroer/eval.hpp"
#include "zeroer/transitivity.hpp"

namespace zeroer {

inline constexpr const char* kOutputLayout = "zeroer-output/1";

/// Everything one end-to-end run needs. An empty right_path means
/// deduplication of a single table.
struct RunConfig {
  std::string left_path, right_path;
  std::string left_id = "id", right_id = "id";
  char delimiter = ',';
  std::string gold_path;
  std::string out_dir = "zeroer-out";
  std::string cache_dir;  // feature cache; empty = out_dir

  // Extra attribute pairs "left=right" on top of same-name alignment.
  std::vector<std::string> align;
  // Replace an attribute's default similarity bank: "attr=fn1,fn2,...".
  std::vector<std::string> features;

  bool blocking = true;
  BlockingConfig block;        // attribute empty = first aligned attribute
  bool within_tables = true;   // fit the two same-table models

  double epsilon = 0.5;
  double kappa_prime = 0.01;
  double tol = 1e-5;
  int max_iter = 200;
  bool transitivity = true;
  AblationVariant variant = AblationVariant::full;
  ScaleEstimator scale_estimator = ScaleEstimator::moment;
  // Below 1, the model is fitted without transitivity on a seeded subsample
  // of the cross pairs and evaluated on the remaining pairs.
  double train_fraction = 1.0;
  std::uint64_t seed = 0x5eed0fb10c4ULL;
  bool audit = false;
  bool cache = true;

  void validate() const;
  std::string digest() const;
};

struct RunResult {
  std::vector<PairIndex> matches;
  Eigen::VectorXd gamma;            // final cross posteriors, aligned with `pairs`
  std::vector<PairIndex> pairs;     // cross candidates
  FitReport fit;
  std::optional<EvalReport> eval;
  bool features_from_cache = false;
};

/// Runs ingest, blocking, featurization, fitting and (with a gold file)
/// evaluation, persisting every artifact under config.out_dir.
RunResult run(const RunConfig& config);

/// run() with config.variant replaced; artifacts go to out_dir/<variant>.
EvalReport run_ablation(RunConfig config, AblationVariant variant);

// Parses "attr=fn1,fn2" overrides into a feature schema.
FeatureSchema apply_feature_overrides(FeatureSchema schema, const std::vector<std::string>& overrides);
// Parses "left=right" hints.
std::vector<std::pair<std::string, std::string>> parse_alignment_hints(const std::vector<std::string>& hints);

// Writes "left_id,right_id,gamma,label" for the pairs in `keep`, in the
// order of `pairs`; gamma has round-trip precision and label is M for pairs
// in `predicted`, else U.
void write_matches(std::ostream& out, const std::vector<PairIndex>& pairs, const Eigen::VectorXd& gamma,
                   const std::vector<PairIndex>& keep, const std::vector<PairIndex>& predicted,
                   const Table& left, const Table& right, Scope scope = Scope::cross);
void write_fit_report(std::ostream& out, const FitReport& report);

}  // namespace zeroer
