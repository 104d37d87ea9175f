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

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zeroer/blocking.hpp"
#include "zeroer/table.hpp"

namespace zeroer {

enum class SimilarityFunction {
  exact_match,
  qgram_jaccard,
  qgram_cosine,
  levenshtein,
  jaro_winkler,
  word_jaccard,
  word_cosine,
  containment,
  absolute_difference,
  relative_difference,
};

std::string_view to_string(SimilarityFunction fn);
SimilarityFunction similarity_function_from_string(std::string_view name);

struct FeatureDescriptor {
  std::size_t attribute = 0;  // index into FeatureSchema::attributes.pairs
  SimilarityFunction function = SimilarityFunction::exact_match;
  std::string name;
};

/// One group of similarity features per aligned attribute, in schema order.
struct FeatureSchema {
  AlignedSchema attributes;
  std::vector<std::vector<FeatureDescriptor>> groups;

  std::size_t dimension() const;
  std::vector<std::size_t> group_sizes() const;
  std::vector<std::string> feature_names() const;
};

// The default bank per attribute type.
std::vector<SimilarityFunction> default_bank(AttributeType type);
FeatureSchema build_feature_schema(const AlignedSchema& schema);

/// Per-feature min-max scaling fitted on one scope. A feature whose fitted
/// range is empty maps to the constant 0.5.
struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;

  static MinMaxScaler fit(const Eigen::MatrixXd& raw, const std::vector<std::uint8_t>& missing);
  void apply(Eigen::MatrixXd& values) const;
};

struct FeatureMatrix {
  Scope scope = Scope::cross;
  Eigen::MatrixXd values;                // rows x d, in [0, 1]
  std::vector<PairIndex> pairs;          // aligned with rows
  std::vector<std::size_t> group_sizes;  // sums to d
  std::vector<std::string> feature_names;
  MinMaxScaler scaler;
  std::vector<std::uint8_t> missing;  // row-major rows x d

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(values.cols()); }
  bool is_missing(std::size_t row, std::size_t col) const {
    return !missing.empty() && missing[row * dimension() + col] != 0;
  }
};

/// Computes raw similarities, min-max scales them per feature (fitted on
/// this scope) and imputes missing cells with the scaled column mean.
FeatureMatrix featurize(const CandidateSet& pairs, const Table& left, const Table& right,
                        const FeatureSchema& schema);

// Scaling followed by mean imputation; shared by featurize and tests.
void scale_and_impute(FeatureMatrix& matrix);

/// Block-diagonal Pearson correlation matrix shared by both classes.
struct CorrelationMatrix {
  Eigen::MatrixXd R;
  std::vector<std::size_t> block_sizes;

  std::size_t dimension() const { return static_cast<std::size_t>(R.rows()); }
  std::vector<std::size_t> block_offsets() const;
  Eigen::MatrixXd block(std::size_t g) const;

  static CorrelationMatrix identity(const std::vector<std::size_t>& block_sizes);
};

CorrelationMatrix estimate_shared_correlation(const FeatureMatrix& X);

// Projects a symmetric block onto the PSD cone (eigenvalues below 1e-8 are
// raised to 1e-8) and rescales it back to a unit diagonal.
Eigen::MatrixXd repair_correlation_block(const Eigen::MatrixXd& block);

// Binary matrix file plus a JSON sidecar at `path + ".json"`.
void save_feature_matrix(const std::string& path, const FeatureMatrix& X,
                         const std::string& digest = {});
FeatureMatrix load_feature_matrix(const std::string& path, std::string* digest = nullptr);

}  // namespace zeroer
