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

#include "zeroer/features.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>

#include "json.hpp"
#include "zeroer/error.hpp"
#include "zeroer/parallel.hpp"
#include "zeroer/similarity.hpp"

namespace zeroer {

namespace {

constexpr char kMatrixMagic[8] = {'Z', 'E', 'R', 'F', 'E', 'A', 'T', '1'};

struct Profile {
  const std::string* text = nullptr;
  similarity::TokenSet qgrams;
  similarity::TokenSet words;
  std::optional<double> number;
};

struct Needs {
  bool qgrams = false;
  bool words = false;
  bool number = false;
};

Needs needs_for(const std::vector<FeatureDescriptor>& group) {
  Needs n;
  for (const auto& f : group) {
    switch (f.function) {
      case SimilarityFunction::qgram_jaccard:
      case SimilarityFunction::qgram_cosine: n.qgrams = true; break;
      case SimilarityFunction::word_jaccard:
      case SimilarityFunction::word_cosine:
      case SimilarityFunction::containment: n.words = true; break;
      case SimilarityFunction::absolute_difference:
      case SimilarityFunction::relative_difference: n.number = true; break;
      default: break;
    }
  }
  return n;
}

std::vector<Profile> build_profiles(const Table& table, std::size_t col, Needs needs) {
  std::vector<Profile> out(table.size());
  parallel_for(table.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      const Cell& cell = table.value(row, col);
      if (!cell) continue;
      Profile& p = out[row];
      p.text = &*cell;
      if (needs.qgrams) p.qgrams = similarity::qgram_set(*cell);
      if (needs.words) p.words = similarity::word_set(*cell);
      if (needs.number) p.number = similarity::parse_number(*cell);
    }
  }, 64);
  return out;
}

// Missing when either side is null or a numeric feature fails to parse.
std::optional<double> evaluate(SimilarityFunction fn, const Profile& a, const Profile& b) {
  if (!a.text || !b.text) return std::nullopt;
  using namespace similarity;
  switch (fn) {
    case SimilarityFunction::exact_match: return exact_match(*a.text, *b.text);
    case SimilarityFunction::qgram_jaccard: return jaccard(a.qgrams, b.qgrams);
    case SimilarityFunction::qgram_cosine: return cosine(a.qgrams, b.qgrams);
    case SimilarityFunction::levenshtein: return levenshtein_similarity(*a.text, *b.text);
    case SimilarityFunction::jaro_winkler: return jaro_winkler(*a.text, *b.text);
    case SimilarityFunction::word_jaccard: return jaccard(a.words, b.words);
    case SimilarityFunction::word_cosine: return cosine(a.words, b.words);
    case SimilarityFunction::containment: return containment(a.words, b.words);
    case SimilarityFunction::absolute_difference:
      if (!a.number || !b.number) return std::nullopt;
      return absolute_difference_similarity(*a.number, *b.number);
    case SimilarityFunction::relative_difference:
      if (!a.number || !b.number) return std::nullopt;
      return relative_difference_similarity(*a.number, *b.number);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(SimilarityFunction fn) {
  switch (fn) {
    case SimilarityFunction::exact_match: return "exact_match";
    case SimilarityFunction::qgram_jaccard: return "qgram3_jaccard";
    case SimilarityFunction::qgram_cosine: return "qgram3_cosine";
    case SimilarityFunction::levenshtein: return "levenshtein";
    case SimilarityFunction::jaro_winkler: return "jaro_winkler";
    case SimilarityFunction::word_jaccard: return "word_jaccard";
    case SimilarityFunction::word_cosine: return "word_cosine";
    case SimilarityFunction::containment: return "containment";
    case SimilarityFunction::absolute_difference: return "abs_diff";
    case SimilarityFunction::relative_difference: return "rel_diff";
  }
  return "exact_match";
}

SimilarityFunction similarity_function_from_string(std::string_view name) {
  for (auto fn : {SimilarityFunction::exact_match, SimilarityFunction::qgram_jaccard,
                  SimilarityFunction::qgram_cosine, SimilarityFunction::levenshtein,
                  SimilarityFunction::jaro_winkler, SimilarityFunction::word_jaccard,
                  SimilarityFunction::word_cosine, SimilarityFunction::containment,
                  SimilarityFunction::absolute_difference,
                  SimilarityFunction::relative_difference}) {
    if (to_string(fn) == name) return fn;
  }
  throw ParseError("unknown similarity function: " + std::string(name));
}

std::size_t FeatureSchema::dimension() const {
  std::size_t d = 0;
  for (const auto& g : groups) d += g.size();
  return d;
}

std::vector<std::size_t> FeatureSchema::group_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  return sizes;
}

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names;
  for (const auto& g : groups)
    for (const auto& f : g) names.push_back(f.name);
  return names;
}

std::vector<SimilarityFunction> default_bank(AttributeType type) {
  using F = SimilarityFunction;
  switch (type) {
    case AttributeType::short_string:
      return {F::exact_match, F::qgram_jaccard, F::qgram_cosine, F::levenshtein, F::jaro_winkler};
    case AttributeType::long_string:
      return {F::word_jaccard, F::word_cosine, F::qgram_jaccard, F::containment};
    case AttributeType::numeric:
      return {F::exact_match, F::absolute_difference, F::relative_difference};
    case AttributeType::categorical: return {F::exact_match};
  }
  return {};
}

FeatureSchema build_feature_schema(const AlignedSchema& schema) {
  if (schema.pairs.empty()) throw ParseError("feature schema needs at least one aligned attribute");
  FeatureSchema fs;
  fs.attributes = schema;
  for (std::size_t a = 0; a < schema.pairs.size(); ++a) {
    std::vector<FeatureDescriptor> group;
    for (auto fn : default_bank(schema.pairs[a].type)) {
      group.push_back({a, fn, schema.pairs[a].left + ":" + std::string(to_string(fn))});
    }
    fs.groups.push_back(std::move(group));
  }
  return fs;
}

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& raw, const std::vector<std::uint8_t>& missing) {
  const auto n = raw.rows();
  const auto d = raw.cols();
  MinMaxScaler s;
  s.min.assign(d, 0.0);
  s.max.assign(d, 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!missing.empty() && missing[i * d + j]) continue;
      lo = std::min(lo, raw(i, j));
      hi = std::max(hi, raw(i, j));
    }
    if (lo > hi) lo = hi = 0.0;  // column entirely missing
    s.min[j] = lo;
    s.max[j] = hi;
  }
  return s;
}

void MinMaxScaler::apply(Eigen::MatrixXd& values) const {
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const double range = max[j] - min[j];
    if (range <= 0.0) {
      values.col(j).setConstant(0.5);
      continue;
    }
    values.col(j) = ((values.col(j).array() - min[j]) / range).cwiseMax(0.0).cwiseMin(1.0);
  }
}

void scale_and_impute(FeatureMatrix& X) {
  X.scaler = MinMaxScaler::fit(X.values, X.missing);
  X.scaler.apply(X.values);
  const std::size_t n = X.rows();
  const std::size_t d = X.dimension();
  if (X.missing.empty()) return;
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (X.missing[i * d + j]) continue;
      sum += X.values(i, j);
      ++present;
    }
    const double mean = present ? sum / static_cast<double>(present) : 0.5;
    for (std::size_t i = 0; i < n; ++i)
      if (X.missing[i * d + j]) X.values(i, j) = mean;
  }
}

FeatureMatrix featurize(const CandidateSet& pairs, const Table& left, const Table& right,
                        const FeatureSchema& schema) {
  const Table& ta = first_table(pairs.scope, left, right);
  const Table& tb = second_table(pairs.scope, left, right);
  const std::size_t n = pairs.pairs.size();
  const std::size_t d = schema.dimension();

  for (const auto& p : pairs.pairs) {
    if (p.a >= ta.size() || p.b >= tb.size()) {
      throw ParseError("candidate pair references a row outside its table");
    }
  }

  FeatureMatrix X;
  X.scope = pairs.scope;
  X.pairs = pairs.pairs;
  X.group_sizes = schema.group_sizes();
  X.feature_names = schema.feature_names();
  X.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  X.missing.assign(n * d, 0);

  std::size_t offset = 0;
  for (const auto& group : schema.groups) {
    if (group.empty()) continue;
    const auto& attr = schema.attributes.pairs[group.front().attribute];
    const std::string& name_a = pairs.scope == Scope::right ? attr.right : attr.left;
    const std::string& name_b = pairs.scope == Scope::left ? attr.left : attr.right;
    auto col_a = ta.column(name_a);
    auto col_b = tb.column(name_b);
    if (!col_a || !col_b) throw ParseError("aligned attribute '" + attr.left + "' missing from table");
    const Needs needs = needs_for(group);
    const auto prof_a = build_profiles(ta, *col_a, needs);
    const auto prof_b = &ta == &tb && *col_a == *col_b ? prof_a : build_profiles(tb, *col_b, needs);

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto& p = pairs.pairs[i];
        for (std::size_t k = 0; k < group.size(); ++k) {
          auto v = evaluate(group[k].function, prof_a[p.a], prof_b[p.b]);
          const std::size_t j = offset + k;
          if (v) {
            X.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
          } else {
            X.missing[i * d + j] = 1;
          }
        }
      }
    });
    offset += group.size();
  }
  scale_and_impute(X);
  return X;
}

std::vector<std::size_t> CorrelationMatrix::block_offsets() const {
  std::vector<std::size_t> offsets;
  std::size_t o = 0;
  for (auto s : block_sizes) {
    offsets.push_back(o);
    o += s;
  }
  return offsets;
}

Eigen::MatrixXd CorrelationMatrix::block(std::size_t g) const {
  const auto off = static_cast<Eigen::Index>(block_offsets()[g]);
  const auto sz = static_cast<Eigen::Index>(block_sizes[g]);
  return R.block(off, off, sz, sz);
}

CorrelationMatrix CorrelationMatrix::identity(const std::vector<std::size_t>& block_sizes) {
  std::size_t d = 0;
  for (auto s : block_sizes) d += s;
  const auto n = static_cast<Eigen::Index>(d);
  return {Eigen::MatrixXd::Identity(n, n), block_sizes};
}

Eigen::MatrixXd repair_correlation_block(const Eigen::MatrixXd& block) {
  constexpr double kFloor = 1e-8;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
  if (eig.eigenvalues().minCoeff() >= kFloor) return block;
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(kFloor);
  Eigen::MatrixXd fixed = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd inv_sd = fixed.diagonal().cwiseSqrt().cwiseInverse();
  fixed = inv_sd.asDiagonal() * fixed * inv_sd.asDiagonal();
  fixed = 0.5 * (fixed + fixed.transpose());
  fixed.diagonal().setOnes();
  return fixed;
}

CorrelationMatrix estimate_shared_correlation(const FeatureMatrix& X) {
  const std::size_t d = X.dimension();
  if (X.rows() < 2) throw ParseError("correlation estimation needs at least two rows");
  CorrelationMatrix corr = CorrelationMatrix::identity(X.group_sizes);
  if (corr.dimension() != d) throw ParseError("feature groups do not cover the feature matrix");

  const Eigen::RowVectorXd mean = X.values.colwise().mean();
  const Eigen::MatrixXd centered = X.values.rowwise() - mean;
  const auto offsets = corr.block_offsets();
  for (std::size_t g = 0; g < corr.block_sizes.size(); ++g) {
    const auto off = static_cast<Eigen::Index>(offsets[g]);
    const auto sz = static_cast<Eigen::Index>(corr.block_sizes[g]);
    if (sz == 0) continue;
    const auto cols = centered.middleCols(off, sz);
    Eigen::MatrixXd cov = cols.transpose() * cols;
    // Rounding in the mean leaves a constant column with tiny nonzero
    // residuals, so constancy is read off the raw values.
    std::vector<bool> constant(static_cast<std::size_t>(sz));
    for (Eigen::Index a = 0; a < sz; ++a) {
      const auto col = X.values.col(off + a);
      constant[std::size_t(a)] = col.maxCoeff() == col.minCoeff();
    }
    Eigen::MatrixXd block = Eigen::MatrixXd::Identity(sz, sz);
    for (Eigen::Index a = 0; a < sz; ++a) {
      for (Eigen::Index b = a + 1; b < sz; ++b) {
        const double denom = std::sqrt(cov(a, a) * cov(b, b));
        const bool flat = constant[std::size_t(a)] || constant[std::size_t(b)];
        const double r = !flat && denom > 0.0 ? std::clamp(cov(a, b) / denom, -1.0, 1.0) : 0.0;
        block(a, b) = block(b, a) = r;
      }
    }
    corr.R.block(off, off, sz, sz) = repair_correlation_block(block);
  }
  return corr;
}

void save_feature_matrix(const std::string& path, const FeatureMatrix& X, const std::string& digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write feature matrix: " + path);
  const std::uint64_t n = X.rows();
  const std::uint64_t d = X.dimension();
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = X.values;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(n * d * sizeof(double)));
  for (const auto& p : X.pairs) {
    out.write(reinterpret_cast<const char*>(&p.a), sizeof p.a);
    out.write(reinterpret_cast<const char*>(&p.b), sizeof p.b);
  }
  std::vector<std::uint8_t> missing = X.missing;
  missing.resize(n * d, 0);
  out.write(reinterpret_cast<const char*>(missing.data()), static_cast<std::streamsize>(missing.size()));

  nlohmann::json meta;
  meta["format"] = "zeroer-feature-matrix";
  meta["version"] = 1;
  meta["scope"] = std::string(to_string(X.scope));
  meta["rows"] = n;
  meta["dimension"] = d;
  meta["group_sizes"] = X.group_sizes;
  meta["feature_names"] = X.feature_names;
  meta["scaler"] = {{"min", X.scaler.min}, {"max", X.scaler.max}};
  meta["digest"] = digest;
  std::ofstream side(path + ".json");
  side << meta.dump(2) << '\n';
}

FeatureMatrix load_feature_matrix(const std::string& path, std::string* digest) {
  std::ifstream side(path + ".json");
  if (!side) throw ParseError("missing feature matrix sidecar: " + path + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad feature matrix sidecar: " + std::string(e.what()));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open feature matrix: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw ParseError("not a feature matrix file: " + path);
  }
  std::uint64_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  FeatureMatrix X;
  X.scope = scope_from_string(meta.at("scope").get<std::string>());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, d);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(n * d * sizeof(double)));
  X.values = rm;
  X.pairs.resize(n);
  for (auto& p : X.pairs) {
    in.read(reinterpret_cast<char*>(&p.a), sizeof p.a);
    in.read(reinterpret_cast<char*>(&p.b), sizeof p.b);
  }
  X.missing.resize(n * d);
  in.read(reinterpret_cast<char*>(X.missing.data()), static_cast<std::streamsize>(n * d));
  if (!in) throw ParseError("truncated feature matrix: " + path);
  X.group_sizes = meta.at("group_sizes").get<std::vector<std::size_t>>();
  X.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
  X.scaler.min = meta.at("scaler").at("min").get<std::vector<double>>();
  X.scaler.max = meta.at("scaler").at("max").get<std::vector<double>>();
  if (digest) *digest = meta.value("digest", std::string{});
  return X;
}

}  // namespace zeroer
