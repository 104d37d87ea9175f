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

#include "zeroer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_set>

#include "json.hpp"
#include "zeroer/error.hpp"
#include "zeroer/parallel.hpp"

namespace zeroer {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent generator per (stream, row).
std::mt19937_64 row_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t row) {
  return std::mt19937_64(mix(mix(seed ^ mix(stream)) + row));
}

enum Stream : std::uint64_t { kLabels = 1, kCross, kLeft, kRight, kPairs };

struct ClassSampler {
  Eigen::VectorXd mu;
  Eigen::MatrixXd L;  // lower Cholesky factor of the covariance
};

ClassSampler make_sampler(const std::vector<double>& mu, const std::vector<double>& sigma,
                          const CorrelationMatrix& R, const char* label) {
  const Eigen::Index d = static_cast<Eigen::Index>(mu.size());
  Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(sigma.data(), d);
  Eigen::MatrixXd Sigma = s.asDiagonal() * R.R * s.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0).any()) {
    throw NumericalError(std::string("synthetic ") + label + " covariance is not positive definite");
  }
  return {Eigen::Map<const Eigen::VectorXd>(mu.data(), d), llt.matrixL()};
}

// kind: 0 unmatched, 1 matched, 2 decoy.
void draw_rows(FeatureMatrix& X, const std::vector<std::uint8_t>& kind,
               const std::array<const ClassSampler*, 3>& samplers, std::uint64_t seed,
               std::uint64_t stream) {
  const Eigen::Index d = X.values.cols();
  parallel_for(kind.size(), [&](std::size_t begin, std::size_t end) {
    std::normal_distribution<double> normal;
    for (std::size_t i = begin; i < end; ++i) {
      auto rng = row_rng(seed, stream, i);
      Eigen::VectorXd z(d);
      for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(rng);
      const ClassSampler& c = *samplers[kind[i]];
      X.values.row(Eigen::Index(i)) = (c.mu + c.L * z).cwiseMax(0.0).cwiseMin(1.0).transpose();
    }
  }, 256);
}

FeatureMatrix empty_matrix(const SynthSpec& spec, Scope scope, std::size_t rows) {
  FeatureMatrix X;
  X.scope = scope;
  const std::size_t d = spec.dimension();
  X.values = Eigen::MatrixXd::Zero(Eigen::Index(rows), Eigen::Index(d));
  X.group_sizes = spec.groups;
  for (std::size_t g = 0, j = 0; g < spec.groups.size(); ++g) {
    for (std::size_t k = 0; k < spec.groups[g]; ++k, ++j) {
      X.feature_names.push_back("g" + std::to_string(g) + ":f" + std::to_string(k));
    }
  }
  X.scaler.min.assign(d, 0.0);
  X.scaler.max.assign(d, 1.0);
  return X;
}

// Adds `count` unmatched pairs drawn uniformly, skipping pairs already used.
void add_random_pairs(std::vector<PairIndex>& pairs, std::vector<std::uint8_t>& kind,
                      std::unordered_set<std::uint64_t>& used, std::size_t count,
                      std::size_t n_a, std::size_t n_b, bool same_table, std::mt19937_64& rng) {
  const std::size_t capacity = same_table ? n_a * (n_a - 1) / 2 : n_a * n_b;
  if (used.size() + count > capacity) throw ParseError("synthetic spec asks for more pairs than exist");
  std::uniform_int_distribution<std::uint32_t> pick_a(0, std::uint32_t(n_a - 1));
  std::uniform_int_distribution<std::uint32_t> pick_b(0, std::uint32_t(n_b - 1));
  for (std::size_t added = 0; added < count;) {
    PairIndex p{pick_a(rng), pick_b(rng)};
    if (same_table) {
      if (p.a == p.b) continue;
      if (p.a > p.b) std::swap(p.a, p.b);
    }
    if (!used.insert(pair_key(p)).second) continue;
    pairs.push_back(p);
    kind.push_back(0);
    ++added;
  }
}

}  // namespace

std::size_t SynthSpec::dimension() const {
  std::size_t d = 0;
  for (auto g : groups) d += g;
  return d;
}

void SynthSpec::normalize() {
  if (groups.empty() || std::find(groups.begin(), groups.end(), 0) != groups.end()) {
    throw ParseError("synthetic spec: groups must be non-empty");
  }
  const std::size_t d = dimension();
  auto fill = [&](std::vector<double>& v, double value, const char* name) {
    if (v.empty()) v.assign(d, value);
    if (v.size() != d) throw ParseError(std::string("synthetic spec: ") + name + " needs " + std::to_string(d) + " entries");
  };
  fill(mu_M, 0.8, "mu_M");
  fill(mu_U, 0.2, "mu_U");
  fill(sigma_M, 0.08, "sigma_M");
  fill(sigma_U, 0.1, "sigma_U");
  if (rho.empty()) rho.assign(groups.size(), 0.3);
  if (rho.size() != groups.size()) throw ParseError("synthetic spec: rho needs one entry per group");
  if (!(pi_M >= 0.0 && pi_M <= 1.0)) throw ParseError("synthetic spec: pi_M must lie in [0, 1]");
  if (n_pairs == 0) throw ParseError("synthetic spec: n_pairs must be positive");
  for (std::size_t j = 0; j < d; ++j) {
    if (!(sigma_M[j] > 0.0 && sigma_U[j] > 0.0)) throw ParseError("synthetic spec: sigmas must be positive");
  }
}

CorrelationMatrix SynthSpec::correlation() const {
  CorrelationMatrix R = CorrelationMatrix::identity(groups);
  const auto offsets = R.block_offsets();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t a = 0; a < groups[g]; ++a) {
      for (std::size_t b = 0; b < groups[g]; ++b) {
        if (a != b) R.R(Eigen::Index(offsets[g] + a), Eigen::Index(offsets[g] + b)) = rho[g];
      }
    }
  }
  return R;
}

SynthSpec synth_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synthetic spec: ") + e.what());
  }
  SynthSpec s;
  try {
    s.n_pairs = j.value("n_pairs", s.n_pairs);
    s.groups = j.value("groups", s.groups);
    s.pi_M = j.value("pi_M", s.pi_M);
    s.mu_M = j.value("mu_M", s.mu_M);
    s.mu_U = j.value("mu_U", s.mu_U);
    s.sigma_M = j.value("sigma_M", s.sigma_M);
    s.sigma_U = j.value("sigma_U", s.sigma_U);
    s.rho = j.value("rho", s.rho);
    s.seed = j.value("seed", s.seed);
    s.planted_triples = j.value("planted_triples", s.planted_triples);
    s.decoys = j.value("decoys", s.decoys);
    s.decoy_shift = j.value("decoy_shift", s.decoy_shift);
    s.within_pairs = j.value("within_pairs", s.within_pairs);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synthetic spec: ") + e.what());
  }
  s.normalize();
  return s;
}

std::string synth_spec_to_json(const SynthSpec& s) {
  nlohmann::json j{{"n_pairs", s.n_pairs},         {"groups", s.groups},
                   {"pi_M", s.pi_M},               {"mu_M", s.mu_M},
                   {"mu_U", s.mu_U},               {"sigma_M", s.sigma_M},
                   {"sigma_U", s.sigma_U},         {"rho", s.rho},
                   {"seed", s.seed},               {"planted_triples", s.planted_triples},
                   {"decoys", s.decoys},           {"decoy_shift", s.decoy_shift},
                   {"within_pairs", s.within_pairs}};
  return j.dump(2);
}

std::vector<PairIndex> SynthData::true_matches() const {
  std::vector<PairIndex> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) out.push_back(cross.pairs[i]);
  }
  return out;
}

SynthData generate(SynthSpec spec) {
  spec.normalize();
  SynthData data;
  const CorrelationMatrix R = spec.correlation();
  const ClassSampler match = make_sampler(spec.mu_M, spec.sigma_M, R, "match");
  const ClassSampler unmatch = make_sampler(spec.mu_U, spec.sigma_U, R, "unmatch");
  std::vector<double> decoy_mu = spec.mu_M;
  for (auto& m : decoy_mu) m -= spec.decoy_shift;
  const ClassSampler decoy = make_sampler(decoy_mu, spec.sigma_M, R, "decoy");

  // Labels first, one Bernoulli draw per row.
  std::vector<std::size_t> m_rows, u_rows;
  data.labels.resize(spec.n_pairs);
  for (std::size_t i = 0; i < spec.n_pairs; ++i) {
    auto rng = row_rng(spec.seed, kLabels, i);
    data.labels[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.pi_M;
    (data.labels[i] ? m_rows : u_rows).push_back(i);
  }
  if (2 * spec.planted_triples > m_rows.size()) {
    throw ParseError("synthetic spec: not enough matches for the planted triples");
  }
  if (spec.decoys > u_rows.size() || spec.decoys > m_rows.size()) {
    throw ParseError("synthetic spec: not enough rows for the decoys");
  }

  std::vector<PairIndex> cross(spec.n_pairs);
  std::vector<std::uint8_t> cross_kind(spec.n_pairs, 0);
  std::vector<PairIndex> right_pairs;
  std::vector<std::uint8_t> right_kind;
  std::unordered_set<std::uint64_t> cross_used, right_used;
  std::uint32_t next_left = 0, next_right = 0;

  for (std::size_t p = 0; p < spec.planted_triples; ++p) {
    const std::uint32_t l = next_left++;
    const std::uint32_t a = next_right++;
    const std::uint32_t b = next_right++;
    cross[m_rows[2 * p]] = {l, a};
    cross[m_rows[2 * p + 1]] = {l, b};
    right_pairs.push_back({a, b});
    right_kind.push_back(1);
    data.planted.push_back({l, a, b});
  }
  for (std::size_t m = 2 * spec.planted_triples; m < m_rows.size(); ++m) {
    cross[m_rows[m]] = {next_left++, next_right++};
  }
  for (std::size_t i : m_rows) {
    cross_kind[i] = 1;
    cross_used.insert(pair_key(cross[i]));
  }
  // A decoy pairs the left tuple of a true match with a fresh right tuple and
  // materializes the (unmatched) right-table pair the two would imply.
  for (std::size_t q = 0; q < spec.decoys; ++q) {
    const PairIndex anchor = cross[m_rows[m_rows.size() - 1 - q]];
    const std::uint32_t r = next_right++;
    cross[u_rows[q]] = {anchor.a, r};
    cross_kind[u_rows[q]] = 2;
    cross_used.insert(pair_key(cross[u_rows[q]]));
    right_pairs.push_back({std::min(anchor.b, r), std::max(anchor.b, r)});
    right_kind.push_back(0);
  }
  for (const auto& p : right_pairs) right_used.insert(pair_key(p));

  const std::size_t pad = static_cast<std::size_t>(std::ceil(std::sqrt(double(spec.n_pairs)))) + 8;
  data.left_size = next_left + pad;
  data.right_size = next_right + pad;

  {
    auto rng = row_rng(spec.seed, kPairs, 0);
    std::uniform_int_distribution<std::uint32_t> pick_l(0, std::uint32_t(data.left_size - 1));
    std::uniform_int_distribution<std::uint32_t> pick_r(0, std::uint32_t(data.right_size - 1));
    if (cross_used.size() + (u_rows.size() - spec.decoys) > data.left_size * data.right_size) {
      throw ParseError("synthetic spec asks for more pairs than exist");
    }
    for (std::size_t q = spec.decoys; q < u_rows.size(); ++q) {
      PairIndex p;
      do {
        p = {pick_l(rng), pick_r(rng)};
      } while (!cross_used.insert(pair_key(p)).second);
      cross[u_rows[q]] = p;
    }
  }

  std::vector<PairIndex> left_pairs;
  std::vector<std::uint8_t> left_kind;
  std::unordered_set<std::uint64_t> left_used;
  if (spec.within_pairs > 0) {
    auto rng = row_rng(spec.seed, kPairs, 1);
    add_random_pairs(left_pairs, left_kind, left_used, spec.within_pairs, data.left_size,
                     data.left_size, true, rng);
    add_random_pairs(right_pairs, right_kind, right_used, spec.within_pairs, data.right_size,
                     data.right_size, true, rng);
  }

  const std::array<const ClassSampler*, 3> samplers{&unmatch, &match, &decoy};
  data.cross = empty_matrix(spec, Scope::cross, cross.size());
  data.cross.pairs = cross;
  draw_rows(data.cross, cross_kind, samplers, spec.seed, kCross);
  data.left = empty_matrix(spec, Scope::left, left_pairs.size());
  data.left.pairs = left_pairs;
  draw_rows(data.left, left_kind, samplers, spec.seed, kLeft);
  data.right = empty_matrix(spec, Scope::right, right_pairs.size());
  data.right.pairs = right_pairs;
  draw_rows(data.right, right_kind, samplers, spec.seed, kRight);
  for (auto k : left_kind) data.left_labels.push_back(k == 1);
  for (auto k : right_kind) data.right_labels.push_back(k == 1);
  data.spec = std::move(spec);
  return data;
}

std::string synth_left_id(std::size_t row) { return "l" + std::to_string(row); }
std::string synth_right_id(std::size_t row) { return "r" + std::to_string(row); }

void write_synth(const std::string& dir, const SynthData& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto id_table = [](const std::string& name, std::size_t n, std::string (*id)(std::size_t)) {
    std::vector<Record> records;
    for (std::size_t r = 0; r < n; ++r) records.push_back({id(r)});
    return Table(name, {"id"}, "id", std::move(records));
  };
  const Table left = id_table("left", data.left_size, synth_left_id);
  const Table right = id_table("right", data.right_size, synth_right_id);
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  {
    auto out = open("left.csv");
    write_table(out, left);
  }
  {
    auto out = open("right.csv");
    write_table(out, right);
  }
  for (const FeatureMatrix* X : {&data.cross, &data.left, &data.right}) {
    const std::string scope(to_string(X->scope));
    auto out = open("pairs_" + scope + ".csv");
    write_pairs(out, CandidateSet{X->scope, X->pairs, "synthetic"}, left, right);
    if (X->rows() > 0) save_feature_matrix((fs::path(dir) / ("features_" + scope + ".bin")).string(), *X);
  }
  {
    auto out = open("gold.csv");
    write_pairs(out, CandidateSet{Scope::cross, data.true_matches(), "gold"}, left, right);
  }
  {
    auto out = open("spec.json");
    out << synth_spec_to_json(data.spec) << '\n';
  }
}

}  // namespace zeroer
