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
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "zeroer/model.hpp"

namespace zeroer {

inline constexpr std::uint32_t kAbsentPair = std::numeric_limits<std::uint32_t>::max();

/// A pair posterior addressed by scope and row. Absent pairs (pruned by
/// blocking or never materialized) read as gamma = 0 and never move.
struct PairRef {
  Scope scope = Scope::cross;
  std::uint32_t index = kAbsentPair;
  bool present() const { return index != kAbsentPair; }
  std::uint64_t key() const { return (std::uint64_t(scope) << 32) | index; }
};

/// gamma_ij * gamma_ik <= gamma_jk over tuples i, j, k; the first two pairs
/// are the premises, jk the conclusion.
struct ConstraintTriple {
  PairRef ij, ik, jk;
  double gamma_ij = 0.0, gamma_ik = 0.0, gamma_jk = 0.0;

  bool satisfied(double slack = 0.0) const { return gamma_ij * gamma_ik <= gamma_jk + slack; }
};

struct ScopeState {
  Scope scope = Scope::cross;
  std::vector<PairIndex> pairs;
  ModelParams theta;
  PosteriorVector gamma;
  LogJoint log_joint;   // from the latest E-step; may be empty
  bool fitted = false;  // false when the scope is frozen at its initial posteriors

  void build_index();
  std::optional<std::uint32_t> find(std::uint32_t a, std::uint32_t b) const;

 private:
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

/// Parameters and posteriors for the cross-table scope and both same-table
/// scopes. In single-table mode only `cross` is used and holds the
/// unordered pairs of the one table.
struct TriModelState {
  bool single_table = false;
  ScopeState cross, left, right;

  ScopeState& scope(Scope s);
  const ScopeState& scope(Scope s) const;
  double gamma(PairRef ref) const;
};

enum class Direction : std::int8_t { none = 0, up = 1, down = -1 };

enum class Axis : std::int8_t { none, raise_conclusion, lower_first, lower_second };

struct ProjectionInput {
  double gamma_ij = 0.0, gamma_ik = 0.0, gamma_jk = 0.0;
  // log(pi_C p(x | theta_C)) for (ij, ik, jk); used to rank the axes.
  std::array<double, 3> log_match{};
  std::array<double, 3> log_unmatch{};
  std::array<Direction, 3> locks{};
  std::array<bool, 3> movable{true, true, true};
};

struct Projection {
  Axis axis = Axis::none;
  double value = 0.0;                 // new posterior for the moved pair
  std::array<Axis, 3> ranking{};      // candidates best first (feasible ones only)
  std::size_t candidates = 0;
  bool conflict = false;              // best candidate was rejected by a lock
};

/// Evaluates the three axis-aligned projections that make the constraint
/// tight, ranks them by the free-energy change of the moved pair, and picks
/// the best one that does not reverse a lock. Axis::none when every
/// candidate conflicts. Caller guarantees the constraint is violated.
Projection project_constraint(const ProjectionInput& input);

/// Every triple whose two premise pairs are cross-table (or, in single-table
/// mode, same-scope) pairs sharing a tuple with gamma >= threshold.
std::vector<ConstraintTriple> enumerate_active_constraints(const TriModelState& state,
                                                           double threshold = 0.5);

struct AuditEntry {
  ConstraintTriple triple;  // values before the projection
  Axis axis = Axis::none;
  double before = 0.0;
  double after = 0.0;
};

struct ResolveStats {
  std::size_t constraints = 0;
  std::size_t violated = 0;
  std::size_t projected = 0;
  std::size_t skipped = 0;  // every axis conflicted with a lock
};

/// One greedy pass: violated triples in descending order of the premise
/// product, each projected once, with per-pair direction locks.
ResolveStats resolve_transitivity(TriModelState& state, double threshold = 0.5,
                                  std::vector<AuditEntry>* audit = nullptr);

struct FullFitConfig {
  FitConfig fit;
  bool transitivity = true;
  double threshold = 0.5;
  bool single_table = false;
  bool audit = false;
  // Predict from the constrained posteriors instead of the last
  // unconstrained E-step.
  bool predict_constrained = false;
};

struct ScopeInput {
  const FeatureMatrix* X = nullptr;
  const CorrelationMatrix* R = nullptr;
};

struct FullFitResult {
  TriModelState state;              // posteriors after the last resolve pass
  Eigen::VectorXd unconstrained;    // cross posteriors of the last E-step, before resolving
  std::vector<PairIndex> matches;   // cross pairs whose predicted posterior exceeds 0.5
  FitReport report;
  ResolveStats last_resolve;
  std::vector<AuditEntry> audit;   // projections of the final iteration
};

/// EM over three parameter sets coupled through the transitivity
/// constraints. Predictions come from the unconstrained E-step posteriors of
/// the final parameters, which were themselves fitted to constrained ones. Same-table inputs may be null; their pairs then read as 0.
/// A same-table scope whose initialization puts every pair in one class is
/// frozen at its initial posteriors (with a warning) instead of failing.
FullFitResult fit_full(const ScopeInput& cross, const ScopeInput& left, const ScopeInput& right,
                       const FullFitConfig& config = {});

}  // namespace zeroer
