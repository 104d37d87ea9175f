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

#include "zeroer/transitivity.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <tuple>

#include "zeroer/error.hpp"

namespace zeroer {

namespace {

struct Incidence {
  std::uint32_t tuple;
  std::uint32_t other;
  std::uint32_t index;
  friend bool operator<(const Incidence& a, const Incidence& b) {
    return std::tie(a.tuple, a.other) < std::tie(b.tuple, b.other);
  }
};

// Emits one triple per unordered pair of incidences sharing `tuple`.
template <typename Lookup>
void emit_star(const std::vector<Incidence>& sorted, Scope premise_scope, Scope conclusion_scope,
               const Lookup& lookup, const TriModelState& state,
               std::vector<ConstraintTriple>& out) {
  std::size_t begin = 0;
  while (begin < sorted.size()) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].tuple == sorted[begin].tuple) ++end;
    for (std::size_t a = begin; a < end; ++a) {
      for (std::size_t b = a + 1; b < end; ++b) {
        ConstraintTriple t;
        t.ij = {premise_scope, sorted[a].index};
        t.ik = {premise_scope, sorted[b].index};
        auto found = lookup(sorted[a].other, sorted[b].other);
        t.jk = {conclusion_scope, found ? *found : kAbsentPair};
        t.gamma_ij = state.gamma(t.ij);
        t.gamma_ik = state.gamma(t.ik);
        t.gamma_jk = state.gamma(t.jk);
        out.push_back(t);
      }
    }
    begin = end;
  }
}

Direction direction_of(Axis axis) {
  switch (axis) {
    case Axis::raise_conclusion: return Direction::up;
    case Axis::lower_first:
    case Axis::lower_second: return Direction::down;
    case Axis::none: return Direction::none;
  }
  return Direction::none;
}

std::size_t slot_of(Axis axis) {
  switch (axis) {
    case Axis::lower_first: return 0;
    case Axis::lower_second: return 1;
    default: return 2;
  }
}

// Log joints that make the current posterior the free-energy optimum; used
// for scopes without a fitted model so moves are priced as a KL divergence.
LogJoint reference_log_joint(const ScopeState& s) {
  if (s.log_joint.match.size() == s.gamma.gamma.size()) return s.log_joint;
  LogJoint lj;
  const Eigen::ArrayXd g = s.gamma.gamma.array().max(kPosteriorFloor).min(1.0 - kPosteriorFloor);
  lj.match = g.log().matrix();
  lj.unmatch = (1.0 - g).log().matrix();
  return lj;
}

}  // namespace

void ScopeState::build_index() {
  index_.clear();
  index_.reserve(pairs.size());
  for (std::uint32_t i = 0; i < pairs.size(); ++i) index_.emplace(pair_key(pairs[i]), i);
}

std::optional<std::uint32_t> ScopeState::find(std::uint32_t a, std::uint32_t b) const {
  if (scope != Scope::cross && a > b) std::swap(a, b);
  auto it = index_.find(pair_key({a, b}));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ScopeState& TriModelState::scope(Scope s) {
  switch (s) {
    case Scope::left: return left;
    case Scope::right: return right;
    default: return cross;
  }
}

const ScopeState& TriModelState::scope(Scope s) const {
  switch (s) {
    case Scope::left: return left;
    case Scope::right: return right;
    default: return cross;
  }
}

double TriModelState::gamma(PairRef ref) const {
  if (!ref.present()) return 0.0;
  const auto& g = scope(ref.scope).gamma.gamma;
  return ref.index < g.size() ? g[ref.index] : 0.0;
}

Projection project_constraint(const ProjectionInput& in) {
  struct Candidate {
    Axis axis;
    double value;
    double delta;
  };
  std::vector<Candidate> candidates;
  const std::array<double, 3> old{in.gamma_ij, in.gamma_ik, in.gamma_jk};
  auto delta = [&](std::size_t slot, double value) {
    return free_energy_term(value, in.log_match[slot], in.log_unmatch[slot]) -
           free_energy_term(old[slot], in.log_match[slot], in.log_unmatch[slot]);
  };
  if (in.movable[2]) {
    const double v = in.gamma_ij * in.gamma_ik;
    candidates.push_back({Axis::raise_conclusion, v, delta(2, v)});
  }
  if (in.movable[0] && in.gamma_ik > kPosteriorFloor) {
    const double v = in.gamma_jk / in.gamma_ik;
    candidates.push_back({Axis::lower_first, v, delta(0, v)});
  }
  if (in.movable[1] && in.gamma_ij > kPosteriorFloor) {
    const double v = in.gamma_jk / in.gamma_ij;
    candidates.push_back({Axis::lower_second, v, delta(1, v)});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.delta > b.delta; });

  Projection out;
  out.candidates = candidates.size();
  for (std::size_t r = 0; r < candidates.size(); ++r) out.ranking[r] = candidates[r].axis;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    const auto& c = candidates[r];
    const Direction lock = in.locks[slot_of(c.axis)];
    if (lock != Direction::none && lock != direction_of(c.axis)) {
      if (r == 0) out.conflict = true;
      continue;
    }
    out.axis = c.axis;
    out.value = c.value;
    return out;
  }
  return out;
}

std::vector<ConstraintTriple> enumerate_active_constraints(const TriModelState& state,
                                                           double threshold) {
  std::vector<ConstraintTriple> out;
  const ScopeState& cross = state.cross;
  const auto& g = cross.gamma.gamma;
  if (state.single_table) {
    std::vector<Incidence> inc;
    for (std::uint32_t i = 0; i < cross.pairs.size(); ++i) {
      if (g[i] < threshold) continue;
      inc.push_back({cross.pairs[i].a, cross.pairs[i].b, i});
      inc.push_back({cross.pairs[i].b, cross.pairs[i].a, i});
    }
    std::sort(inc.begin(), inc.end());
    emit_star(inc, Scope::cross, Scope::cross,
              [&](std::uint32_t a, std::uint32_t b) { return cross.find(a, b); }, state, out);
    return out;
  }

  std::vector<Incidence> by_left, by_right;
  for (std::uint32_t i = 0; i < cross.pairs.size(); ++i) {
    if (g[i] < threshold) continue;
    by_left.push_back({cross.pairs[i].a, cross.pairs[i].b, i});
    by_right.push_back({cross.pairs[i].b, cross.pairs[i].a, i});
  }
  std::sort(by_left.begin(), by_left.end());
  std::sort(by_right.begin(), by_right.end());
  // Two right tuples matched to one left tuple imply a right-table match.
  emit_star(by_left, Scope::cross, Scope::right,
            [&](std::uint32_t a, std::uint32_t b) { return state.right.find(a, b); }, state, out);
  emit_star(by_right, Scope::cross, Scope::left,
            [&](std::uint32_t a, std::uint32_t b) { return state.left.find(a, b); }, state, out);
  return out;
}

ResolveStats resolve_transitivity(TriModelState& state, double threshold,
                                  std::vector<AuditEntry>* audit) {
  ResolveStats stats;
  auto triples = enumerate_active_constraints(state, threshold);
  stats.constraints = triples.size();
  std::erase_if(triples, [](const ConstraintTriple& t) { return t.satisfied(); });
  stats.violated = triples.size();
  if (triples.empty()) return stats;

  std::stable_sort(triples.begin(), triples.end(), [](const auto& a, const auto& b) {
    const double pa = a.gamma_ij * a.gamma_ik;
    const double pb = b.gamma_ij * b.gamma_ik;
    if (pa != pb) return pa > pb;
    return std::make_tuple(a.jk.key(), a.ij.key(), a.ik.key()) <
           std::make_tuple(b.jk.key(), b.ij.key(), b.ik.key());
  });

  const std::array<LogJoint, 3> reference{reference_log_joint(state.cross),
                                          reference_log_joint(state.left),
                                          reference_log_joint(state.right)};
  auto ref_of = [&](PairRef r) -> const LogJoint& { return reference[static_cast<int>(r.scope)]; };

  std::unordered_map<std::uint64_t, Direction> locks;
  auto lock_of = [&](PairRef r) {
    auto it = locks.find(r.key());
    return it == locks.end() ? Direction::none : it->second;
  };

  for (auto& t : triples) {
    t.gamma_ij = state.gamma(t.ij);
    t.gamma_ik = state.gamma(t.ik);
    t.gamma_jk = state.gamma(t.jk);
    if (t.satisfied()) continue;

    ProjectionInput in;
    in.gamma_ij = t.gamma_ij;
    in.gamma_ik = t.gamma_ik;
    in.gamma_jk = t.gamma_jk;
    const std::array<PairRef, 3> refs{t.ij, t.ik, t.jk};
    for (std::size_t s = 0; s < 3; ++s) {
      in.movable[s] = refs[s].present();
      in.locks[s] = in.movable[s] ? lock_of(refs[s]) : Direction::none;
      if (in.movable[s]) {
        in.log_match[s] = ref_of(refs[s]).match[refs[s].index];
        in.log_unmatch[s] = ref_of(refs[s]).unmatch[refs[s].index];
      }
    }
    const Projection p = project_constraint(in);
    if (p.axis == Axis::none) {
      ++stats.skipped;
      continue;
    }
    const std::size_t slot = slot_of(p.axis);
    const PairRef moved = refs[slot];
    const double before = state.gamma(moved);
    state.scope(moved.scope).gamma.gamma[moved.index] = p.value;
    locks[moved.key()] = direction_of(p.axis);
    ++stats.projected;
    if (audit) audit->push_back({t, p.axis, before, p.value});
  }
  return stats;
}

FullFitResult fit_full(const ScopeInput& cross, const ScopeInput& left, const ScopeInput& right,
                       const FullFitConfig& config) {
  config.fit.validate();
  if (!cross.X || !cross.R) throw ParseError("fit_full needs the cross-scope features");
  FullFitResult result;
  TriModelState& state = result.state;
  FitReport& report = result.report;
  state.single_table = config.single_table;

  struct Slot {
    ScopeState* state;
    const ScopeInput* input;
    std::deque<Eigen::VectorXd> window;
    std::deque<Eigen::VectorXd> raw_window;
  };
  std::vector<Slot> slots;

  auto setup = [&](ScopeState& s, const ScopeInput& in, Scope scope) {
    s.scope = scope;
    if (!in.X) return;
    s.pairs = in.X->pairs;
    s.build_index();
    try {
      s.gamma = init_posteriors(*in.X, config.fit.epsilon);
      s.fitted = true;
      slots.push_back({&s, &in, {}, {}});
    } catch (const DegenerateInitError& e) {
      if (scope == Scope::cross) throw;
      s.gamma = {scope, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(in.X->rows()),
                                                  kPosteriorFloor)};
      s.fitted = false;
      report.warnings.push_back(std::string(to_string(scope)) +
                                " scope frozen at initialization: " + e.what());
    }
  };
  setup(state.cross, cross, Scope::cross);
  if (!config.single_table) {
    setup(state.left, left, Scope::left);
    setup(state.right, right, Scope::right);
  }

  double previous = 0.0;
  for (int t = 1; t <= config.fit.max_iter; ++t) {
    for (auto it = slots.begin(); it != slots.end();) {
      ScopeState& s = *it->state;
      const auto& values = it->input->X->values;
      try {
        s.theta = m_step(values, s.gamma.gamma, *it->input->R, config.fit, &report.warnings);
      } catch (const DegenerateInitError& e) {
        // A same-table model that loses a class has no match structure to
        // offer; freeze it the same way as a one-sided initialization.
        if (s.scope == Scope::cross) throw;
        s.gamma.gamma.setConstant(kPosteriorFloor);
        s.log_joint = {};
        s.fitted = false;
        report.warnings.push_back(std::string(to_string(s.scope)) + " scope frozen at iteration " +
                                  std::to_string(t) + ": " + e.what());
        it = slots.erase(it);
        continue;
      }
      auto& slot = *it++;
      s.log_joint = log_joint(values, s.theta);
      s.gamma.gamma = posterior_from_log_joint(s.log_joint);
      slot.raw_window.push_back(s.gamma.gamma);
      if (static_cast<int>(slot.raw_window.size()) > config.fit.average_window) {
        slot.raw_window.pop_front();
      }
    }
    result.audit.clear();
    if (config.transitivity) {
      result.last_resolve =
          resolve_transitivity(state, config.threshold, config.audit ? &result.audit : nullptr);
    }
    double f = 0.0;
    double f_reg = 0.0;
    for (auto& slot : slots) {
      const ScopeState& s = *slot.state;
      f += free_energy(s.log_joint, s.gamma.gamma);
      f_reg += regularized_objective(s.log_joint, s.gamma.gamma, s.theta);
      slot.window.push_back(s.gamma.gamma);
      if (static_cast<int>(slot.window.size()) > config.fit.average_window) slot.window.pop_front();
    }
    report.free_energy.push_back(f);
    report.regularized_objective.push_back(f_reg);
    report.iterations = t;
    if (t > 1 && std::abs(f - previous) < config.fit.tol) {
      report.converged = true;
      report.terminal_rule = TerminalRule::likelihood_delta;
      break;
    }
    previous = f;
  }
  auto average = [](const std::deque<Eigen::VectorXd>& w) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(w.back().size());
    for (const auto& g : w) mean += g;
    return Eigen::VectorXd(mean / static_cast<double>(w.size()));
  };
  result.unconstrained = slots.front().raw_window.back();
  if (!report.converged) {
    report.terminal_rule = TerminalRule::max_iterations;
    for (auto& slot : slots) slot.state->gamma.gamma = average(slot.window);
    result.unconstrained = average(slots.front().raw_window);
  }
  std::sort(report.warnings.begin(), report.warnings.end());
  report.warnings.erase(std::unique(report.warnings.begin(), report.warnings.end()),
                        report.warnings.end());

  const Eigen::VectorXd& g = config.predict_constrained ? state.cross.gamma.gamma : result.unconstrained;
  for (std::size_t i = 0; i < state.cross.pairs.size(); ++i) {
    if (g[static_cast<Eigen::Index>(i)] > 0.5) result.matches.push_back(state.cross.pairs[i]);
  }
  return result;
}

}  // namespace zeroer
