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

#include "zeroer/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "json.hpp"

#include "zeroer/error.hpp"

namespace zeroer {

namespace {

void sort_unique(std::vector<PairIndex>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

GoldLabels read_gold(std::istream& in, const Table& left, const Table& right, Scope scope) {
  const Table& ta = first_table(scope, left, right);
  const Table& tb = second_table(scope, left, right);
  GoldLabels gold{scope, {}};
  const auto rows = read_delimited(in, ',');
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [fields, line] = rows[r];
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() < 2) throw ParseError("gold line " + std::to_string(line) + " is short");
    auto a = ta.find(fields[0]);
    auto b = tb.find(fields[1]);
    if (!a || !b) {
      a = ta.find(fields[1]);
      b = tb.find(fields[0]);
    }
    if (!a || !b) {
      throw ParseError("gold line " + std::to_string(line) + ": unresolvable pair ('" + fields[0] +
                       "', '" + fields[1] + "')");
    }
    PairIndex p{static_cast<std::uint32_t>(*a), static_cast<std::uint32_t>(*b)};
    if (scope != Scope::cross) {
      if (p.a == p.b) continue;
      if (p.a > p.b) std::swap(p.a, p.b);
    }
    gold.pairs.push_back(p);
  }
  sort_unique(gold.pairs);
  return gold;
}

GoldLabels load_gold(const std::string& path, const Table& left, const Table& right, Scope scope) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open gold file " + path);
  return read_gold(in, left, right, scope);
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport evaluate(std::vector<PairIndex> predicted, const GoldLabels& gold,
                    const std::vector<PairIndex>* candidates) {
  sort_unique(predicted);
  EvalReport report;
  std::vector<PairIndex> hit;
  std::set_intersection(predicted.begin(), predicted.end(), gold.pairs.begin(), gold.pairs.end(),
                        std::back_inserter(hit));
  report.tp = hit.size();
  report.fp = predicted.size() - hit.size();
  report.fn = gold.pairs.size() - hit.size();
  report.precision = predicted.empty() ? 0.0 : double(report.tp) / double(predicted.size());
  report.recall = gold.pairs.empty() ? 0.0 : double(report.tp) / double(gold.pairs.size());
  report.f1 = f1_score(report.precision, report.recall);
  if (candidates && !gold.pairs.empty()) {
    std::vector<PairIndex> kept = *candidates;
    sort_unique(kept);
    std::vector<PairIndex> covered;
    std::set_intersection(kept.begin(), kept.end(), gold.pairs.begin(), gold.pairs.end(),
                          std::back_inserter(covered));
    report.blocking_recall = double(covered.size()) / double(gold.pairs.size());
  }
  return report;
}

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::uniform_reg: return "uniform-reg";
    case AblationVariant::diag_shared_cov: return "diag-shared-cov";
    case AblationVariant::postprocess_transitivity: return "postprocess-transitivity";
    case AblationVariant::no_transitivity: return "no-transitivity";
  }
  return "full";
}

AblationVariant ablation_variant_from_string(std::string_view name) {
  for (auto v : all_ablation_variants()) {
    if (to_string(v) == name) return v;
  }
  throw ParseError("unknown ablation variant '" + std::string(name) + "'");
}

std::vector<AblationVariant> all_ablation_variants() {
  return {AblationVariant::full, AblationVariant::uniform_reg, AblationVariant::diag_shared_cov,
          AblationVariant::postprocess_transitivity, AblationVariant::no_transitivity};
}

std::vector<PairIndex> postprocess_transitivity(const std::vector<PairIndex>& pairs,
                                                const Eigen::VectorXd& gamma) {
  if (static_cast<std::size_t>(gamma.size()) != pairs.size()) {
    throw Error("postprocess_transitivity: posterior and pair counts differ");
  }
  // Best predicted pair per tuple on each side; (gamma, -index) ordering.
  std::map<std::uint32_t, std::size_t> best_a, best_b;
  auto better = [&](std::size_t i, std::size_t j) {
    return gamma[Eigen::Index(i)] > gamma[Eigen::Index(j)] ||
           (gamma[Eigen::Index(i)] == gamma[Eigen::Index(j)] && i < j);
  };
  auto offer = [&](std::map<std::uint32_t, std::size_t>& best, std::uint32_t tuple, std::size_t i) {
    auto [it, inserted] = best.emplace(tuple, i);
    if (!inserted && better(i, it->second)) it->second = i;
  };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (gamma[Eigen::Index(i)] <= 0.5) continue;
    offer(best_a, pairs[i].a, i);
    offer(best_b, pairs[i].b, i);
  }
  std::vector<PairIndex> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (gamma[Eigen::Index(i)] <= 0.5) continue;
    if (best_a.at(pairs[i].a) == i && best_b.at(pairs[i].b) == i) out.push_back(pairs[i]);
  }
  return out;
}

void write_report_json(std::ostream& out, const std::vector<EvalReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"variant", r.variant},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"f1", r.f1},
                   {"tp", r.tp},
                   {"fp", r.fp},
                   {"fn", r.fn},
                   {"blocking_recall", r.blocking_recall},
                   {"config_digest", r.config_digest},
                   {"wall_seconds", r.wall_seconds}});
  }
  out << arr.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "variant,precision,recall,f1,tp,fp,fn,blocking_recall,config_digest,wall_seconds\n";
  out << std::setprecision(6);
  for (const auto& r : reports) {
    out << r.variant << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ',' << r.tp << ','
        << r.fp << ',' << r.fn << ',' << r.blocking_recall << ',' << r.config_digest << ','
        << r.wall_seconds << '\n';
  }
}

}  // namespace zeroer
