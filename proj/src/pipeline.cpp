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

#include "zeroer/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "json.hpp"
#include "zeroer/error.hpp"

namespace zeroer {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::string schema_fingerprint(const FeatureSchema& schema) {
  std::ostringstream os;
  for (const auto& a : schema.attributes.pairs) {
    os << a.left << '=' << a.right << ':' << to_string(a.type) << ';';
  }
  for (const auto& name : schema.feature_names()) os << name << ';';
  return os.str();
}

std::string pairs_fingerprint(const CandidateSet& set) {
  std::uint64_t h = fnv1a(to_string(set.scope));
  for (const auto& p : set.pairs) {
    const std::uint64_t k = pair_key(p);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&k), sizeof k), h);
  }
  return hex(h);
}

FitConfig fit_config_for(const RunConfig& cfg, const FeatureMatrix& cross) {
  FitConfig fit;
  fit.epsilon = cfg.epsilon;
  fit.kappa_prime = cfg.kappa_prime;
  fit.tol = cfg.tol;
  fit.max_iter = cfg.max_iter;
  fit.scale_estimator = cfg.scale_estimator;
  switch (cfg.variant) {
    case AblationVariant::uniform_reg:
      fit.regularization = RegularizationMode::uniform;
      fit.uniform_kappa = 1e-6 * mean_feature_variance(cross.values);
      break;
    case AblationVariant::diag_shared_cov:
      fit.covariance = CovarianceMode::diagonal_shared;
      break;
    default: break;
  }
  return fit;
}

std::vector<PairIndex> above_half(const std::vector<PairIndex>& pairs, const Eigen::VectorXd& gamma) {
  std::vector<PairIndex> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (gamma[Eigen::Index(i)] > 0.5) out.push_back(pairs[i]);
  }
  return out;
}

FeatureMatrix subset_rows(const FeatureMatrix& X, const std::vector<std::size_t>& rows) {
  FeatureMatrix out;
  out.scope = X.scope;
  out.group_sizes = X.group_sizes;
  out.feature_names = X.feature_names;
  out.scaler = X.scaler;
  out.values.resize(Eigen::Index(rows.size()), X.values.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.values.row(Eigen::Index(r)) = X.values.row(Eigen::Index(rows[r]));
    out.pairs.push_back(X.pairs[rows[r]]);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (left_path.empty()) throw ParseError("a left table is required");
  if (out_dir.empty()) throw ParseError("an output directory is required");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParseError("epsilon must lie in (0, 1)");
  if (!(kappa_prime >= 0.0 && kappa_prime < 1.0)) throw ParseError("kappa' must lie in [0, 1)");
  if (!(tol > 0.0)) throw ParseError("tolerance must be positive");
  if (max_iter < 1) throw ParseError("max_iter must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ParseError("train fraction must lie in (0, 1]");
  }
  if (blocking && (block.bands == 0 || block.rows == 0 || block.qgram == 0)) {
    throw ParseError("blocking needs positive bands, rows and q");
  }
}

std::string RunConfig::digest() const {
  std::ostringstream os;
  os.precision(17);
  os << left_path << '|' << right_path << '|' << left_id << '|' << right_id << '|' << delimiter
     << '|' << gold_path << '|';
  for (const auto& a : align) os << a << ';';
  os << '|';
  for (const auto& f : features) os << f << ';';
  os << '|' << blocking << '|' << block.digest() << '|' << within_tables << '|' << epsilon << '|'
     << kappa_prime << '|' << tol << '|' << max_iter << '|' << transitivity << '|'
     << to_string(variant) << '|' << int(scale_estimator) << '|' << train_fraction << '|' << seed;
  return hex(fnv1a(os.str()));
}

std::vector<std::pair<std::string, std::string>> parse_alignment_hints(
    const std::vector<std::string>& hints) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& h : hints) {
    const auto eq = h.find('=');
    if (eq == std::string::npos) throw ParseError("alignment hint '" + h + "' is not left=right");
    out.emplace_back(trim(h.substr(0, eq)), trim(h.substr(eq + 1)));
  }
  return out;
}

FeatureSchema apply_feature_overrides(FeatureSchema schema, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ParseError("feature override '" + o + "' is not attr=fn,...");
    const std::string attr = trim(o.substr(0, eq));
    std::size_t a = 0;
    while (a < schema.attributes.pairs.size() && schema.attributes.pairs[a].left != attr) ++a;
    if (a == schema.attributes.pairs.size()) {
      throw ParseError("feature override names unaligned attribute '" + attr + "'");
    }
    std::vector<FeatureDescriptor> group;
    std::stringstream fns(o.substr(eq + 1));
    for (std::string fn; std::getline(fns, fn, ',');) {
      fn = trim(fn);
      if (fn.empty()) continue;
      const auto f = similarity_function_from_string(fn);
      group.push_back({a, f, attr + ":" + std::string(to_string(f))});
    }
    schema.groups[a] = std::move(group);
  }
  // An attribute whose bank was emptied contributes no group.
  std::erase_if(schema.groups, [](const auto& g) { return g.empty(); });
  if (schema.dimension() == 0) throw ParseError("feature overrides leave no features");
  return schema;
}

void write_matches(std::ostream& out, const std::vector<PairIndex>& pairs, const Eigen::VectorXd& gamma,
                   const std::vector<PairIndex>& keep, const std::vector<PairIndex>& predicted,
                   const Table& left, const Table& right, Scope scope) {
  const Table& ta = first_table(scope, left, right);
  const Table& tb = second_table(scope, left, right);
  std::vector<PairIndex> sorted_keep = keep;
  std::sort(sorted_keep.begin(), sorted_keep.end());
  std::vector<PairIndex> sorted_pred = predicted;
  std::sort(sorted_pred.begin(), sorted_pred.end());
  out << "left_id,right_id,gamma,label\n";
  char buf[32];
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!std::binary_search(sorted_keep.begin(), sorted_keep.end(), pairs[i])) continue;
    std::snprintf(buf, sizeof buf, "%.17g", gamma[Eigen::Index(i)]);
    const bool match = std::binary_search(sorted_pred.begin(), sorted_pred.end(), pairs[i]);
    out << ta.id(pairs[i].a) << ',' << tb.id(pairs[i].b) << ',' << buf << ',' << (match ? 'M' : 'U')
        << '\n';
  }
}

void write_fit_report(std::ostream& out, const FitReport& report) {
  nlohmann::json j{{"iterations", report.iterations},
                   {"converged", report.converged},
                   {"terminal_rule", report.terminal_rule == TerminalRule::likelihood_delta
                                         ? "likelihood-delta"
                                         : "max-iterations"},
                   {"free_energy", report.free_energy},
                   {"regularized_objective", report.regularized_objective},
                   {"warnings", report.warnings}};
  out << j.dump(2) << '\n';
}

RunResult run(const RunConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const fs::path out_dir(cfg.out_dir);
  const fs::path cache_dir(cfg.cache_dir.empty() ? cfg.out_dir : cfg.cache_dir);
  fs::create_directories(out_dir);
  fs::create_directories(cache_dir);
  nlohmann::json manifest{{"layout", kOutputLayout}, {"config_digest", cfg.digest()}};
  std::vector<std::string> artifacts;

  // Ingest.
  const bool single = cfg.right_path.empty();
  const Table left = load_table(cfg.left_path, cfg.left_id, cfg.delimiter);
  const Table right = single ? left : load_table(cfg.right_path, cfg.right_id, cfg.delimiter);
  const std::string input_hash =
      hex(fnv1a(read_file(cfg.right_path.empty() ? cfg.left_path : cfg.right_path),
                fnv1a(read_file(cfg.left_path))));
  const AlignedSchema aligned = align_schemas(left, right, parse_alignment_hints(cfg.align));
  const FeatureSchema schema = apply_feature_overrides(build_feature_schema(aligned), cfg.features);
  {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : aligned.pairs) {
      j.push_back({{"left", a.left}, {"right", a.right}, {"type", std::string(to_string(a.type))}});
    }
    auto out = open_out(out_dir / "schema.json");
    out << nlohmann::json{{"attributes", j}, {"features", schema.feature_names()}}.dump(2) << '\n';
    artifacts.push_back("schema.json");
  }

  // Blocking.
  BlockingConfig block = cfg.block;
  if (block.attribute.empty()) block.attribute = aligned.pairs.front().left;
  block.seed = cfg.seed;
  auto candidates = [&](Scope s) {
    return cfg.blocking ? block_candidates(left, right, aligned, s, block) : cross_join(left, right, s);
  };
  const Scope cross_scope = single ? Scope::left : Scope::cross;
  std::vector<std::pair<std::string, CandidateSet>> sets;
  sets.emplace_back("cross", candidates(cross_scope));
  const bool fit_within = !single && cfg.within_tables && cfg.transitivity &&
                          cfg.variant != AblationVariant::no_transitivity &&
                          cfg.variant != AblationVariant::postprocess_transitivity &&
                          cfg.train_fraction >= 1.0;
  if (fit_within) {
    sets.emplace_back("left", candidates(Scope::left));
    sets.emplace_back("right", candidates(Scope::right));
  }
  for (const auto& [name, set] : sets) {
    auto out = open_out(out_dir / ("pairs_" + name + ".csv"));
    write_pairs(out, set, left, right);
    artifacts.push_back("pairs_" + name + ".csv");
  }

  // Featurization, cached by a digest of inputs, schema and candidates.
  RunResult result;
  std::vector<FeatureMatrix> matrices;
  bool all_cached = true;
  for (const auto& [name, set] : sets) {
    const std::string digest =
        hex(fnv1a(schema_fingerprint(schema) + pairs_fingerprint(set), fnv1a(input_hash)));
    const fs::path path = cache_dir / ("features_" + name + ".bin");
    FeatureMatrix X;
    bool hit = false;
    if (cfg.cache && fs::exists(path) && fs::exists(path.string() + ".json")) {
      std::string stored;
      try {
        X = load_feature_matrix(path.string(), &stored);
        hit = stored == digest;
      } catch (const Error&) {
        hit = false;
      }
    }
    if (!hit) {
      X = featurize(set, left, right, schema);
      save_feature_matrix(path.string(), X, digest);
    }
    all_cached = all_cached && hit;
    matrices.push_back(std::move(X));
  }
  result.features_from_cache = all_cached;
  FeatureMatrix& cross = matrices[0];
  if (single) cross.scope = Scope::cross;
  if (cross.rows() == 0) throw DegenerateInitError("blocking left no candidate pairs");
  result.pairs = cross.pairs;

  FitConfig fit = fit_config_for(cfg, cross);
  const bool use_transitivity = cfg.transitivity && cfg.train_fraction >= 1.0 &&
                                cfg.variant != AblationVariant::no_transitivity &&
                                cfg.variant != AblationVariant::postprocess_transitivity;
  std::vector<std::size_t> held_out;
  FullFitResult full;
  if (cfg.train_fraction < 1.0) {
    std::mt19937_64 rng(cfg.seed);
    std::bernoulli_distribution take(cfg.train_fraction);
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < cross.rows(); ++i) (take(rng) ? train : held_out).push_back(i);
    const FeatureMatrix sample = subset_rows(cross, train);
    const CorrelationMatrix R = estimate_shared_correlation(sample);
    FitResult r = fit_no_transitivity(sample, R, fit);
    result.gamma = posterior_from_log_joint(log_joint(cross.values, r.params));
    result.fit = r.report;
    full.state.cross.theta = r.params;
  } else if (use_transitivity) {
    std::vector<CorrelationMatrix> Rs;
    for (const auto& X : matrices) Rs.push_back(X.rows() > 1 ? estimate_shared_correlation(X)
                                                             : CorrelationMatrix::identity(X.group_sizes));
    FullFitConfig ff;
    ff.fit = fit;
    ff.single_table = single;
    ff.audit = cfg.audit;
    ScopeInput in_cross{&matrices[0], &Rs[0]};
    ScopeInput in_left, in_right;
    if (fit_within) {
      if (matrices[1].rows() > 1) in_left = {&matrices[1], &Rs[1]};
      if (matrices[2].rows() > 1) in_right = {&matrices[2], &Rs[2]};
    }
    full = fit_full(in_cross, in_left, in_right, ff);
    result.gamma = full.unconstrained;
    result.fit = full.report;
  } else {
    const CorrelationMatrix R = estimate_shared_correlation(cross);
    FitResult r = fit_no_transitivity(cross, R, fit);
    result.gamma = r.posterior.gamma;
    result.fit = r.report;
    full.state.cross.theta = r.params;
  }

  if (cfg.variant == AblationVariant::postprocess_transitivity) {
    result.matches = postprocess_transitivity(cross.pairs, result.gamma);
  } else if (!held_out.empty()) {
    std::vector<PairIndex> rest;
    Eigen::VectorXd g(Eigen::Index(held_out.size()));
    for (std::size_t k = 0; k < held_out.size(); ++k) {
      rest.push_back(cross.pairs[held_out[k]]);
      g[Eigen::Index(k)] = result.gamma[Eigen::Index(held_out[k])];
    }
    result.matches = above_half(rest, g);
  } else {
    result.matches = above_half(cross.pairs, result.gamma);
  }

  // Persist the fit.
  const std::array<std::pair<const char*, const ScopeState*>, 3> scopes{
      {{"cross", &full.state.cross}, {"left", &full.state.left}, {"right", &full.state.right}}};
  for (const auto& [name, s] : scopes) {
    if (s->theta.mu_M.size() == 0) continue;
    save_checkpoint((out_dir / ("model_" + std::string(name) + ".json")).string(), s->theta,
                    cross.feature_names);
    artifacts.push_back("model_" + std::string(name) + ".json");
  }
  const Scope id_scope = single ? Scope::left : Scope::cross;
  {
    auto out = open_out(out_dir / "posteriors_cross.csv");
    write_matches(out, cross.pairs, result.gamma, cross.pairs, result.matches, left, right, id_scope);
    artifacts.push_back("posteriors_cross.csv");
  }
  for (const auto* s : {&full.state.left, &full.state.right}) {
    if (s->pairs.empty() || s->gamma.gamma.size() == 0) continue;
    const std::string name = "posteriors_" + std::string(to_string(s->scope)) + ".csv";
    auto out = open_out(out_dir / name);
    write_matches(out, s->pairs, s->gamma.gamma, s->pairs, above_half(s->pairs, s->gamma.gamma),
                  left, right, s->scope);
    artifacts.push_back(name);
  }
  {
    auto out = open_out(out_dir / "matches.csv");
    write_matches(out, cross.pairs, result.gamma, result.matches, result.matches, left, right,
                  id_scope);
    artifacts.push_back("matches.csv");
  }
  {
    auto out = open_out(out_dir / "fit_report.json");
    write_fit_report(out, result.fit);
    artifacts.push_back("fit_report.json");
  }
  if (cfg.audit && use_transitivity) {
    auto out = open_out(out_dir / "constraints.csv");
    out << "premise_1,premise_2,conclusion,gamma_1,gamma_2,gamma_3,axis,before,after\n";
    auto ref = [](PairRef r) {
      return std::string(to_string(r.scope)) + ":" + (r.present() ? std::to_string(r.index) : "absent");
    };
    static constexpr const char* kAxis[] = {"none", "raise-conclusion", "lower-first", "lower-second"};
    for (const auto& a : full.audit) {
      out << ref(a.triple.ij) << ',' << ref(a.triple.ik) << ',' << ref(a.triple.jk) << ','
          << a.triple.gamma_ij << ',' << a.triple.gamma_ik << ',' << a.triple.gamma_jk << ','
          << kAxis[int(a.axis)] << ',' << a.before << ',' << a.after << '\n';
    }
    artifacts.push_back("constraints.csv");
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!cfg.gold_path.empty()) {
    GoldLabels gold = load_gold(cfg.gold_path, left, right, single ? Scope::left : Scope::cross);
    std::vector<PairIndex> scored_candidates = cross.pairs;
    if (!held_out.empty()) {
      // Only held-out pairs are scored; drop gold pairs used for training.
      std::vector<PairIndex> rest;
      for (auto k : held_out) rest.push_back(cross.pairs[k]);
      std::sort(rest.begin(), rest.end());
      std::vector<PairIndex> trained;
      std::vector<PairIndex> all = cross.pairs;
      std::sort(all.begin(), all.end());
      std::set_difference(all.begin(), all.end(), rest.begin(), rest.end(), std::back_inserter(trained));
      std::vector<PairIndex> kept;
      std::set_difference(gold.pairs.begin(), gold.pairs.end(), trained.begin(), trained.end(),
                          std::back_inserter(kept));
      gold.pairs = std::move(kept);
      scored_candidates = std::move(rest);
    }
    EvalReport report = evaluate(result.matches, gold, &scored_candidates);
    report.variant = std::string(to_string(cfg.variant));
    report.config_digest = cfg.digest();
    report.wall_seconds = seconds;
    {
      auto out = open_out(out_dir / "eval.json");
      write_report_json(out, {report});
    }
    {
      auto out = open_out(out_dir / "eval.csv");
      write_report_csv(out, {report});
    }
    artifacts.push_back("eval.json");
    artifacts.push_back("eval.csv");
    result.eval = report;
  }

  manifest["artifacts"] = artifacts;
  manifest["candidates"] = cross.rows();
  manifest["matches"] = result.matches.size();
  manifest["features_from_cache"] = result.features_from_cache;
  manifest["wall_seconds"] = seconds;
  auto out = open_out(out_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return result;
}

EvalReport run_ablation(RunConfig config, AblationVariant variant) {
  if (config.gold_path.empty()) throw ParseError("ablation needs a gold file");
  const fs::path base(config.out_dir);
  if (config.cache_dir.empty()) config.cache_dir = (base / "cache").string();
  config.out_dir = (base / std::string(to_string(variant))).string();
  config.variant = variant;
  return *run(config).eval;
}

}  // namespace zeroer
