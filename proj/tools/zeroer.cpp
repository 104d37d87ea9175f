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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>

#include "CLI11.hpp"
#include "json.hpp"
#include "zeroer/error.hpp"
#include "zeroer/parallel.hpp"
#include "zeroer/pipeline.hpp"
#include "zeroer/synth.hpp"

namespace fs = std::filesystem;
using namespace zeroer;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kParse = 2, kDegenerate = 3, kNumerical = 4 };

struct TableArgs {
  std::string left, right;
  std::string left_id = "id", right_id = "id";
  std::vector<std::string> align;
};

void add_table_options(CLI::App* cmd, TableArgs& t, bool right_required) {
  cmd->add_option("--left", t.left, "Left table (delimited, with header)")->required();
  auto* r = cmd->add_option("--right", t.right, "Right table; omit to deduplicate the left table");
  if (right_required) r->required();
  cmd->add_option("--left-id", t.left_id, "Id column of the left table")->capture_default_str();
  cmd->add_option("--right-id", t.right_id, "Id column of the right table")->capture_default_str();
  cmd->add_option("--align", t.align, "Extra attribute pair left=right (repeatable)");
}

struct Loaded {
  Table left, right;
  bool single = false;
};

Loaded load(const TableArgs& t) {
  Loaded l;
  l.left = load_table(t.left, t.left_id);
  l.single = t.right.empty();
  l.right = l.single ? l.left : load_table(t.right, t.right_id);
  return l;
}

std::ofstream open_out(const std::string& path) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::vector<PairIndex> pairs_above_half(const FeatureMatrix& X, const Eigen::VectorXd& gamma) {
  std::vector<PairIndex> out;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (gamma[Eigen::Index(i)] > 0.5) out.push_back(X.pairs[i]);
  }
  return out;
}

void add_fit_options(CLI::App* cmd, RunConfig& c, std::string& variant, std::string& scale) {
  cmd->add_option("--epsilon", c.epsilon, "Initialization threshold on the row mean")
      ->capture_default_str();
  cmd->add_option("--kappa", c.kappa_prime, "Per-feature overlap increase for regularization")
      ->capture_default_str();
  cmd->add_option("--tol", c.tol, "Convergence threshold on the free-energy change")
      ->capture_default_str();
  cmd->add_option("--max-iter", c.max_iter, "Iteration cap")->capture_default_str();
  cmd->add_option("--transitivity", c.transitivity, "Resolve transitivity during EM")
      ->capture_default_str();
  cmd->add_option("--variant", variant,
                  "full | uniform-reg | diag-shared-cov | postprocess-transitivity | no-transitivity")
      ->capture_default_str();
  cmd->add_option("--scale-estimator", scale, "moment | profile-likelihood")->capture_default_str();
}

ScaleEstimator scale_from(const std::string& s) {
  if (s == "moment") return ScaleEstimator::moment;
  if (s == "profile-likelihood") return ScaleEstimator::profile_likelihood;
  throw ParseError("unknown scale estimator '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ZeroER: unsupervised entity resolution"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; flags override it");
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = all cores)")->capture_default_str();

  // ingest
  TableArgs ingest_t;
  std::string ingest_out = "ingest";
  auto* ingest = app.add_subcommand("ingest", "Load, normalize and align two tables");
  add_table_options(ingest, ingest_t, false);
  ingest->add_option("--out", ingest_out, "Output directory")->capture_default_str();

  // block
  TableArgs block_t;
  BlockingConfig block_cfg;
  std::string block_scope = "cross", block_out = "pairs.csv";
  bool block_off = false;
  auto* block = app.add_subcommand("block", "Generate candidate pairs with MinHash LSH");
  add_table_options(block, block_t, false);
  block->add_option("--attribute", block_cfg.attribute, "Blocking attribute (left name)");
  block->add_option("--qgram", block_cfg.qgram, "Shingle length")->capture_default_str();
  block->add_option("--bands", block_cfg.bands, "LSH bands")->capture_default_str();
  block->add_option("--rows", block_cfg.rows, "Minhashes per band")->capture_default_str();
  block->add_option("--seed", block_cfg.seed, "Hash seed")->capture_default_str();
  block->add_option("--scope", block_scope, "cross | left | right")->capture_default_str();
  block->add_flag("--no-blocking", block_off, "Emit the full cross product");
  block->add_option("--out", block_out, "Pair file")->capture_default_str();

  // featurize
  TableArgs feat_t;
  std::vector<std::string> feat_overrides;
  std::string feat_pairs, feat_scope = "cross", feat_out = "features.bin";
  auto* featurize_cmd = app.add_subcommand("featurize", "Compute scaled similarity vectors");
  add_table_options(featurize_cmd, feat_t, false);
  featurize_cmd->add_option("--pairs", feat_pairs, "Pair file from `block`")->required();
  featurize_cmd->add_option("--scope", feat_scope, "cross | left | right")->capture_default_str();
  featurize_cmd->add_option("--features", feat_overrides, "Bank override attr=fn1,fn2 (repeatable)");
  featurize_cmd->add_option("--out", feat_out, "Feature file (a .json sidecar is written beside it)")
      ->capture_default_str();

  // match
  RunConfig match_cfg;
  std::string match_variant = "full", match_scale = "moment";
  std::string match_cross, match_left_f, match_right_f, match_out = "match";
  TableArgs match_t;
  auto* match = app.add_subcommand("match", "Fit the model on feature files and predict matches");
  match->add_option("--features", match_cross, "Cross-table feature file")->required();
  match->add_option("--left-features", match_left_f, "Left same-table feature file");
  match->add_option("--right-features", match_right_f, "Right same-table feature file");
  match->add_option("--left", match_t.left, "Left table, for ids in the output")->required();
  match->add_option("--right", match_t.right, "Right table; omit for deduplication");
  match->add_option("--left-id", match_t.left_id, "Id column of the left table")->capture_default_str();
  match->add_option("--right-id", match_t.right_id, "Id column of the right table")->capture_default_str();
  match->add_option("--out", match_out, "Output directory")->capture_default_str();
  add_fit_options(match, match_cfg, match_variant, match_scale);

  // eval
  TableArgs eval_t;
  std::string eval_pred, eval_gold, eval_pairs, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score a match list against gold pairs");
  add_table_options(eval_cmd, eval_t, false);
  eval_cmd->add_option("--pred", eval_pred, "Match list (left_id,right_id[,gamma])")->required();
  eval_cmd->add_option("--gold", eval_gold, "Gold pairs (left_id,right_id)")->required();
  eval_cmd->add_option("--pairs", eval_pairs, "Candidate pairs, for blocking recall");
  eval_cmd->add_option("--out", eval_out, "Directory for eval.json and eval.csv");

  // synth
  std::string synth_spec, synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature dataset");
  synth->add_option("--spec", synth_spec, "JSON generator spec (missing keys take defaults)");
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();

  // run
  RunConfig run_cfg;
  std::string run_variant = "full", run_scale = "moment";
  bool run_no_blocking = false, run_no_within = false, run_no_cache = false, run_ablate = false;
  auto* run_cmd = app.add_subcommand("run", "End-to-end: ingest, block, featurize, match, eval");
  run_cmd->add_option("--left", run_cfg.left_path, "Left table")->required();
  run_cmd->add_option("--right", run_cfg.right_path, "Right table; omit to deduplicate the left table");
  run_cmd->add_option("--left-id", run_cfg.left_id, "Id column of the left table")->capture_default_str();
  run_cmd->add_option("--right-id", run_cfg.right_id, "Id column of the right table")->capture_default_str();
  run_cmd->add_option("--gold", run_cfg.gold_path, "Gold pairs; enables evaluation");
  run_cmd->add_option("--out", run_cfg.out_dir, "Output directory")->capture_default_str();
  run_cmd->add_option("--cache-dir", run_cfg.cache_dir, "Feature cache directory (default: --out)");
  run_cmd->add_option("--align", run_cfg.align, "Extra attribute pair left=right (repeatable)");
  run_cmd->add_option("--features", run_cfg.features, "Bank override attr=fn1,fn2 (repeatable)");
  run_cmd->add_flag("--no-blocking", run_no_blocking, "Use the full cross product");
  run_cmd->add_option("--block-attribute", run_cfg.block.attribute,
                      "Blocking attribute (default: first aligned)");
  run_cmd->add_option("--qgram", run_cfg.block.qgram, "Blocking shingle length")->capture_default_str();
  run_cmd->add_option("--bands", run_cfg.block.bands, "LSH bands")->capture_default_str();
  run_cmd->add_option("--rows", run_cfg.block.rows, "Minhashes per band")->capture_default_str();
  run_cmd->add_flag("--no-within", run_no_within, "Skip the same-table models");
  run_cmd->add_option("--train-fraction", run_cfg.train_fraction,
                      "Fit on this share of cross pairs and score the rest")
      ->capture_default_str();
  run_cmd->add_option("--seed", run_cfg.seed, "Seed for hashing and sampling")->capture_default_str();
  run_cmd->add_flag("--audit", run_cfg.audit, "Write the last constraint pass to constraints.csv");
  run_cmd->add_flag("--no-cache", run_no_cache, "Recompute features even if cached");
  run_cmd->add_flag("--ablation", run_ablate, "Run every ablation variant (needs --gold)");
  add_fit_options(run_cmd, run_cfg, run_variant, run_scale);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    set_thread_count(threads);

    if (*ingest) {
      const Loaded l = load(ingest_t);
      const AlignedSchema schema = align_schemas(l.left, l.right, parse_alignment_hints(ingest_t.align));
      fs::create_directories(ingest_out);
      {
        auto out = open_out((fs::path(ingest_out) / "left.csv").string());
        write_table(out, l.left);
      }
      if (!l.single) {
        auto out = open_out((fs::path(ingest_out) / "right.csv").string());
        write_table(out, l.right);
      }
      nlohmann::json j = nlohmann::json::array();
      for (const auto& a : schema.pairs) {
        j.push_back({{"left", a.left}, {"right", a.right}, {"type", std::string(to_string(a.type))}});
      }
      auto out = open_out((fs::path(ingest_out) / "schema.json").string());
      out << nlohmann::json{{"attributes", j}}.dump(2) << '\n';
      std::cout << "left " << l.left.size() << " rows, right " << l.right.size() << " rows, "
                << schema.pairs.size() << " aligned attributes\n";
    } else if (*block) {
      const Loaded l = load(block_t);
      const Scope scope = l.single ? Scope::left : scope_from_string(block_scope);
      const AlignedSchema schema = align_schemas(l.left, l.right, parse_alignment_hints(block_t.align));
      if (block_cfg.attribute.empty()) block_cfg.attribute = schema.pairs.front().left;
      const CandidateSet set = block_off ? cross_join(l.left, l.right, scope)
                                         : block_candidates(l.left, l.right, schema, scope, block_cfg);
      auto out = open_out(block_out);
      write_pairs(out, set, l.left, l.right);
      std::cout << set.pairs.size() << " candidate pairs (" << set.provenance << ")\n";
    } else if (*featurize_cmd) {
      const Loaded l = load(feat_t);
      const Scope scope = l.single ? Scope::left : scope_from_string(feat_scope);
      const AlignedSchema schema = align_schemas(l.left, l.right, parse_alignment_hints(feat_t.align));
      const FeatureSchema fs_schema = apply_feature_overrides(build_feature_schema(schema), feat_overrides);
      std::ifstream in(feat_pairs, std::ios::binary);
      if (!in) throw ParseError("cannot open " + feat_pairs);
      const CandidateSet set = read_pairs(in, l.left, l.right, scope);
      const FeatureMatrix X = featurize(set, l.left, l.right, fs_schema);
      save_feature_matrix(feat_out, X);
      std::cout << X.rows() << " x " << X.dimension() << " features\n";
    } else if (*match) {
      match_cfg.variant = ablation_variant_from_string(match_variant);
      match_cfg.scale_estimator = scale_from(match_scale);
      const Loaded l = load(match_t);
      FeatureMatrix cross = load_feature_matrix(match_cross);
      RunConfig c = match_cfg;
      c.left_path = match_t.left;
      c.out_dir = match_out;
      c.validate();
      FitConfig fit;
      fit.epsilon = c.epsilon;
      fit.kappa_prime = c.kappa_prime;
      fit.tol = c.tol;
      fit.max_iter = c.max_iter;
      fit.scale_estimator = c.scale_estimator;
      if (c.variant == AblationVariant::uniform_reg) {
        fit.regularization = RegularizationMode::uniform;
        fit.uniform_kappa = 1e-6 * mean_feature_variance(cross.values);
      } else if (c.variant == AblationVariant::diag_shared_cov) {
        fit.covariance = CovarianceMode::diagonal_shared;
      }
      const bool use_transitivity = c.transitivity && c.variant != AblationVariant::no_transitivity &&
                                    c.variant != AblationVariant::postprocess_transitivity;
      Eigen::VectorXd gamma;
      FitReport report;
      if (use_transitivity) {
        FeatureMatrix lf, rf;
        if (!match_left_f.empty()) lf = load_feature_matrix(match_left_f);
        if (!match_right_f.empty()) rf = load_feature_matrix(match_right_f);
        const CorrelationMatrix Rc = estimate_shared_correlation(cross);
        CorrelationMatrix Rl, Rr;
        ScopeInput il, ir;
        if (lf.rows() > 1) {
          Rl = estimate_shared_correlation(lf);
          il = {&lf, &Rl};
        }
        if (rf.rows() > 1) {
          Rr = estimate_shared_correlation(rf);
          ir = {&rf, &Rr};
        }
        FullFitConfig ff;
        ff.fit = fit;
        ff.single_table = l.single;
        if (l.single) cross.scope = Scope::cross;
        const FullFitResult r = fit_full({&cross, &Rc}, il, ir, ff);
        gamma = r.unconstrained;
        report = r.report;
      } else {
        const FitResult r = fit_no_transitivity(cross, estimate_shared_correlation(cross), fit);
        gamma = r.posterior.gamma;
        report = r.report;
      }
      const auto matches = c.variant == AblationVariant::postprocess_transitivity
                               ? postprocess_transitivity(cross.pairs, gamma)
                               : pairs_above_half(cross, gamma);
      fs::create_directories(match_out);
      const Scope id_scope = l.single ? Scope::left : Scope::cross;
      {
        auto out = open_out((fs::path(match_out) / "matches.csv").string());
        write_matches(out, cross.pairs, gamma, matches, matches, l.left, l.right, id_scope);
      }
      {
        auto out = open_out((fs::path(match_out) / "fit_report.json").string());
        write_fit_report(out, report);
      }
      std::cout << matches.size() << " matches after " << report.iterations << " iterations\n";
    } else if (*eval_cmd) {
      const Loaded l = load(eval_t);
      const Scope scope = l.single ? Scope::left : Scope::cross;
      const GoldLabels gold = load_gold(eval_gold, l.left, l.right, scope);
      std::ifstream pin(eval_pred, std::ios::binary);
      if (!pin) throw ParseError("cannot open " + eval_pred);
      const CandidateSet pred = read_pairs(pin, l.left, l.right, scope);
      std::optional<CandidateSet> cands;
      if (!eval_pairs.empty()) {
        std::ifstream cin_(eval_pairs, std::ios::binary);
        if (!cin_) throw ParseError("cannot open " + eval_pairs);
        cands = read_pairs(cin_, l.left, l.right, scope);
      }
      EvalReport report = evaluate(pred.pairs, gold, cands ? &cands->pairs : nullptr);
      report.variant = "external";
      write_report_csv(std::cout, {report});
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        auto jo = open_out((fs::path(eval_out) / "eval.json").string());
        write_report_json(jo, {report});
        auto co = open_out((fs::path(eval_out) / "eval.csv").string());
        write_report_csv(co, {report});
      }
    } else if (*synth) {
      SynthSpec spec;
      if (!synth_spec.empty()) {
        std::ifstream in(synth_spec, std::ios::binary);
        if (!in) throw ParseError("cannot open " + synth_spec);
        spec = synth_spec_from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
      }
      const SynthData data = generate(spec);
      write_synth(synth_out, data);
      std::cout << data.cross.rows() << " cross pairs, " << data.true_matches().size()
                << " matches, " << data.planted.size() << " planted triples\n";
    } else if (*run_cmd) {
      run_cfg.blocking = !run_no_blocking;
      run_cfg.within_tables = !run_no_within;
      run_cfg.cache = !run_no_cache;
      run_cfg.variant = ablation_variant_from_string(run_variant);
      run_cfg.scale_estimator = scale_from(run_scale);
      if (run_ablate) {
        std::vector<EvalReport> reports;
        for (auto v : all_ablation_variants()) reports.push_back(run_ablation(run_cfg, v));
        fs::create_directories(run_cfg.out_dir);
        auto jo = open_out((fs::path(run_cfg.out_dir) / "ablation.json").string());
        write_report_json(jo, reports);
        auto co = open_out((fs::path(run_cfg.out_dir) / "ablation.csv").string());
        write_report_csv(co, reports);
        write_report_csv(std::cout, reports);
      } else {
        const RunResult r = run(run_cfg);
        std::cout << r.matches.size() << " matches from " << r.pairs.size() << " candidates in "
                  << r.fit.iterations << " iterations\n";
        if (r.eval) write_report_csv(std::cout, {*r.eval});
      }
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kParse;
  } catch (const DegenerateInitError& e) {
    std::cerr << "error: degenerate initialization: " << e.what() << '\n';
    return kDegenerate;
  } catch (const NumericalError& e) {
    std::cerr << "error: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
