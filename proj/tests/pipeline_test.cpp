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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

#include "json.hpp"
#include "test_support.hpp"
#include "zeroer/error.hpp"
#include "zeroer/pipeline.hpp"

namespace zeroer {
namespace {

namespace fs = std::filesystem;
using testing::slurp;
using testing::TempDir;

// Two small restaurant tables: 30 shared entities (the right copy gets a
// typo or an abbreviation), plus 25 unshared ones on each side.
struct ToyData {
  std::string left, right, gold;
};

ToyData toy_tables(const TempDir& dir) {
  const std::vector<std::string> first{"golden", "blue", "silver", "little", "royal", "green",
                                       "happy",  "old",  "grand",  "red",    "lucky", "crystal"};
  const std::vector<std::string> second{"dragon", "garden", "bistro", "kitchen", "palace", "grill",
                                        "tavern", "cafe",   "diner",  "house",   "oven",   "table"};
  const std::vector<std::string> cities{"boston", "denver", "austin", "seattle", "portland"};
  std::mt19937_64 rng(5);
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto phone = [&] {
    std::uniform_int_distribution<int> digit(0, 9);
    std::string s;
    for (int i = 0; i < 10; ++i) s += char('0' + digit(rng));
    return s.substr(0, 3) + "-" + s.substr(3, 3) + "-" + s.substr(6);
  };
  std::ostringstream l, r, g;
  l << "id,name,city,phone\n";
  r << "id,name,city,phone\n";
  g << "left_id,right_id\n";
  for (int i = 0; i < 55; ++i) {
    const std::string name = pick(first) + " " + pick(second) + " " + pick(second);
    const std::string city = pick(cities);
    const std::string ph = phone();
    l << "L" << i << ',' << name << ',' << city << ',' << ph << '\n';
    if (i < 30) {
      std::string n2 = name;
      n2[std::uniform_int_distribution<std::size_t>(0, n2.size() - 1)(rng)] = 'x';
      r << "R" << i << ',' << n2 << ',' << city << ',' << ph << '\n';
      g << "L" << i << ",R" << i << '\n';
    } else {
      r << "R" << i << ',' << pick(first) + " " + pick(second) + " " + pick(second) << ','
        << pick(cities) << ',' << phone() << '\n';
    }
  }
  return {dir.write("left.csv", l.str()), dir.write("right.csv", r.str()), dir.write("gold.csv", g.str())};
}

RunConfig toy_config(const ToyData& data, const std::string& out) {
  RunConfig c;
  c.left_path = data.left;
  c.right_path = data.right;
  c.gold_path = data.gold;
  c.out_dir = out;
  c.blocking = false;
  return c;
}

TEST(Pipeline, EndToEndArtifactsAndQuality) {
  TempDir dir("pipe");
  const ToyData data = toy_tables(dir);
  const RunResult r = run(toy_config(data, dir.file("out")));
  ASSERT_TRUE(r.eval);
  EXPECT_GE(r.eval->f1, 0.9);
  EXPECT_EQ(r.pairs.size(), 55u * 55u);
  EXPECT_EQ(r.eval->blocking_recall, 1.0);
  for (const char* f : {"schema.json", "pairs_cross.csv", "pairs_left.csv", "pairs_right.csv",
                        "features_cross.bin", "model_cross.json", "posteriors_cross.csv",
                        "matches.csv", "fit_report.json", "eval.json", "eval.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir.path() / "out" / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(dir.file("out/manifest.json")));
  EXPECT_EQ(manifest["layout"], kOutputLayout);
  const std::string matches = slurp(dir.file("out/matches.csv"));
  EXPECT_EQ(matches.substr(0, matches.find('\n')), "left_id,right_id,gamma,label");
}

TEST(Pipeline, RerunIsByteIdenticalAndUsesCache) {
  TempDir dir("pipe");
  const ToyData data = toy_tables(dir);
  RunConfig c = toy_config(data, dir.file("a"));
  c.blocking = true;
  c.block.bands = 16;
  c.block.rows = 2;
  const RunResult first = run(c);
  EXPECT_FALSE(first.features_from_cache);
  const RunResult cached = run(c);
  EXPECT_TRUE(cached.features_from_cache);
  c.out_dir = dir.file("b");
  c.cache = false;
  run(c);
  EXPECT_EQ(slurp(dir.file("a/matches.csv")), slurp(dir.file("b/matches.csv")));
  EXPECT_EQ(first.gamma, cached.gamma);
}

TEST(Pipeline, TransitivityOffIsThePlainFit) {
  TempDir dir("pipe");
  const ToyData data = toy_tables(dir);
  RunConfig c = toy_config(data, dir.file("off"));
  c.transitivity = false;
  const RunResult r = run(c);
  const FeatureMatrix X = load_feature_matrix(dir.file("off/features_cross.bin"));
  FitConfig fc;
  const FitResult plain = fit_no_transitivity(X, estimate_shared_correlation(X), fc);
  EXPECT_EQ(r.gamma, plain.posterior.gamma);
  EXPECT_FALSE(fs::exists(dir.path() / "off" / "pairs_left.csv"));

  const EvalReport ablation = run_ablation(toy_config(data, dir.file("abl")),
                                           AblationVariant::no_transitivity);
  EXPECT_EQ(ablation.f1, r.eval->f1);
  EXPECT_EQ(ablation.variant, "no-transitivity");
  EXPECT_TRUE(fs::exists(dir.path() / "abl" / "no-transitivity" / "matches.csv"));
}

TEST(Pipeline, VariantsAndSubsampleRun) {
  TempDir dir("pipe");
  const ToyData data = toy_tables(dir);
  for (auto v : all_ablation_variants()) {
    const EvalReport r = run_ablation(toy_config(data, dir.file("v")), v);
    EXPECT_EQ(r.variant, to_string(v));
    EXPECT_GE(r.f1, 0.5) << r.variant;
  }
  RunConfig c = toy_config(data, dir.file("sub"));
  c.train_fraction = 0.5;
  const RunResult r = run(c);
  ASSERT_TRUE(r.eval);
  EXPECT_GE(r.eval->f1, 0.8);
}

TEST(Pipeline, DeduplicatesSingleTable) {
  TempDir dir("pipe");
  const std::string t = dir.write("t.csv",
                                  "id,name,city\n1,golden dragon,boston\n2,golden dragon,boston\n"
                                  "3,blue bistro,austin\n4,red grill,denver\n5,blue bistr,austin\n"
                                  "6,old oven,seattle\n7,lucky diner,portland\n8,grand cafe,austin\n");
  const std::string gold = dir.write("g.csv", "a,b\n1,2\n3,5\n");
  RunConfig c;
  c.left_path = t;
  c.gold_path = gold;
  c.out_dir = dir.file("dedup");
  c.blocking = false;
  const RunResult r = run(c);
  ASSERT_TRUE(r.eval);
  EXPECT_EQ(r.pairs.size(), 28u);
  for (const auto& p : r.pairs) EXPECT_LT(p.a, p.b);
}

TEST(Pipeline, ConfigValidationAndDigest) {
  RunConfig c;
  c.left_path = "x.csv";
  c.epsilon = 1.0;
  EXPECT_THROW(c.validate(), ParseError);
  c.epsilon = 0.5;
  c.kappa_prime = -0.1;
  EXPECT_THROW(c.validate(), ParseError);
  c.kappa_prime = 0.01;
  c.train_fraction = 0.0;
  EXPECT_THROW(c.validate(), ParseError);
  c.train_fraction = 1.0;
  EXPECT_NO_THROW(c.validate());
  RunConfig d = c;
  EXPECT_EQ(c.digest(), d.digest());
  d.kappa_prime = 0.02;
  EXPECT_NE(c.digest(), d.digest());
}

TEST(Pipeline, OverridesAndHints) {
  const auto hints = parse_alignment_hints({"title=name", "yr=year"});
  ASSERT_EQ(hints.size(), 2u);
  EXPECT_EQ(hints[0], (std::pair<std::string, std::string>{"title", "name"}));
  EXPECT_THROW(parse_alignment_hints({"nohint"}), ParseError);
  const FeatureSchema base = build_feature_schema({{{"name", "name", AttributeType::short_string}}});
  const FeatureSchema fs = apply_feature_overrides(base, {"name=exact_match,levenshtein"});
  EXPECT_EQ(fs.dimension(), 2u);
  EXPECT_THROW(apply_feature_overrides(base, {"name=bogus"}), ParseError);
  EXPECT_THROW(apply_feature_overrides(base, {"other=exact_match"}), ParseError);
}

int cli(const std::string& args) {
  const std::string cmd = std::string(ZEROER_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodesPerErrorClass) {
  TempDir dir("cli");
  const ToyData data = toy_tables(dir);
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("run --left " + data.left + " --right " + data.right + " --no-blocking --out " +
                dir.file("ok")), 0);
  EXPECT_EQ(cli("run --left /nonexistent.csv --out " + dir.file("x")), 2);
  EXPECT_EQ(cli("run --bogus-flag"), 2);
  EXPECT_EQ(cli("run --left " + data.left + " --right " + data.right +
                " --no-blocking --epsilon 0.99 --out " + dir.file("deg")), 3);
  const std::string spec = dir.write("bad.json", "{\"groups\": [3], \"rho\": [-0.9]}");
  EXPECT_EQ(cli("synth --spec " + spec + " --out " + dir.file("s")), 4);
}

TEST(Cli, StagewiseVerbsAndConfigFile) {
  TempDir dir("cli");
  const ToyData data = toy_tables(dir);
  const std::string t = " --left " + data.left + " --right " + data.right;
  ASSERT_EQ(cli("ingest" + t + " --out " + dir.file("ing")), 0);
  ASSERT_EQ(cli("block" + t + " --no-blocking --out " + dir.file("pairs.csv")), 0);
  ASSERT_EQ(cli("featurize" + t + " --pairs " + dir.file("pairs.csv") + " --out " + dir.file("f.bin")), 0);
  ASSERT_EQ(cli("match" + t + " --features " + dir.file("f.bin") + " --out " + dir.file("m")), 0);
  ASSERT_EQ(cli("eval --pred " + dir.file("m/matches.csv") + t + " --gold " + data.gold + " --out " +
                dir.file("e")), 0);
  const auto report = nlohmann::json::parse(slurp(dir.file("e/eval.json")));
  EXPECT_GE(report[0]["f1"].get<double>(), 0.9);

  const std::string cfg = dir.write("run.toml", "[run]\nleft = \"" + data.left + "\"\nright = \"" +
                                                    data.right + "\"\nno-blocking = true\nout = \"" +
                                                    dir.file("cfg") + "\"\n");
  EXPECT_EQ(cli("--config " + cfg + " run"), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "cfg" / "matches.csv"));
}

}  // namespace
}  // namespace zeroer
