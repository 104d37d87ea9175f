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

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "zeroer/error.hpp"
#include "zeroer/regularization.hpp"

namespace zeroer {
namespace {

TEST(Bhattacharyya, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(bhattacharyya_coefficient(0.3, 0.02, 0.3, 0.02), 1.0);
  EXPECT_NEAR(bhattacharyya_coefficient(1, 0.25, 0, 0.25), std::exp(-0.5), 1e-15);
  EXPECT_LT(bhattacharyya_coefficient(0, 0.01, 1e3, 0.01), 1e-300);
  EXPECT_EQ(bhattacharyya_coefficient(0.5, 0.0, 0.5, 0.0), 1.0);
  EXPECT_EQ(bhattacharyya_coefficient(0.5, 0.0, 0.4, 0.0), 0.0);
  EXPECT_EQ(bhattacharyya_coefficient(0.5, 0.0, 0.5, 0.1), 0.0);
  EXPECT_THROW(bhattacharyya_coefficient(0, -1, 0, 1), NumericalError);
}

TEST(Bhattacharyya, MatchesOverlapIntegral) {
  EXPECT_NEAR(bhattacharyya_coefficient(1, 0.25, 0, 0.25), oracle::bc_quadrature(1, 0.25, 0, 0.25),
              1e-9);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> mu(0, 1), sd(0.02, 0.5);
  for (int t = 0; t < 20; ++t) {
    const double m1 = mu(rng), m2 = mu(rng), v1 = std::pow(sd(rng), 2), v2 = std::pow(sd(rng), 2);
    EXPECT_NEAR(bhattacharyya_coefficient(m1, v1, m2, v2), oracle::bc_quadrature(m1, v1, m2, v2),
                1e-6);
  }
}

TEST(Bhattacharyya, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> mu(0, 1), var(0.001, 0.2);
  for (int t = 0; t < 50; ++t) {
    const double m1 = mu(rng), m2 = mu(rng), v1 = var(rng), v2 = var(rng);
    const double h = 1e-7;
    const double fd = (oracle::bc_formula(m1, v1 + h, m2, v2 + h) -
                       oracle::bc_formula(m1, v1 - h, m2, v2 - h)) / (2 * h);
    EXPECT_NEAR(bhattacharyya_derivative(m1, v1, m2, v2), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(SolveKappa, ZeroLevelGivesZero) {
  const Regularizers r = solve_regularizers(Eigen::Vector2d(1, 0.7), Eigen::Vector2d(0.1, 0.2),
                                            Eigen::Vector2d(0, 0.1), Eigen::Vector2d(0.3, 0.1), 0.0);
  EXPECT_EQ(r.kappa, Eigen::VectorXd::Zero(2));
}

TEST(SolveKappa, MatchesBisectionOracle) {
  const KappaSolve s = solve_kappa(1, 0.25, 0, 0.25, 0.01);
  EXPECT_FALSE(s.saturated);
  EXPECT_NEAR(s.kappa, oracle::kappa_bisection(1, 0.25, 0, 0.25, 0.01), 1e-8);
  EXPECT_NEAR(bhattacharyya_coefficient(1, 0.25 + s.kappa, 0, 0.25 + s.kappa),
              std::exp(-0.5) + 0.01, 1e-10);
  EXPECT_GT(s.kappa, 0.0);
}

TEST(SolveKappa, EqualIncreaseOnRandomDraws) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mu(0, 1), lv(-12, -1), kp(0.001, 0.2);
  for (int t = 0; t < 200; ++t) {
    const double m1 = mu(rng), m2 = mu(rng), v1 = std::exp(lv(rng)), v2 = std::exp(lv(rng));
    const double k = kp(rng);
    const KappaSolve s = solve_kappa(m1, v1, m2, v2, k);
    const double bc = bhattacharyya_coefficient(m1, v1, m2, v2);
    const double after = bhattacharyya_coefficient(m1, v1 + s.kappa, m2, v2 + s.kappa);
    EXPECT_GE(s.kappa, 0.0);
    if (s.saturated) {
      EXPECT_GE(bc + k, 1.0);
      EXPECT_NEAR(after, 1.0 - 1e-6, 1e-9);
    } else {
      EXPECT_NEAR(after - bc - k, 0.0, 1e-8) << m1 << ' ' << v1 << ' ' << m2 << ' ' << v2;
      EXPECT_NEAR(s.kappa, oracle::kappa_bisection(m1, v1, m2, v2, k),
                  1e-6 * std::max(1.0, s.kappa));
    }
  }
}

TEST(SolveKappa, DegenerateFeatureGetsLargerKappa) {
  // Both features receive the same overlap increase; the near point-mass one
  // needs much more added variance to get there.
  const Regularizers r =
      solve_regularizers(Eigen::Vector2d(1, 1), Eigen::Vector2d(1e-8, 0.25), Eigen::Vector2d(0, 0),
                         Eigen::Vector2d(1e-8, 0.25), 0.01);
  ASSERT_TRUE(r.saturated.empty());
  for (int j = 0; j < 2; ++j) {
    const double v = j == 0 ? 1e-8 : 0.25;
    EXPECT_NEAR(bhattacharyya_coefficient(1, v + r.kappa[j], 0, v + r.kappa[j]) -
                    bhattacharyya_coefficient(1, v, 0, v),
                0.01, 1e-8);
  }
  EXPECT_GT(r.kappa[0], r.kappa[1]);
}

TEST(SolveKappa, SaturatedAndConstantFeatures) {
  const Regularizers r =
      solve_regularizers(Eigen::Vector3d(0.5, 0.5, 0.2), Eigen::Vector3d(0.01, 0.0, 0.01),
                         Eigen::Vector3d(0.52, 0.5, 0.8), Eigen::Vector3d(0.01, 0.0, 0.02), 0.05);
  EXPECT_EQ(r.saturated, (std::vector<std::size_t>{0}));
  EXPECT_NEAR(bhattacharyya_coefficient(0.5, 0.01 + r.kappa[0], 0.52, 0.01 + r.kappa[0]),
              1.0 - 1e-6, 1e-9);
  EXPECT_EQ(r.kappa[1], 1.0);
  EXPECT_EQ(r.warnings.size(), 2u);
  EXPECT_THROW(solve_regularizers(Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(),
                                  Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(), 1.0),
               ParseError);
}

}  // namespace
}  // namespace zeroer
