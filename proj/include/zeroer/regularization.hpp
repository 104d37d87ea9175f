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
#include <string>
#include <vector>

namespace zeroer {

/// Bhattacharyya coefficient of two univariate Gaussians given means and
/// variances. Zero variances are evaluated as limits: both zero with equal
/// means gives 1, any other zero-variance case gives 0.
double bhattacharyya_coefficient(double mu_m, double var_m, double mu_u, double var_u);

// d/dk of bhattacharyya_coefficient(mu_m, var_m + k, mu_u, var_u + k) at k = 0.
double bhattacharyya_derivative(double mu_m, double var_m, double mu_u, double var_u);

struct KappaSolve {
  double kappa = 0.0;
  bool saturated = false;  // BC + kappa' >= 1; kappa drives BC' to 1 - 1e-6 instead
  int iterations = 0;
  double residual = 0.0;   // BC'(kappa) - BC - kappa' (or - (1 - 1e-6) when saturated)
};

/// Finds kappa >= 0 such that adding kappa to both variances raises the
/// coefficient by exactly kappa_prime. Safeguarded Newton-Raphson starting at
/// var_m + var_u, with a doubling bracket and bisection fallback.
KappaSolve solve_kappa(double mu_m, double var_m, double mu_u, double var_u, double kappa_prime);

struct Regularizers {
  Eigen::VectorXd kappa;
  std::vector<std::size_t> saturated;  // feature indices that hit the ceiling
  std::vector<std::string> warnings;
};

// Per-feature solve over the diagonal of both class covariances.
Regularizers solve_regularizers(const Eigen::VectorXd& mu_m, const Eigen::VectorXd& var_m,
                                const Eigen::VectorXd& mu_u, const Eigen::VectorXd& var_u,
                                double kappa_prime);

}  // namespace zeroer
