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

#include "zeroer/blocking.hpp"
#include "zeroer/features.hpp"

namespace zeroer {

inline constexpr double kPosteriorFloor = 1e-10;

enum class RegularizationMode {
  adaptive,  // per-feature kappa_j equalizing the Bhattacharyya increase
  uniform,   // one constant added to every variance
  none,
};

enum class CovarianceMode {
  grouped_shared_correlation,  // Sigma_C = Lambda_C R Lambda_C
  diagonal_shared,             // R = I and one pooled variance per feature for both classes
};

/// Parameters of the two-component model. R is estimated once up front and
/// stays fixed; everything else is re-estimated by each M-step.
struct ModelParams {
  double pi_M = 0.5;
  Eigen::VectorXd mu_M, mu_U;
  Eigen::VectorXd lambda_M, lambda_U;  // per-feature standard deviations
  Eigen::VectorXd kappa;               // diagonal regularizer added after reconstruction
  CorrelationMatrix R;

  // Cached by refresh(): Sigma_C = Lambda_C R Lambda_C + diag(kappa) and the
  // lower Cholesky factor of each diagonal block.
  Eigen::MatrixXd Sigma_M, Sigma_U;
  std::vector<Eigen::MatrixXd> chol_M, chol_U;
  double log_det_M = 0.0, log_det_U = 0.0;

  std::size_t dimension() const { return static_cast<std::size_t>(mu_M.size()); }
  std::size_t free_parameter_count() const { return 4 * dimension() + 1; }

  // Throws NumericalError when either covariance is not positive definite.
  void refresh();
  // Diagonal of Sigma_C^{-1}, C = M when `match` is true.
  Eigen::VectorXd precision_diagonal(bool match) const;
};

// pi_M, mu_M, mu_U, lambda_M, lambda_U flattened; size 4d + 1.
std::vector<double> free_parameters(const ModelParams& params);

struct PosteriorVector {
  Scope scope = Scope::cross;
  Eigen::VectorXd gamma;  // p(y = M | x) per row
};

/// log(pi_C p(x_i | theta_C)) for both classes, per row.
struct LogJoint {
  Eigen::VectorXd match;
  Eigen::VectorXd unmatch;
};

enum class TerminalRule { likelihood_delta, max_iterations };

enum class ScaleEstimator {
  moment,              // weighted per-feature standard deviation
  profile_likelihood,  // exact maximizer of the likelihood over Lambda given R
};

struct FitReport {
  int iterations = 0;
  std::vector<double> free_energy;             // after each E-step
  std::vector<double> regularized_objective;   // free energy minus the trace penalty
  bool converged = false;
  TerminalRule terminal_rule = TerminalRule::max_iterations;
  std::vector<std::string> warnings;
};

struct FitConfig {
  double epsilon = 0.5;
  double kappa_prime = 0.01;
  double tol = 1e-5;
  int max_iter = 200;
  int average_window = 20;
  RegularizationMode regularization = RegularizationMode::adaptive;
  double uniform_kappa = 0.0;
  CovarianceMode covariance = CovarianceMode::grouped_shared_correlation;
  ScaleEstimator scale_estimator = ScaleEstimator::moment;

  void validate() const;
};

/// gamma_i = 1 when the mean of row i exceeds epsilon, else 0, then clamped
/// to [1e-10, 1 - 1e-10]. Throws DegenerateInitError if one class is empty.
PosteriorVector init_posteriors(const FeatureMatrix& X, double epsilon);

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& Sigma);

// Block-factored log densities for every row of `values`.
Eigen::VectorXd class_log_density(const Eigen::MatrixXd& values, const ModelParams& params,
                                  bool match);

LogJoint log_joint(const Eigen::MatrixXd& values, const ModelParams& params);

// Posterior from log joints with the log-sum-exp guard; clamped.
Eigen::VectorXd posterior_from_log_joint(const LogJoint& lj);

PosteriorVector e_step(const FeatureMatrix& X, const ModelParams& params);

// Per-pair additive term of the free energy; exact 0 and 1 are allowed.
double free_energy_term(double gamma, double log_match, double log_unmatch);
double free_energy(const LogJoint& lj, const Eigen::VectorXd& gamma);
double free_energy(const FeatureMatrix& X, const PosteriorVector& gamma, const ModelParams& params);

// Free energy minus 1/2 tr(K (N_M Sigma_M^-1 + N_U Sigma_U^-1)).
double regularized_objective(const LogJoint& lj, const Eigen::VectorXd& gamma,
                             const ModelParams& params);

/// Closed-form M-step: weighted means and per-feature deviations, Sigma
/// rebuilt from the shared correlation, then the diagonal regularizer.
/// The moment estimator of Lambda is the likelihood maximizer only when R is
/// the identity; ScaleEstimator::profile_likelihood solves for it exactly.
ModelParams m_step(const Eigen::MatrixXd& values, const Eigen::VectorXd& gamma,
                   const CorrelationMatrix& R, const FitConfig& config,
                   std::vector<std::string>* warnings = nullptr);
ModelParams m_step(const FeatureMatrix& X, const PosteriorVector& gamma, const CorrelationMatrix& R,
                   double kappa_prime);

struct FitResult {
  ModelParams params;
  PosteriorVector posterior;
  FitReport report;
};

/// EM without transitivity. When max_iter is hit, the returned posterior is
/// the element-wise mean of the last `average_window` posteriors.
FitResult fit_no_transitivity(const FeatureMatrix& X, const CorrelationMatrix& R,
                              const FitConfig& config = {});

// Mean of the per-feature variances of a matrix, used for uniform regularization.
double mean_feature_variance(const Eigen::MatrixXd& values);

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<std::string>& feature_names = {});
ModelParams load_checkpoint(const std::string& path);

}  // namespace zeroer
