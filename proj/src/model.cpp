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

#include "zeroer/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "zeroer/error.hpp"
#include "zeroer/regularization.hpp"

namespace zeroer {

namespace {

constexpr double kMinClassMass = 1e-6;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd reconstruct(const Eigen::VectorXd& lambda, const CorrelationMatrix& R,
                            const Eigen::VectorXd& kappa) {
  Eigen::MatrixXd sigma = lambda.asDiagonal() * R.R * lambda.asDiagonal();
  sigma.diagonal() += kappa;
  return sigma;
}

void factor_blocks(const Eigen::MatrixXd& sigma, const CorrelationMatrix& R, const char* label,
                   std::vector<Eigen::MatrixXd>& chol, double& log_det) {
  chol.clear();
  log_det = 0.0;
  const auto offsets = R.block_offsets();
  for (std::size_t g = 0; g < R.block_sizes.size(); ++g) {
    const auto off = static_cast<Eigen::Index>(offsets[g]);
    const auto sz = static_cast<Eigen::Index>(R.block_sizes[g]);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma.block(off, off, sz, sz));
    Eigen::MatrixXd L = llt.matrixL();
    if (llt.info() != Eigen::Success || !(L.diagonal().array() > 0.0).all() ||
        !L.allFinite()) {
      throw NumericalError(std::string("covariance of class ") + label + " block " +
                           std::to_string(g) + " is not positive definite");
    }
    log_det += 2.0 * L.diagonal().array().log().sum();
    chol.push_back(std::move(L));
  }
}

}  // namespace

void ModelParams::refresh() {
  if (kappa.size() != mu_M.size()) kappa = Eigen::VectorXd::Zero(mu_M.size());
  Sigma_M = reconstruct(lambda_M, R, kappa);
  Sigma_U = reconstruct(lambda_U, R, kappa);
  factor_blocks(Sigma_M, R, "M", chol_M, log_det_M);
  factor_blocks(Sigma_U, R, "U", chol_U, log_det_U);
}

Eigen::VectorXd ModelParams::precision_diagonal(bool match) const {
  const auto& chol = match ? chol_M : chol_U;
  Eigen::VectorXd out(static_cast<Eigen::Index>(dimension()));
  const auto offsets = R.block_offsets();
  for (std::size_t g = 0; g < chol.size(); ++g) {
    const auto sz = chol[g].rows();
    const Eigen::MatrixXd inv_l =
        chol[g].triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(sz, sz));
    out.segment(static_cast<Eigen::Index>(offsets[g]), sz) = inv_l.colwise().squaredNorm().transpose();
  }
  return out;
}

std::vector<double> free_parameters(const ModelParams& params) {
  std::vector<double> out{params.pi_M};
  for (const auto* v : {&params.mu_M, &params.mu_U, &params.lambda_M, &params.lambda_U}) {
    out.insert(out.end(), v->data(), v->data() + v->size());
  }
  return out;
}

void FitConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParseError("epsilon must lie in (0, 1)");
  if (!(kappa_prime >= 0.0 && kappa_prime < 1.0)) throw ParseError("kappa' must lie in [0, 1)");
  if (!(tol > 0.0)) throw ParseError("tolerance must be positive");
  if (max_iter < 1) throw ParseError("max_iter must be at least 1");
  if (average_window < 1) throw ParseError("average window must be at least 1");
  if (uniform_kappa < 0.0) throw ParseError("uniform kappa must be non-negative");
}

PosteriorVector init_posteriors(const FeatureMatrix& X, double epsilon) {
  PosteriorVector out{X.scope, Eigen::VectorXd(static_cast<Eigen::Index>(X.rows()))};
  if (X.rows() == 0) throw DegenerateInitError("no candidate pairs to initialize");
  const Eigen::VectorXd means = X.values.rowwise().mean();
  std::size_t matches = 0;
  for (Eigen::Index i = 0; i < means.size(); ++i) {
    const bool m = means[i] > epsilon;
    matches += m;
    out.gamma[i] = m ? 1.0 - kPosteriorFloor : kPosteriorFloor;
  }
  if (matches == 0 || matches == X.rows()) {
    throw DegenerateInitError("initialization with epsilon=" + std::to_string(epsilon) +
                              " assigns every " + std::string(to_string(X.scope)) +
                              " pair to class " + (matches ? "M" : "U"));
  }
  return out;
}

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& Sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  if (!(L.diagonal().array() > 0.0).all()) throw NumericalError("covariance is not positive definite");
  const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(x - mu);
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det + z.squaredNorm());
}

Eigen::VectorXd class_log_density(const Eigen::MatrixXd& values, const ModelParams& params,
                                  bool match) {
  const auto& chol = match ? params.chol_M : params.chol_U;
  const auto& mu = match ? params.mu_M : params.mu_U;
  const double log_det = match ? params.log_det_M : params.log_det_U;
  const auto offsets = params.R.block_offsets();
  Eigen::VectorXd quad = Eigen::VectorXd::Zero(values.rows());
  for (std::size_t g = 0; g < chol.size(); ++g) {
    const auto off = static_cast<Eigen::Index>(offsets[g]);
    const auto sz = chol[g].rows();
    Eigen::MatrixXd centered = values.middleCols(off, sz).transpose();
    centered.colwise() -= mu.segment(off, sz);
    chol[g].triangularView<Eigen::Lower>().solveInPlace(centered);
    quad += centered.colwise().squaredNorm().transpose();
  }
  const double constant = static_cast<double>(params.dimension()) * kLog2Pi + log_det;
  return (-0.5 * (quad.array() + constant)).matrix();
}

LogJoint log_joint(const Eigen::MatrixXd& values, const ModelParams& params) {
  LogJoint lj;
  lj.match = class_log_density(values, params, true).array() + std::log(params.pi_M);
  lj.unmatch = class_log_density(values, params, false).array() + std::log1p(-params.pi_M);
  return lj;
}

Eigen::VectorXd posterior_from_log_joint(const LogJoint& lj) {
  Eigen::VectorXd gamma(lj.match.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double diff = lj.unmatch[i] - lj.match[i];
    const double g = diff <= 0.0 ? 1.0 / (1.0 + std::exp(diff))
                                 : std::exp(-diff) / (1.0 + std::exp(-diff));
    gamma[i] = std::clamp(g, kPosteriorFloor, 1.0 - kPosteriorFloor);
  }
  return gamma;
}

PosteriorVector e_step(const FeatureMatrix& X, const ModelParams& params) {
  return {X.scope, posterior_from_log_joint(log_joint(X.values, params))};
}

double free_energy_term(double gamma, double log_match, double log_unmatch) {
  if (gamma <= 0.0) return log_unmatch;
  if (gamma >= 1.0) return log_match;
  return gamma * (log_match - std::log(gamma)) + (1.0 - gamma) * (log_unmatch - std::log1p(-gamma));
}

double free_energy(const LogJoint& lj, const Eigen::VectorXd& gamma) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    f += free_energy_term(gamma[i], lj.match[i], lj.unmatch[i]);
  }
  return f;
}

double free_energy(const FeatureMatrix& X, const PosteriorVector& gamma, const ModelParams& params) {
  return free_energy(log_joint(X.values, params), gamma.gamma);
}

double regularized_objective(const LogJoint& lj, const Eigen::VectorXd& gamma,
                             const ModelParams& params) {
  const double n_m = gamma.sum();
  const double n_u = static_cast<double>(gamma.size()) - n_m;
  const double penalty = params.kappa.dot(n_m * params.precision_diagonal(true) +
                                          n_u * params.precision_diagonal(false));
  return free_energy(lj, gamma) - 0.5 * penalty;
}

namespace {

// Maximizes the weighted Gaussian likelihood over Lambda with R fixed. In
// s = 1/lambda the objective sum(log s) - s'(R^-1 o S)s/2 is concave, and
// each coordinate has a closed-form maximizer, so cyclic updates converge.
Eigen::VectorXd profile_scales(const Eigen::MatrixXd& values, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& mu, double mass, const CorrelationMatrix& R) {
  const Eigen::MatrixXd centered = values.rowwise() - mu.transpose();
  const Eigen::MatrixXd S = centered.transpose() * w.asDiagonal() * centered / mass;
  Eigen::VectorXd lambda(values.cols());
  const auto offsets = R.block_offsets();
  for (std::size_t g = 0; g < R.block_sizes.size(); ++g) {
    const auto o = Eigen::Index(offsets[g]);
    const auto k = Eigen::Index(R.block_sizes[g]);
    const Eigen::MatrixXd A = R.block(g).inverse().cwiseProduct(S.block(o, o, k, k));
    Eigen::VectorXd s = S.block(o, o, k, k).diagonal().cwiseSqrt().cwiseInverse();
    for (int sweep = 0; sweep < 1000; ++sweep) {
      double change = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        const double b = A.row(j).dot(s) - A(j, j) * s[j];
        const double next = (-b + std::sqrt(b * b + 4.0 * A(j, j))) / (2.0 * A(j, j));
        change = std::max(change, std::abs(next - s[j]) / s[j]);
        s[j] = next;
      }
      if (change < 1e-14) break;
    }
    lambda.segment(o, k) = s.cwiseInverse();
  }
  return lambda;
}

}  // namespace

ModelParams m_step(const Eigen::MatrixXd& values, const Eigen::VectorXd& gamma,
                   const CorrelationMatrix& R, const FitConfig& config,
                   std::vector<std::string>* warnings) {
  const auto n = values.rows();
  const auto d = values.cols();
  if (gamma.size() != n) throw ParseError("posterior length does not match feature rows");
  if (static_cast<Eigen::Index>(R.dimension()) != d) {
    throw ParseError("correlation matrix dimension does not match features");
  }
  const double n_m = gamma.sum();
  const double n_u = static_cast<double>(n) - n_m;
  if (n_m < kMinClassMass || n_u < kMinClassMass) {
    throw DegenerateInitError("class " + std::string(n_m < kMinClassMass ? "M" : "U") +
                              " has vanished (N_M=" + std::to_string(n_m) +
                              ", N_U=" + std::to_string(n_u) + ")");
  }
  const Eigen::VectorXd w_u = (1.0 - gamma.array()).matrix();

  ModelParams p;
  p.pi_M = n_m / static_cast<double>(n);
  p.mu_M = values.transpose() * gamma / n_m;
  p.mu_U = values.transpose() * w_u / n_u;

  Eigen::VectorXd var_m(d), var_u(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = values.col(j).array();
    var_m[j] = (gamma.array() * (col - p.mu_M[j]).square()).sum() / n_m;
    var_u[j] = (w_u.array() * (col - p.mu_U[j]).square()).sum() / n_u;
  }

  if (config.covariance == CovarianceMode::diagonal_shared) {
    const Eigen::VectorXd pooled = (n_m * var_m + n_u * var_u) / static_cast<double>(n);
    var_m = var_u = pooled;
    p.R = CorrelationMatrix::identity(R.block_sizes);
  } else {
    p.R = R;
  }
  p.lambda_M = var_m.cwiseSqrt();
  p.lambda_U = var_u.cwiseSqrt();
  if (config.scale_estimator == ScaleEstimator::profile_likelihood &&
      config.covariance != CovarianceMode::diagonal_shared) {
    p.lambda_M = profile_scales(values, gamma, p.mu_M, n_m, R);
    p.lambda_U = profile_scales(values, w_u, p.mu_U, n_u, R);
    var_m = p.lambda_M.cwiseAbs2();
    var_u = p.lambda_U.cwiseAbs2();
  }

  switch (config.regularization) {
    case RegularizationMode::adaptive: {
      auto reg = solve_regularizers(p.mu_M, var_m, p.mu_U, var_u, config.kappa_prime);
      p.kappa = std::move(reg.kappa);
      if (warnings) {
        warnings->insert(warnings->end(), reg.warnings.begin(), reg.warnings.end());
      }
      break;
    }
    case RegularizationMode::uniform:
      p.kappa = Eigen::VectorXd::Constant(d, config.uniform_kappa);
      break;
    case RegularizationMode::none:
      p.kappa = Eigen::VectorXd::Zero(d);
      break;
  }
  p.refresh();
  return p;
}

ModelParams m_step(const FeatureMatrix& X, const PosteriorVector& gamma, const CorrelationMatrix& R,
                   double kappa_prime) {
  FitConfig config;
  config.kappa_prime = kappa_prime;
  return m_step(X.values, gamma.gamma, R, config);
}

FitResult fit_no_transitivity(const FeatureMatrix& X, const CorrelationMatrix& R,
                              const FitConfig& config) {
  config.validate();
  if (X.rows() < 2 || X.dimension() < 1) {
    throw ParseError("fitting needs at least two rows and one feature");
  }
  FitResult result;
  result.posterior = init_posteriors(X, config.epsilon);
  std::deque<Eigen::VectorXd> window;
  auto& report = result.report;

  for (int t = 1; t <= config.max_iter; ++t) {
    result.params = m_step(X.values, result.posterior.gamma, R, config, &report.warnings);
    const LogJoint lj = log_joint(X.values, result.params);
    result.posterior.gamma = posterior_from_log_joint(lj);
    const double f = free_energy(lj, result.posterior.gamma);
    report.free_energy.push_back(f);
    report.regularized_objective.push_back(
        regularized_objective(lj, result.posterior.gamma, result.params));
    report.iterations = t;

    window.push_back(result.posterior.gamma);
    if (static_cast<int>(window.size()) > config.average_window) window.pop_front();

    if (t > 1 && std::abs(f - report.free_energy[t - 2]) < config.tol) {
      report.converged = true;
      report.terminal_rule = TerminalRule::likelihood_delta;
      break;
    }
  }
  if (!report.converged) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(result.posterior.gamma.size());
    for (const auto& g : window) mean += g;
    result.posterior.gamma = mean / static_cast<double>(window.size());
    report.terminal_rule = TerminalRule::max_iterations;
  }
  // Regularizer warnings repeat every iteration; keep each message once.
  std::sort(report.warnings.begin(), report.warnings.end());
  report.warnings.erase(std::unique(report.warnings.begin(), report.warnings.end()),
                        report.warnings.end());
  return result;
}

double mean_feature_variance(const Eigen::MatrixXd& values) {
  if (values.rows() < 1) return 0.0;
  const Eigen::RowVectorXd mean = values.colwise().mean();
  return ((values.rowwise() - mean).array().square().colwise().sum() /
          static_cast<double>(values.rows()))
      .mean();
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<std::string>& feature_names) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["format"] = "zeroer-model";
  j["version"] = 1;
  j["dimension"] = params.dimension();
  j["group_sizes"] = params.R.block_sizes;
  j["feature_names"] = feature_names;
  j["pi_M"] = params.pi_M;
  j["mu_M"] = vec(params.mu_M);
  j["mu_U"] = vec(params.mu_U);
  j["lambda_M"] = vec(params.lambda_M);
  j["lambda_U"] = vec(params.lambda_U);
  j["kappa"] = vec(params.kappa);
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < params.R.R.rows(); ++r) {
    Eigen::VectorXd row = params.R.R.row(r).transpose();
    rows.push_back(vec(row));
  }
  j["R"] = rows;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write checkpoint: " + path);
  out << j.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format") != "zeroer-model" || j.at("version") != 1) {
      throw ParseError("unsupported checkpoint format in " + path);
    }
    auto vec = [&](const char* key) {
      auto v = j.at(key).get<std::vector<double>>();
      return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    ModelParams p;
    const auto d = j.at("dimension").get<Eigen::Index>();
    p.pi_M = j.at("pi_M").get<double>();
    p.mu_M = vec("mu_M");
    p.mu_U = vec("mu_U");
    p.lambda_M = vec("lambda_M");
    p.lambda_U = vec("lambda_U");
    p.kappa = vec("kappa");
    p.R.block_sizes = j.at("group_sizes").get<std::vector<std::size_t>>();
    p.R.R.resize(d, d);
    const auto& rows = j.at("R");
    for (Eigen::Index r = 0; r < d; ++r) {
      auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
      for (Eigen::Index c = 0; c < d; ++c) p.R.R(r, c) = row.at(static_cast<std::size_t>(c));
    }
    if (p.mu_M.size() != d || p.mu_U.size() != d || p.lambda_M.size() != d ||
        p.lambda_U.size() != d || p.kappa.size() != d) {
      throw ParseError("checkpoint vectors disagree with dimension in " + path);
    }
    p.refresh();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint " + path + ": " + e.what());
  }
}

}  // namespace zeroer
