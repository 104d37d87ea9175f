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

#include "zeroer/regularization.hpp"

#include <algorithm>
#include <cmath>

#include "zeroer/error.hpp"

namespace zeroer {

namespace {

constexpr double kResidualTolerance = 1e-10;
constexpr int kMaxIterations = 100;
constexpr double kCeiling = 1.0 - 1e-6;

// log BC written as -1/2 ln((a+b)/2) + 1/4 ln a + 1/4 ln b - delta / (4(a+b)),
// which equals the usual form since a/b + b/a + 2 = (a+b)^2 / (ab).
double log_bc(double delta2, double a, double b) {
  const double s = a + b;
  return -0.5 * std::log(0.5 * s) + 0.25 * std::log(a) + 0.25 * std::log(b) - 0.25 * delta2 / s;
}

double dlog_bc(double delta2, double a, double b) {
  const double s = a + b;
  return -1.0 / s + s / (4.0 * a * b) + 0.5 * delta2 / (s * s);
}

}  // namespace

double bhattacharyya_coefficient(double mu_m, double var_m, double mu_u, double var_u) {
  if (var_m < 0.0 || var_u < 0.0) throw NumericalError("negative variance in Bhattacharyya coefficient");
  const double delta2 = (mu_m - mu_u) * (mu_m - mu_u);
  if (var_m == 0.0 && var_u == 0.0) return delta2 == 0.0 ? 1.0 : 0.0;
  if (var_m == 0.0 || var_u == 0.0) return 0.0;
  return std::min(1.0, std::exp(log_bc(delta2, var_m, var_u)));
}

double bhattacharyya_derivative(double mu_m, double var_m, double mu_u, double var_u) {
  if (var_m <= 0.0 || var_u <= 0.0) return 0.0;
  const double delta2 = (mu_m - mu_u) * (mu_m - mu_u);
  return std::exp(log_bc(delta2, var_m, var_u)) * dlog_bc(delta2, var_m, var_u);
}

KappaSolve solve_kappa(double mu_m, double var_m, double mu_u, double var_u, double kappa_prime) {
  KappaSolve out;
  if (kappa_prime <= 0.0) return out;
  const double base = bhattacharyya_coefficient(mu_m, var_m, mu_u, var_u);
  double target = base + kappa_prime;
  if (target >= 1.0) {
    out.saturated = true;
    target = kCeiling;
    if (base >= kCeiling) return out;
  }
  auto residual = [&](double k) {
    return bhattacharyya_coefficient(mu_m, var_m + k, mu_u, var_u + k) - target;
  };

  double lo = 0.0;
  double hi = std::max(var_m + var_u, 1e-12);
  for (int i = 0; i < 2000 && residual(hi) < 0.0; ++i) {
    lo = hi;
    hi *= 2.0;
  }

  double k = std::clamp(var_m + var_u, lo, hi);
  double r = residual(k);
  for (out.iterations = 1; out.iterations <= kMaxIterations; ++out.iterations) {
    if (std::abs(r) < kResidualTolerance) break;
    if (r < 0.0) {
      lo = k;
    } else {
      hi = k;
    }
    const double slope = bhattacharyya_derivative(mu_m, var_m + k, mu_u, var_u + k);
    double next = slope > 0.0 ? k - r / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    k = next;
    r = residual(k);
  }
  out.kappa = k;
  out.residual = r;
  return out;
}

Regularizers solve_regularizers(const Eigen::VectorXd& mu_m, const Eigen::VectorXd& var_m,
                                const Eigen::VectorXd& mu_u, const Eigen::VectorXd& var_u,
                                double kappa_prime) {
  if (kappa_prime < 0.0 || kappa_prime >= 1.0) {
    throw ParseError("kappa' must lie in [0, 1)");
  }
  const auto d = mu_m.size();
  Regularizers out;
  out.kappa = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (var_m[j] == 0.0 && var_u[j] == 0.0 && mu_m[j] == mu_u[j]) {
      // Identical point masses: no kappa changes the overlap, and the feature
      // is uninformative, so any shared variance keeps Sigma invertible.
      out.kappa[j] = 1.0;
      out.warnings.push_back("feature " + std::to_string(j) +
                             ": constant in both classes, variance set to 1");
      continue;
    }
    const KappaSolve s = solve_kappa(mu_m[j], var_m[j], mu_u[j], var_u[j], kappa_prime);
    out.kappa[j] = s.kappa;
    if (s.saturated) {
      out.saturated.push_back(static_cast<std::size_t>(j));
      out.warnings.push_back("feature " + std::to_string(j) +
                             ": overlap target unreachable, capped at 1 - 1e-6");
    }
  }
  return out;
}

}  // namespace zeroer
