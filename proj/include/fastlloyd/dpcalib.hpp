// Copyright 2026 The FastLloyd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FASTLLOYD_DPCALIB_HPP
#define FASTLLOYD_DPCALIB_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>

#include "fastlloyd/core.hpp"

namespace fastlloyd::dpcalib {

/// Calibrated noise multipliers and iteration count for one run.
/// sigma is the overall multiplier (the mechanism is (1/sigma)-GDP end to
/// end); sigma_R and sigma_C are its split between the relative-sum and
/// count queries, satisfying 1/sigma_R^2 + 1/sigma_C^2 = 1/sigma^2.
struct NoisePlan {
  double sigma = 0.0;
  double sigma_R = 0.0;
  double sigma_C = 0.0;
  int T = 0;

  /// Per-coordinate Gaussian std for relative sums at iteration t, given the
  /// radius in force at t.
  double std_R(double eta_t) const { return sigma_R * eta_t * std::sqrt(T); }

  /// Gaussian std for counts (sensitivity 1).
  double std_C() const { return sigma_C * std::sqrt(static_cast<double>(T)); }
};

/// Standard normal CDF. std::erfc is accurate to a few ulp, well inside the
/// 1e-12 absolute error the calibration needs.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
}

/// log Phi(x), finite far into the left tail where erfc underflows.
inline double log_normal_cdf(double x) {
  if (x > -25.0) return std::log(normal_cdf(x));
  // asymptotic: erfc(z) ~ exp(-z^2)/(z sqrt(pi)) * (1 - 1/(2 z^2))
  double z = -x * 0.70710678118654752440084436210485;
  return -z * z - std::log(z) - 0.5723649429247001 +  // ln sqrt(pi)
         std::log1p(-0.5 / (z * z)) - 0.6931471805599453;  // ln 1/2
}

/// delta(eps; theta) for the Gaussian trade-off curve:
///   Phi(-eps/theta + theta/2) - e^eps * Phi(-eps/theta - theta/2).
/// Strictly increasing in theta for fixed eps. The second term is assembled
/// in log space so large eps cannot overflow into NaN.
inline double gdp_delta(double epsilon, double theta) {
  double a = -epsilon / theta + theta / 2.0;
  double b = -epsilon / theta - theta / 2.0;
  double log_term = epsilon + log_normal_cdf(b);
  double term = log_term < -745.0 ? 0.0 : std::exp(log_term);
  return normal_cdf(a) - term;
}

/// Minimal noise multiplier sigma = 1/theta with gdp_delta(eps, theta) <=
/// delta, found by monotone bisection on theta to relative tolerance 1e-9.
inline double calibrate_sigma(double epsilon, double delta) {
  if (!(epsilon > 0)) throw InvalidInput("calibrate_sigma: epsilon must be > 0");
  if (!(delta > 0 && delta < 1))
    throw InvalidInput("calibrate_sigma: delta must be in (0, 1)");

  double lo = 1e-8;
  double hi = 100.0;
  // delta(eps; theta) -> 0 as theta -> 0+, so lo is feasible for any target
  // we calibrate for; widen hi until it is infeasible so the root is
  // bracketed.
  while (gdp_delta(epsilon, hi) <= delta) hi *= 2.0;
  if (gdp_delta(epsilon, lo) > delta) lo = 1e-300;
  for (int it = 0; it < 200 && (hi - lo) > 1e-9 * lo; ++it) {
    double mid = 0.5 * (lo + hi);
    if (gdp_delta(epsilon, mid) <= delta)
      lo = mid;
    else
      hi = mid;
  }
  return 1.0 / lo;
}

/// Split the overall multiplier between the relative sum and the count.
inline std::pair<double, double> split_sigma(double sigma, std::size_t d) {
  double root = std::sqrt(1.0 + std::sqrt(4.0 * static_cast<double>(d)));
  double sigma_C = sigma * root;
  double sigma_R = sigma_C / std::pow(4.0 * static_cast<double>(d), 0.25);
  return {sigma_R, sigma_C};
}

/// Per-iteration centroid error budget, as a fraction of the domain
/// half-width.
inline constexpr double kPerIterationErrorBudget = 0.004;

/// Iteration-count heuristic: cap the approximate per-iteration MSE at
/// kPerIterationErrorBudget * B and solve for T, then clamp to [2, 7].
/// T_override bypasses the heuristic (clamped to >= 1; values below 2 are
/// debugging-only territory).
inline int choose_iterations(const ProtocolParams& params, std::size_t total_n,
                             double sigma, double eta) {
  if (params.T_override) return std::max(1, *params.T_override);
  double N = static_cast<double>(total_n);
  double k3 = std::pow(static_cast<double>(params.k), 3.0);
  double comp = 1.0 + std::sqrt(4.0 * static_cast<double>(params.d));
  double raw = 4.0 * N * N * kPerIterationErrorBudget /
               (k3 * eta * eta * sigma * sigma * comp * comp);
  double t = std::floor(raw);
  return static_cast<int>(std::clamp(t, 2.0, 7.0));
}

/// delta = 1/(N ln N). The paper leaves the log base unstated; natural log
/// is used here and isolated so other conventions are a one-line change.
inline double default_delta(std::size_t total_n) {
  if (total_n < 2) throw InvalidInput("default_delta: N must be >= 2");
  double N = static_cast<double>(total_n);
  return 1.0 / (N * std::log(N));
}

/// Full plan for a FastLloyd run: calibrate, split, choose T.
inline NoisePlan make_plan(const ProtocolParams& params, std::size_t total_n,
                           double eta) {
  params.validate_privacy();
  NoisePlan plan;
  plan.sigma = calibrate_sigma(params.epsilon, params.delta);
  auto [sr, sc] = split_sigma(plan.sigma, params.d);
  plan.sigma_R = sr;
  plan.sigma_C = sc;
  plan.T = choose_iterations(params, total_n, plan.sigma, eta);
  return plan;
}

/// Flat text echo for the run report.
inline std::string describe(const NoisePlan& plan) {
  std::ostringstream os;
  os.precision(17);
  os << "sigma = " << plan.sigma << "\n"
     << "sigma_R = " << plan.sigma_R << "\n"
     << "sigma_C = " << plan.sigma_C << "\n"
     << "T = " << plan.T << "\n";
  return os.str();
}

}  // namespace fastlloyd::dpcalib

#endif  // FASTLLOYD_DPCALIB_HPP
