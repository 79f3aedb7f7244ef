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

#ifndef FASTLLOYD_BASELINES_HPP
#define FASTLLOYD_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include "fastlloyd/cluster.hpp"
#include "fastlloyd/core.hpp"
#include "fastlloyd/dpcalib.hpp"
#include "fastlloyd/msa.hpp"

namespace fastlloyd::baselines {

enum class BaselineKind { Lloyd, SuLloyd, GLloyd, FastLloyd };

inline std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Lloyd: return "lloyd";
    case BaselineKind::SuLloyd: return "su";
    case BaselineKind::GLloyd: return "gauss";
    case BaselineKind::FastLloyd: return "fast";
  }
  return "?";
}

inline BaselineKind baseline_from_string(const std::string& s) {
  if (s == "lloyd") return BaselineKind::Lloyd;
  if (s == "su" || s == "sulloyd") return BaselineKind::SuLloyd;
  if (s == "gauss" || s == "glloyd") return BaselineKind::GLloyd;
  if (s == "fast" || s == "fastlloyd") return BaselineKind::FastLloyd;
  throw InvalidInput("unknown algorithm: " + s);
}

/// Non-private Lloyd runs the fixed iteration ceiling unless overridden.
inline constexpr int kLloydDefaultIterations = 7;

/// Gaussian split for absolute sums: with ratio c = sqrt(sqrt(d)/(2 rho)),
/// sigma_C = c * sigma_S under 1/sigma_S^2 + 1/sigma_C^2 = 1/sigma^2.
inline std::pair<double, double> split_sigma_absolute(double sigma,
                                                      std::size_t d,
                                                      double rho) {
  double c = std::sqrt(std::sqrt(static_cast<double>(d)) / (2.0 * rho));
  double sigma_S = sigma * std::sqrt(1.0 + 1.0 / (c * c));
  return {sigma_S, c * sigma_S};
}

/// Iteration rule for the plain Gaussian baseline: cap the per-iteration
/// MSE proxy k^3 d T sigma^2 (2 rho + sqrt(d))^2 / N^2 and clamp to [2, 7].
inline int choose_iterations_gaussian(const ProtocolParams& params,
                                      std::size_t total_n, double sigma,
                                      double rho) {
  if (params.T_override) return std::max(1, *params.T_override);
  double N = static_cast<double>(total_n);
  double k3 = std::pow(static_cast<double>(params.k), 3.0);
  double d = static_cast<double>(params.d);
  double comp = 2.0 * rho + std::sqrt(d);
  double raw = dpcalib::kPerIterationErrorBudget * N * N /
               (k3 * d * sigma * sigma * comp * comp);
  return static_cast<int>(std::clamp(std::floor(raw), 2.0, 7.0));
}

/// Per-iteration Laplace budget split: eps_C = r * eps_S with
/// r = (4 rho^2 / d^3)^(1/3), minimizing the same MSE proxy with Laplace
/// variances under eps_S + eps_C = eps_t.
inline double laplace_split_ratio(std::size_t d, double rho) {
  double d3 = std::pow(static_cast<double>(d), 3.0);
  return std::cbrt(4.0 * rho * rho / d3);
}

/// Iteration rule for the Laplace baseline. The per-iteration budget is
/// eps/T, so the MSE proxy grows as T^2; solving
///   2 k^3 (1+r)^2 (d^3 B^2 + 4 rho^2 / r^2) T^2 / (N eps)^2 <= 0.004
/// for T and clamping to [2, 7].
inline int choose_iterations_laplace(const ProtocolParams& params,
                                     std::size_t total_n, double rho) {
  if (params.T_override) return std::max(1, *params.T_override);
  double N = static_cast<double>(total_n);
  double d = static_cast<double>(params.d);
  double r = laplace_split_ratio(params.d, rho);
  double k3 = std::pow(static_cast<double>(params.k), 3.0);
  double d3B2 = d * d * d * params.B * params.B;
  double denom = 2.0 * k3 * (1.0 + r) * (1.0 + r) *
                 (d3B2 + 4.0 * rho * rho / (r * r));
  double raw = params.epsilon * N *
               std::sqrt(dpcalib::kPerIterationErrorBudget / denom);
  return static_cast<int>(std::clamp(std::floor(raw), 2.0, 7.0));
}

/// Non-private federated Lloyd: absolute sums, no radius constraint, no
/// noise; folding still applies (a no-op for in-range centroids).
inline msa::RunProfile make_lloyd_profile(const ProtocolParams& params) {
  params.validate();
  msa::RunProfile profile;
  profile.params = params;
  profile.T = params.T_override ? std::max(1, *params.T_override)
                                : kLloydDefaultIterations;
  profile.schedule = cluster::RadiusSchedule::unconstrained();
  profile.relative = false;
  profile.noise.assign(profile.T,
                       {msa::NoiseDraw::none(), msa::NoiseDraw::none()});
  profile.plan_echo = {{"T", static_cast<double>(profile.T)}};
  return profile;
}

/// Gaussian noise on absolute sums with the domain sensitivity sqrt(d)*B.
inline msa::RunProfile make_glloyd_profile(const ProtocolParams& params,
                                           std::size_t total_n,
                                           double rho = -1.0) {
  params.validate();
  params.validate_privacy();
  if (rho <= 0) rho = params.B / 2.0;
  msa::RunProfile profile;
  profile.params = params;
  profile.schedule = cluster::RadiusSchedule::unconstrained();
  profile.relative = false;
  double sigma = dpcalib::calibrate_sigma(params.epsilon, params.delta);
  auto [sigma_S, sigma_C] = split_sigma_absolute(sigma, params.d, rho);
  profile.T = choose_iterations_gaussian(params, total_n, sigma, rho);
  double sens = std::sqrt(static_cast<double>(params.d)) * params.B;
  double rootT = std::sqrt(static_cast<double>(profile.T));
  double std_S = sigma_S * sens * rootT;
  double std_C = sigma_C * rootT;
  profile.noise.assign(profile.T, {msa::NoiseDraw::gaussian(std_S),
                                   msa::NoiseDraw::gaussian(std_C)});
  profile.plan_echo = {
      {"sigma", sigma},
      {"sigma_S", sigma_S},
      {"sigma_C", sigma_C},
      {"T", static_cast<double>(profile.T)},
      {"eps_total", params.epsilon},
      {"delta_used", params.delta},
      {"rho", rho},
      {"std_S", std_S},
      {"std_C", std_C},
  };
  return profile;
}

/// Laplace noise on absolute sums with per-iteration budget eps/T split
/// between sums (L1 sensitivity d*B) and counts (sensitivity 1). Pure
/// eps-DP; delta is unused.
inline msa::RunProfile make_sulloyd_profile(const ProtocolParams& params,
                                            std::size_t total_n,
                                            double rho = -1.0) {
  params.validate();
  if (!(params.epsilon > 0)) throw InvalidInput("epsilon must be > 0");
  if (rho <= 0) rho = params.B / 2.0;
  msa::RunProfile profile;
  profile.params = params;
  profile.schedule = cluster::RadiusSchedule::unconstrained();
  profile.relative = false;
  profile.T = choose_iterations_laplace(params, total_n, rho);
  double eps_t = params.epsilon / profile.T;
  double r = laplace_split_ratio(params.d, rho);
  double eps_S = eps_t / (1.0 + r);
  double eps_C = eps_t - eps_S;
  double scale_S = static_cast<double>(params.d) * params.B / eps_S;
  double scale_C = 1.0 / eps_C;
  profile.noise.assign(profile.T, {msa::NoiseDraw::laplace(scale_S),
                                   msa::NoiseDraw::laplace(scale_C)});
  profile.plan_echo = {
      {"T", static_cast<double>(profile.T)},
      {"eps_total", params.epsilon},
      {"delta_used", 0.0},  // pure eps-DP: the Laplace route spends no delta
      {"eps_per_iter", eps_t},
      {"eps_S", eps_S},
      {"eps_C", eps_C},
      {"rho", rho},
      {"laplace_scale_S", scale_S},
      {"laplace_scale_C", scale_C},
  };
  return profile;
}

/// Profile for any of the four algorithms.
inline msa::RunProfile make_profile(BaselineKind kind,
                                    const ProtocolParams& params,
                                    std::size_t total_n, double rho = -1.0,
                                    bool zero_noise = false) {
  switch (kind) {
    case BaselineKind::Lloyd:
      return make_lloyd_profile(params);
    case BaselineKind::SuLloyd: {
      auto p = make_sulloyd_profile(params, total_n, rho);
      if (zero_noise)
        p.noise.assign(p.T, {msa::NoiseDraw::none(), msa::NoiseDraw::none()});
      return p;
    }
    case BaselineKind::GLloyd: {
      auto p = make_glloyd_profile(params, total_n, rho);
      if (zero_noise)
        p.noise.assign(p.T, {msa::NoiseDraw::none(), msa::NoiseDraw::none()});
      return p;
    }
    case BaselineKind::FastLloyd:
      return msa::make_fastlloyd_profile(params, total_n, zero_noise);
  }
  throw InvalidInput("unknown baseline kind");
}

inline msa::ProtocolResult run_lloyd(const ProtocolParams& params,
                                     const std::vector<Dataset>& shards,
                                     const msa::LocalRunOptions& opts = {}) {
  return msa::run_local(make_lloyd_profile(params), shards, opts);
}

inline msa::ProtocolResult run_glloyd(const ProtocolParams& params,
                                      const std::vector<Dataset>& shards,
                                      const msa::LocalRunOptions& opts = {}) {
  std::size_t total_n = 0;
  for (const auto& s : shards) total_n += s.n;
  return msa::run_local(make_glloyd_profile(params, total_n), shards, opts);
}

inline msa::ProtocolResult run_sulloyd(const ProtocolParams& params,
                                       const std::vector<Dataset>& shards,
                                       const msa::LocalRunOptions& opts = {}) {
  std::size_t total_n = 0;
  for (const auto& s : shards) total_n += s.n;
  return msa::run_local(make_sulloyd_profile(params, total_n), shards, opts);
}

/// Single-machine fast path for utility sweeps: the same assignment, update
/// and post-processing math on the union dataset, with the same
/// label-addressed noise draws the aggregator would use, but in real
/// arithmetic (no ring, no transport).
inline CentroidState run_central(const msa::RunProfile& profile,
                                 const Dataset& all_points) {
  const auto& p = profile.params;
  SeededRng rng(p.seed);
  SeededRng noise_rng = rng.derive(kServerNoiseDomain);
  CentroidState state = cluster::sphere_packing_init(p, rng);
  for (std::uint32_t t = 0; t < static_cast<std::uint32_t>(profile.T); ++t) {
    double eta_t = profile.schedule.at(static_cast<int>(t));
    auto labels = cluster::assign(all_points, state, eta_t);
    cluster::LocalUpdate update =
        profile.relative ? cluster::local_update(all_points, labels, state)
                         : cluster::local_update_absolute(all_points, labels,
                                                          p.k);
    cluster::GlobalUpdate global;
    global.sums = update.rel_sums;
    global.counts = update.counts;
    for (std::size_t e = 0; e < global.sums.data.size(); ++e)
      global.sums.data[e] += msa::noise_value(
          noise_rng, StreamKind::ServerNoiseRelSums, t, e,
          profile.noise[t].sums);
    for (std::size_t j = 0; j < p.k; ++j)
      global.counts[j] += msa::noise_value(
          noise_rng, StreamKind::ServerNoiseCounts, t, j,
          profile.noise[t].counts);
    state = profile.relative
                ? cluster::reconstruct_centroids(global, state, eta_t, p.B)
                : cluster::reconstruct_centroids_absolute(global, state, p.B);
  }
  return state;
}

}  // namespace fastlloyd::baselines

#endif  // FASTLLOYD_BASELINES_HPP
