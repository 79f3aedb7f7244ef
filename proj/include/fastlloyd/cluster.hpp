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

#ifndef FASTLLOYD_CLUSTER_HPP
#define FASTLLOYD_CLUSTER_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "fastlloyd/core.hpp"

namespace fastlloyd::cluster {

/// Label for points further than the radius from every centroid.
inline constexpr std::int32_t kDiscarded = -1;

/// Noisy counts at or below this hold the previous centroid instead of
/// dividing by a near-zero (or negative) denominator.
inline constexpr double kMinCount = 1.0;

/// Radius constraint per iteration. "Step" uses half the domain diagonal at
/// iteration 0 and the steady radius afterwards.
struct RadiusSchedule {
  RadiusPolicy policy = RadiusPolicy::Step;
  double eta = 0.0;   // steady radius
  double eta0 = 0.0;  // iteration-0 radius
  double beta = 0.0;  // domain diagonal sqrt(d) * 2B

  double at(int iteration) const { return iteration == 0 ? eta0 : eta; }

  /// A schedule that never discards or clips (baselines, oracles).
  static RadiusSchedule unconstrained() {
    RadiusSchedule s;
    s.policy = RadiusPolicy::Constant;
    s.eta = s.eta0 = s.beta = std::numeric_limits<double>::infinity();
    return s;
  }
};

/// Per-cluster relative sums (k x d) and counts (k) computed on one shard.
struct LocalUpdate {
  Matrix rel_sums;            // k x d
  std::vector<double> counts;  // k
};

/// Aggregated (and possibly noised) sums and counts after the global step.
struct GlobalUpdate {
  Matrix sums;                 // k x d
  std::vector<double> counts;  // k
};

/// Dimension-aware radius heuristic: eta = alpha * beta / (2 k^{1/d}) with
/// beta the domain diagonal.
inline RadiusSchedule compute_radius(const ProtocolParams& params) {
  RadiusSchedule s;
  s.policy = params.radius_policy;
  s.beta = std::sqrt(static_cast<double>(params.d)) * 2.0 * params.B;
  double kroot = std::pow(static_cast<double>(params.k),
                          1.0 / static_cast<double>(params.d));
  s.eta = params.alpha * s.beta / (2.0 * kroot);
  s.eta0 = params.radius_policy == RadiusPolicy::Step ? s.beta / 2.0 : s.eta;
  return s;
}

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t h = 0; h < a.size(); ++h) {
    double diff = a[h] - b[h];
    s += diff * diff;
  }
  return s;
}

/// Try to place k points in [-(B-a), B-a]^d, pairwise >= 2a apart, with at
/// most 100 attempts per point. `step` salts the draw so each probe of the
/// radius search sees fresh samples.
inline bool try_pack(const ProtocolParams& params, const SeededRng& rng,
                     double a, std::uint64_t step, Matrix& out) {
  const double half = params.B - a;
  if (half < 0) return false;
  out = Matrix(params.k, params.d);
  const double min_sq = 4.0 * a * a;
  for (std::size_t j = 0; j < params.k; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      for (std::size_t h = 0; h < params.d; ++h) {
        std::uint64_t lbl = ((step * params.k + j) * 100 +
                             static_cast<std::uint64_t>(attempt)) *
                                params.d +
                            h;
        out.at(j, h) = rng.uniform_in(-half, half, StreamKind::Init, lbl);
      }
      placed = true;
      for (std::size_t p = 0; p < j && placed; ++p)
        if (sq_dist(out.row(j), out.row(p)) < min_sq) placed = false;
    }
    if (!placed) return false;
  }
  return true;
}

}  // namespace detail

struct InitResult {
  CentroidState state;
  double radius = 0.0;  // the packing radius the search settled on
};

/// Data-independent initialization: binary-search the largest packing radius
/// a for which rejection sampling places all k centroids at pairwise
/// distance >= 2a and >= a from the boundary. Deterministic given the seed,
/// so every client computes the same initial centroids.
inline InitResult sphere_packing_init_detailed(const ProtocolParams& params,
                                               const SeededRng& rng) {
  InitResult out;
  out.state.iteration = 0;
  double lo = 0.0, hi = params.B;
  Matrix best;
  bool have_best = false;
  for (int step = 0; step < 30; ++step) {
    double mid = 0.5 * (lo + hi);
    Matrix candidate;
    if (detail::try_pack(params, rng, mid, static_cast<std::uint64_t>(step),
                         candidate)) {
      best = std::move(candidate);
      have_best = true;
      out.radius = mid;
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!have_best) {
    // a -> 0 always succeeds; retry once with a tiny radius.
    out.radius = params.B * 1e-9;
    if (!detail::try_pack(params, rng, out.radius, 31, best))
      throw InvalidInput("sphere_packing_init: cannot place centroids");
  }
  out.state.centroids = std::move(best);
  return out;
}

inline CentroidState sphere_packing_init(const ProtocolParams& params,
                                         const SeededRng& rng) {
  return sphere_packing_init_detailed(params, rng).state;
}

/// Nearest-centroid assignment with a strict radius cutoff: points at
/// distance >= eta_t from their nearest centroid are discarded. Ties break
/// to the lowest cluster index.
inline std::vector<std::int32_t> assign(const Dataset& points,
                                        const CentroidState& centroids,
                                        double eta_t) {
  const std::size_t k = centroids.centroids.rows;
  std::vector<std::int32_t> labels(points.n, kDiscarded);
  const double eta_sq = eta_t * eta_t;
  for (std::size_t i = 0; i < points.n; ++i) {
    auto x = points.point(i);
    double best = std::numeric_limits<double>::infinity();
    std::int32_t best_j = kDiscarded;
    for (std::size_t j = 0; j < k; ++j) {
      double dist = detail::sq_dist(x, centroids.centroids.row(j));
      if (dist < best) {
        best = dist;
        best_j = static_cast<std::int32_t>(j);
      }
    }
    if (std::isinf(eta_t) || best < eta_sq) labels[i] = best_j;
  }
  return labels;
}

/// Relative local update: per-cluster sum of (x - previous centroid) plus
/// counts. Discarded points contribute nothing. Summation is in point order
/// so replays are bit-identical.
inline LocalUpdate local_update(const Dataset& points,
                                const std::vector<std::int32_t>& labels,
                                const CentroidState& centroids) {
  const std::size_t k = centroids.centroids.rows;
  LocalUpdate u;
  u.rel_sums = Matrix(k, points.d);
  u.counts.assign(k, 0.0);
  for (std::size_t i = 0; i < points.n; ++i) {
    std::int32_t j = labels[i];
    if (j == kDiscarded) continue;
    auto x = points.point(i);
    auto mu = centroids.centroids.row(static_cast<std::size_t>(j));
    auto row = u.rel_sums.row(static_cast<std::size_t>(j));
    for (std::size_t h = 0; h < points.d; ++h) row[h] += x[h] - mu[h];
    u.counts[static_cast<std::size_t>(j)] += 1.0;
  }
  return u;
}

/// Absolute-sum local update used by the unconstrained baselines.
inline LocalUpdate local_update_absolute(const Dataset& points,
                                         const std::vector<std::int32_t>& labels,
                                         std::size_t k) {
  LocalUpdate u;
  u.rel_sums = Matrix(k, points.d);
  u.counts.assign(k, 0.0);
  for (std::size_t i = 0; i < points.n; ++i) {
    std::int32_t j = labels[i];
    if (j == kDiscarded) continue;
    auto x = points.point(i);
    auto row = u.rel_sums.row(static_cast<std::size_t>(j));
    for (std::size_t h = 0; h < points.d; ++h) row[h] += x[h];
    u.counts[static_cast<std::size_t>(j)] += 1.0;
  }
  return u;
}

/// Fold a coordinate into [-B, B]. In-range values pass through unchanged;
/// out-of-range values go through the periodic fold
///   y = (x + B) mod 2B;  if y > B then y = 2B - y;  return y - B
/// which lands in range and preserves the distance to the nearest boundary.
inline double fold(double x, double B) {
  if (x >= -B && x <= B) return x;
  double y = std::fmod(x + B, 2.0 * B);
  if (y < 0) y += 2.0 * B;
  if (y > B) y = 2.0 * B - y;
  return y - B;
}

/// Rescale a displacement to length eta_t if it is longer.
inline void clip_displacement(std::span<double> delta, double eta_t) {
  double norm_sq = 0.0;
  for (double v : delta) norm_sq += v * v;
  if (norm_sq > eta_t * eta_t && norm_sq > 0.0) {
    double scale = eta_t / std::sqrt(norm_sq);
    for (double& v : delta) v *= scale;
  }
}

/// Post-process a noisy relative update into the next centroids:
/// divide by counts (holding clusters with counts <= kMinCount), shift by
/// the previous centroid, clip the displacement to eta_t, fold into range.
inline CentroidState reconstruct_centroids(const GlobalUpdate& noisy,
                                           const CentroidState& prev,
                                           double eta_t, double B) {
  const std::size_t k = prev.centroids.rows;
  const std::size_t d = prev.centroids.cols;
  CentroidState next;
  next.iteration = prev.iteration + 1;
  next.centroids = Matrix(k, d);
  std::vector<double> delta(d);
  for (std::size_t j = 0; j < k; ++j) {
    auto mu_prev = prev.centroids.row(j);
    if (noisy.counts[j] <= kMinCount) {
      for (std::size_t h = 0; h < d; ++h)
        next.centroids.at(j, h) = mu_prev[h];
      continue;
    }
    for (std::size_t h = 0; h < d; ++h)
      delta[h] = noisy.sums.at(j, h) / noisy.counts[j];
    if (!std::isinf(eta_t)) clip_displacement(delta, eta_t);
    for (std::size_t h = 0; h < d; ++h)
      next.centroids.at(j, h) = fold(mu_prev[h] + delta[h], B);
  }
  return next;
}

/// Baseline post-processing: centroid = sums / counts directly (no shift,
/// no clipping), fold applied, empty clusters hold.
inline CentroidState reconstruct_centroids_absolute(const GlobalUpdate& noisy,
                                                    const CentroidState& prev,
                                                    double B) {
  const std::size_t k = prev.centroids.rows;
  const std::size_t d = prev.centroids.cols;
  CentroidState next;
  next.iteration = prev.iteration + 1;
  next.centroids = Matrix(k, d);
  for (std::size_t j = 0; j < k; ++j) {
    auto mu_prev = prev.centroids.row(j);
    if (noisy.counts[j] <= kMinCount) {
      for (std::size_t h = 0; h < d; ++h)
        next.centroids.at(j, h) = mu_prev[h];
      continue;
    }
    for (std::size_t h = 0; h < d; ++h)
      next.centroids.at(j, h) =
          fold(noisy.sums.at(j, h) / noisy.counts[j], B);
  }
  return next;
}

}  // namespace fastlloyd::cluster

#endif  // FASTLLOYD_CLUSTER_HPP
