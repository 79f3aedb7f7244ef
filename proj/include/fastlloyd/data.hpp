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

#ifndef FASTLLOYD_DATA_HPP
#define FASTLLOYD_DATA_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fastlloyd/core.hpp"

namespace fastlloyd::data {

enum class SizeRatio { Balanced, Linear };

/// Synthetic dataset recipe: isotropic Gaussian clusters with a separation
/// knob controlling the minimum inter-centroid gap, plus uniform outliers.
struct SynthSpec {
  std::size_t n = 10000;
  std::size_t k_true = 2;
  std::size_t d = 2;
  double separation = 0.5;   // gap >= (1+separation)*(r_i+r_j)*sqrt(d)
  double radius_scale = 1.0;  // shrinks/widens every cluster's std radius
  SizeRatio size_ratio = SizeRatio::Linear;
  int outliers = -1;  // -1: draw uniformly from [0, 100] off the seed
  double B = 1.0;
  std::uint64_t seed = 1;
};

struct SynthResult {
  Dataset data;             // normalized to [-B, B]^d
  std::vector<int> labels;  // generating cluster, -1 for outliers
  Matrix true_centers;      // k_true x d, in normalized coordinates
};

namespace detail {

/// Cluster sizes for n points: balanced, or proportional to 1:2:...:k with
/// largest-remainder rounding so they sum exactly to n.
inline std::vector<std::size_t> cluster_sizes(std::size_t n, std::size_t k,
                                              SizeRatio ratio) {
  std::vector<std::size_t> sizes(k, 0);
  if (ratio == SizeRatio::Balanced) {
    for (std::size_t j = 0; j < k; ++j) sizes[j] = n / k;
    for (std::size_t j = 0; j < n % k; ++j) ++sizes[j];
    return sizes;
  }
  double total = static_cast<double>(k * (k + 1)) / 2.0;
  std::vector<double> frac(k);
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < k; ++j) {
    double exact = static_cast<double>(n) * (j + 1) / total;
    sizes[j] = static_cast<std::size_t>(std::floor(exact));
    frac[j] = exact - std::floor(exact);
    assigned += sizes[j];
  }
  // hand out the remainder by largest fractional part, lowest index first
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % k]];
  return sizes;
}

}  // namespace detail

/// Generate the synthetic benchmark data: rejection-sampled cluster centers
/// with the separation constraint (retrying with radii shrunk by 0.9 when
/// placement gets stuck), Gaussian points, uniform outliers, then a global
/// normalization to [-B, B]^d. Bit-identical for identical specs.
inline SynthResult generate_synth(const SynthSpec& spec) {
  if (spec.k_true < 1) throw InvalidInput("generate_synth: k_true >= 1");
  if (spec.d < 1) throw InvalidInput("generate_synth: d >= 1");
  SeededRng rng(spec.seed);

  int outliers = spec.outliers;
  if (outliers < 0)
    outliers =
        static_cast<int>(rng.word(StreamKind::SynthOutliers, 0xFFFF) % 101);
  if (static_cast<std::size_t>(outliers) >= spec.n)
    throw InvalidInput("generate_synth: outliers >= n");
  std::size_t n_clustered = spec.n - static_cast<std::size_t>(outliers);

  // per-cluster std radii
  std::vector<double> radii(spec.k_true);
  for (std::size_t j = 0; j < spec.k_true; ++j)
    radii[j] = spec.radius_scale *
               rng.uniform_in(0.08, 0.16, StreamKind::SynthCenters, j, 0, 1) *
               2.0 * spec.B;

  // center placement with shrinking retries
  Matrix centers(spec.k_true, spec.d);
  const double box = 0.85 * spec.B;
  bool placed_all = false;
  for (int shrink = 0; shrink < 20 && !placed_all; ++shrink) {
    placed_all = true;
    std::uint64_t attempt = 0;
    for (std::size_t j = 0; j < spec.k_true && placed_all; ++j) {
      bool ok = false;
      while (!ok) {
        if (attempt > 10000) {
          placed_all = false;
          for (double& r : radii) r *= 0.9;
          break;
        }
        for (std::size_t h = 0; h < spec.d; ++h)
          centers.at(j, h) = rng.uniform_in(
              -box, box, StreamKind::SynthCenters,
              (static_cast<std::uint64_t>(shrink) << 40) ^ (attempt * spec.d + h),
              j + 1);
        ++attempt;
        ok = true;
        for (std::size_t p = 0; p < j && ok; ++p) {
          double dist_sq = 0.0;
          for (std::size_t h = 0; h < spec.d; ++h) {
            double diff = centers.at(j, h) - centers.at(p, h);
            dist_sq += diff * diff;
          }
          // radii are per-coordinate stds; a blob's extent in the full
          // space grows with sqrt(d), so the gap requirement does too
          double need = (1.0 + spec.separation) * (radii[j] + radii[p]) *
                        std::sqrt(static_cast<double>(spec.d));
          if (dist_sq < need * need) ok = false;
        }
      }
    }
  }
  if (!placed_all)
    throw InvalidInput("generate_synth: could not separate cluster centers");

  auto sizes =
      detail::cluster_sizes(n_clustered, spec.k_true, spec.size_ratio);

  SynthResult out;
  out.data = Dataset(spec.n, spec.d);
  out.labels.assign(spec.n, -1);
  std::size_t row = 0;
  for (std::size_t j = 0; j < spec.k_true; ++j) {
    for (std::size_t i = 0; i < sizes[j]; ++i, ++row) {
      out.labels[row] = static_cast<int>(j);
      for (std::size_t h = 0; h < spec.d; ++h)
        out.data.values[row * spec.d + h] =
            centers.at(j, h) +
            radii[j] * rng.gaussian(StreamKind::SynthPoints, j,
                                    i * spec.d + h);
    }
  }
  for (int i = 0; i < outliers; ++i, ++row)
    for (std::size_t h = 0; h < spec.d; ++h)
      out.data.values[row * spec.d + h] = rng.uniform_in(
          -spec.B, spec.B, StreamKind::SynthOutliers,
          static_cast<std::uint64_t>(i) * spec.d + h);

  auto normalized = normalize_dataset(out.data, spec.B);
  out.data = std::move(normalized.data);
  out.true_centers = Matrix(spec.k_true, spec.d);
  for (std::size_t j = 0; j < spec.k_true; ++j)
    for (std::size_t h = 0; h < spec.d; ++h)
      out.true_centers.at(j, h) = normalized.map.apply(h, centers.at(j, h));
  return out;
}

/// Balanced clusters, no outliers: the sizing used for timing benchmarks.
inline SynthResult generate_timesynth(std::size_t n, std::size_t k,
                                      std::size_t d, std::uint64_t seed) {
  SynthSpec spec;
  spec.n = n;
  spec.k_true = k;
  spec.d = d;
  spec.separation = 0.5;
  spec.size_ratio = SizeRatio::Balanced;
  spec.outliers = 0;
  spec.seed = seed;
  return generate_synth(spec);
}

}  // namespace fastlloyd::data

#endif  // FASTLLOYD_DATA_HPP
