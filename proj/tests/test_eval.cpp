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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "fastlloyd/data.hpp"
#include "fastlloyd/eval.hpp"

using namespace fastlloyd;

namespace {

/// Independent accumulation of the same metric, point-major with explicit
/// index arithmetic, used to cross-check the library path.
double nicv_oracle(const Dataset& points, const Matrix& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.rows; ++j) {
      double dist = 0.0;
      for (std::size_t h = 0; h < points.d; ++h) {
        double diff =
            points.values[i * points.d + h] - centroids.data[j * centroids.cols + h];
        dist += diff * diff;
      }
      if (dist < best) best = dist;
    }
    total += best;
  }
  return total / double(points.n);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("nicv is zero when every point sits on a centroid") {
  Dataset pts(3, 2);
  pts.values = {0.5, 0.5, -0.5, -0.5, 0.5, 0.5};
  Matrix centroids(2, 2);
  centroids.data = {0.5, 0.5, -0.5, -0.5};
  REQUIRE(eval::nicv(pts, centroids) == 0.0);
}

TEST_CASE("nicv at the mean is the biased covariance trace") {
  SeededRng rng(2);
  Dataset pts(500, 3);
  for (std::size_t i = 0; i < pts.values.size(); ++i)
    pts.values[i] = rng.uniform_in(-1.0, 1.0, StreamKind::Generic, i);
  Matrix mean(1, 3);
  for (std::size_t h = 0; h < 3; ++h) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.n; ++i) s += pts.values[i * 3 + h];
    mean.data[h] = s / double(pts.n);
  }
  double trace = 0.0;
  for (std::size_t h = 0; h < 3; ++h) {
    double ss = 0.0;
    for (std::size_t i = 0; i < pts.n; ++i) {
      double diff = pts.values[i * 3 + h] - mean.data[h];
      ss += diff * diff;
    }
    trace += ss / double(pts.n);
  }
  REQUIRE(eval::nicv(pts, mean) == Catch::Approx(trace).epsilon(1e-12));
}

TEST_CASE("nicv matches a brute-force double loop") {
  SeededRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset pts(40 + trial, 2 + trial % 3);
    pts.values.resize(pts.n * pts.d);
    for (std::size_t i = 0; i < pts.values.size(); ++i)
      pts.values[i] = rng.uniform_in(-1.0, 1.0, StreamKind::Generic, trial, i);
    Matrix centroids(3, pts.d);
    for (std::size_t i = 0; i < centroids.data.size(); ++i)
      centroids.data[i] =
          rng.uniform_in(-1.0, 1.0, StreamKind::Generic, 500 + trial, i);
    REQUIRE(eval::nicv(pts, centroids) ==
            Catch::Approx(nicv_oracle(pts, centroids)).margin(1e-12));
  }
}

TEST_CASE("auc follows the trapezoid rule") {
  SECTION("a constant curve is a rectangle") {
    std::vector<std::pair<double, double>> curve = {
        {0.1, 3.0}, {0.25, 3.0}, {0.5, 3.0}, {0.75, 3.0}, {1.0, 3.0}};
    REQUIRE(eval::auc(curve) == Catch::Approx(0.9 * 3.0).epsilon(1e-12));
  }
  SECTION("a line through the origin is a triangle") {
    REQUIRE(eval::auc({{0.0, 0.0}, {1.0, 2.0}}) ==
            Catch::Approx(1.0).epsilon(1e-12));
  }
  SECTION("a hand-computed five-point fixture") {
    // (5+4)/2*.15 + (4+3)/2*.25 + (3+2)/2*.25 + (2+1)/2*.25 = 2.55
    std::vector<std::pair<double, double>> curve = {
        {0.1, 5.0}, {0.25, 4.0}, {0.5, 3.0}, {0.75, 2.0}, {1.0, 1.0}};
    REQUIRE(eval::auc(curve) == Catch::Approx(2.55).epsilon(1e-12));
  }
  SECTION("unsorted or duplicated grids are rejected") {
    REQUIRE_THROWS_AS(eval::auc({{0.5, 1.0}, {0.1, 2.0}}), InvalidInput);
    REQUIRE_THROWS_AS(eval::auc({{0.5, 1.0}, {0.5, 2.0}}), InvalidInput);
    REQUIRE_THROWS_AS(eval::auc({{0.5, 1.0}}), InvalidInput);
  }
}

TEST_CASE("auc is monotone under pointwise domination") {
  SeededRng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<double, double>> lo, hi;
    double eps = 0.1;
    for (int i = 0; i < 5; ++i) {
      double base = rng.uniform_in(0.0, 2.0, StreamKind::Generic, trial, i);
      lo.emplace_back(eps, base);
      hi.emplace_back(eps,
                      base + rng.uniform(StreamKind::Generic, trial, 50 + i));
      eps += 0.2;
    }
    REQUIRE(eval::auc(lo) <= eval::auc(hi));
  }
}

TEST_CASE("sweeps produce a full grid with shared per-run seeds") {
  auto synth = data::generate_timesynth(400, 2, 2, 10);
  ProtocolParams base;
  base.k = 2;
  base.d = 2;
  base.M = 2;
  base.seed = 10;
  base.delta = dpcalib::default_delta(synth.data.n);
  eval::SweepOptions opts;
  opts.algos = {baselines::BaselineKind::Lloyd,
                baselines::BaselineKind::FastLloyd};
  opts.eps_grid = {0.5, 1.0};
  opts.runs = 3;
  auto rows = eval::sweep(base, synth.data, opts);
  REQUIRE(rows.size() == 3 * 2 * 2);
  for (const auto& r : rows) REQUIRE(r.seed == base.seed + r.run);

  SECTION("csv round-trips through the reader") {
    std::string path = temp_path("fl_sweep_roundtrip.csv");
    eval::write_sweep_csv(path, rows);
    auto back = eval::read_sweep_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      REQUIRE(back[i].algo == rows[i].algo);
      REQUIRE(back[i].eps == rows[i].eps);
      REQUIRE(back[i].run == rows[i].run);
      REQUIRE(back[i].nicv == rows[i].nicv);
      REQUIRE(back[i].T == rows[i].T);
      REQUIRE(back[i].seed == rows[i].seed);
    }
    std::remove(path.c_str());
  }

  SECTION("summaries fold cells and emit aucs") {
    auto summary = eval::summarize(rows);
    REQUIRE(summary.cells.size() == 4);  // 2 algos x 2 eps
    for (const auto& c : summary.cells) REQUIRE(c.runs == 3);
    REQUIRE(summary.aucs.size() == 2);
    // noiseless runs still vary across runs because the init seed varies
    for (const auto& c : summary.cells)
      if (c.algo == "lloyd") REQUIRE(c.ci95 >= 0.0);
  }
}

TEST_CASE("sweeping over the wire reports the closed-form byte cost") {
  auto synth = data::generate_timesynth(200, 2, 2, 11);
  ProtocolParams base;
  base.k = 2;
  base.d = 2;
  base.M = 2;
  base.seed = 11;
  base.delta = dpcalib::default_delta(synth.data.n);
  eval::SweepOptions opts;
  opts.algos = {baselines::BaselineKind::FastLloyd};
  opts.eps_grid = {1.0};
  opts.runs = 2;
  opts.use_msa = true;
  auto rows = eval::sweep(base, synth.data, opts);
  for (const auto& r : rows)
    REQUIRE(r.bytes_per_iter ==
            Catch::Approx(2.0 * 2 * 2 * (2 + 1) * 8).epsilon(1e-12));
}

TEST_CASE("clustering beats a single arbitrary centroid on separated data") {
  data::SynthSpec spec;
  spec.n = 1000;
  spec.k_true = 3;
  spec.d = 2;
  spec.separation = 1.0;
  spec.outliers = 0;
  spec.seed = 31;
  auto synth = data::generate_synth(spec);
  ProtocolParams p;
  p.k = 3;
  p.d = 2;
  p.seed = 31;
  auto profile =
      baselines::make_profile(baselines::BaselineKind::Lloyd, p, synth.data.n);
  auto result = baselines::run_central(profile, synth.data);
  Matrix lone(1, 2);
  lone.data = {0.3, -0.4};
  REQUIRE(eval::nicv(synth.data, result.centroids) <
          eval::nicv(synth.data, lone));
}

TEST_CASE("run reports echo the resolved configuration") {
  auto synth = data::generate_timesynth(300, 2, 2, 12);
  ProtocolParams p;
  p.k = 2;
  p.d = 2;
  p.M = 2;
  p.seed = 12;
  p.T_override = 3;
  auto profile = baselines::make_profile(baselines::BaselineKind::Lloyd, p,
                                         synth.data.n);
  auto shards = partition_dataset(synth.data, p.M, SeededRng(p.seed));
  auto result = msa::run_local(profile, shards);
  auto report = eval::make_report("lloyd", profile, synth.data.n, result,
                                  eval::nicv(synth.data,
                                             result.centroids.centroids));
  auto text = report.full_text();
  REQUIRE(text.find("algo = lloyd") != std::string::npos);
  REQUIRE(text.find("seed = 12") != std::string::npos);
  REQUIRE(text.find("T_override = 3") != std::string::npos);
  REQUIRE(text.find("[centroids]") != std::string::npos);
  REQUIRE(text.find("nicv = ") != std::string::npos);
  REQUIRE(text.find("bytes_per_iteration = 192") != std::string::npos);

  // the canonical section is a prefix of the full text and carries no
  // wall-clock figures
  auto canonical = report.canonical_text();
  REQUIRE(text.rfind(canonical, 0) == 0);
  REQUIRE(canonical.find("total_ms") == std::string::npos);
}
