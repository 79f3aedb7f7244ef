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
#include <map>

#include "fastlloyd/baselines.hpp"
#include "fastlloyd/data.hpp"
#include "fastlloyd/eval.hpp"

using namespace fastlloyd;

TEST_CASE("linear size ratio hits exact proportions") {
  data::SynthSpec spec;
  spec.n = 1000;
  spec.k_true = 4;
  spec.d = 2;
  spec.outliers = 0;
  spec.size_ratio = data::SizeRatio::Linear;
  spec.seed = 3;
  auto result = data::generate_synth(spec);
  std::map<int, int> sizes;
  for (int label : result.labels) ++sizes[label];
  REQUIRE(sizes[0] == 100);
  REQUIRE(sizes[1] == 200);
  REQUIRE(sizes[2] == 300);
  REQUIRE(sizes[3] == 400);
}

TEST_CASE("balanced sizing splits evenly at benchmark scales") {
  auto a = data::generate_timesynth(10000, 2, 2, 5);
  std::map<int, int> sizes_a;
  for (int label : a.labels) ++sizes_a[label];
  REQUIRE(sizes_a[0] == 5000);
  REQUIRE(sizes_a[1] == 5000);

  auto b = data::generate_timesynth(100000, 5, 2, 5);
  std::map<int, int> sizes_b;
  for (int label : b.labels) ++sizes_b[label];
  for (int j = 0; j < 5; ++j) REQUIRE(sizes_b[j] == 20000);
}

TEST_CASE("every generated point lies in the normalized domain") {
  data::SynthSpec spec;
  spec.n = 2000;
  spec.k_true = 3;
  spec.d = 4;
  spec.outliers = 25;
  spec.seed = 8;
  auto result = data::generate_synth(spec);
  REQUIRE(result.data.n == 2000);
  for (double v : result.data.values) {
    REQUIRE(v >= -spec.B);
    REQUIRE(v <= spec.B);
  }
  int outlier_count = 0;
  for (int label : result.labels)
    if (label < 0) ++outlier_count;
  REQUIRE(outlier_count == 25);
}

TEST_CASE("generation is bit-identical per spec") {
  data::SynthSpec spec;
  spec.n = 500;
  spec.k_true = 4;
  spec.d = 3;
  spec.seed = 123;
  auto a = data::generate_synth(spec);
  auto b = data::generate_synth(spec);
  REQUIRE(a.data.values == b.data.values);
  REQUIRE(a.labels == b.labels);
  REQUIRE(a.true_centers == b.true_centers);
}

TEST_CASE("unset outlier count is drawn from [0, 100] off the seed") {
  data::SynthSpec spec;
  spec.n = 1000;
  spec.k_true = 2;
  spec.d = 2;
  spec.outliers = -1;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    spec.seed = seed;
    auto result = data::generate_synth(spec);
    int outlier_count = 0;
    for (int label : result.labels)
      if (label < 0) ++outlier_count;
    REQUIRE(outlier_count >= 0);
    REQUIRE(outlier_count <= 100);
  }
}

TEST_CASE("well-separated clusters are recoverable by plain clustering") {
  data::SynthSpec spec;
  spec.n = 3000;
  spec.k_true = 3;
  spec.d = 2;
  spec.separation = 1.2;
  spec.outliers = 0;
  spec.size_ratio = data::SizeRatio::Balanced;
  spec.seed = 21;
  auto synth = data::generate_synth(spec);

  ProtocolParams p;
  p.k = 3;
  p.d = 2;
  p.M = 2;
  p.seed = 21;
  auto profile = baselines::make_profile(baselines::BaselineKind::Lloyd, p,
                                         synth.data.n);
  auto result = baselines::run_central(profile, synth.data);

  double at_truth = eval::nicv(synth.data, synth.true_centers);
  double at_result = eval::nicv(synth.data, result.centroids);
  REQUIRE(at_result <= at_truth + 0.05);
}

TEST_CASE("impossible separation requests fail after bounded retries") {
  data::SynthSpec spec;
  spec.n = 100;
  spec.k_true = 8;
  spec.d = 1;
  spec.separation = 60.0;
  spec.outliers = 0;
  spec.seed = 2;
  REQUIRE_THROWS_AS(data::generate_synth(spec), InvalidInput);
}

TEST_CASE("timesynth has no outliers and balanced labels") {
  auto synth = data::generate_timesynth(999, 4, 3, 77);
  REQUIRE(synth.data.n == 999);
  std::map<int, int> sizes;
  for (int label : synth.labels) {
    REQUIRE(label >= 0);
    ++sizes[label];
  }
  // remainder is spread across the first clusters
  REQUIRE(sizes[0] + sizes[1] + sizes[2] + sizes[3] == 999);
  for (int j = 0; j < 4; ++j) REQUIRE(std::abs(sizes[j] - 250) <= 1);
}
