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

#include <array>
#include <cmath>
#include <cstdint>

#include "fastlloyd/ringcodec.hpp"

using namespace fastlloyd;
using ringcodec::decode_value;
using ringcodec::encode_value;

namespace {

/// Exact round-half-away-from-zero of (n + y) for integer n and double y,
/// done in integer space so no floating-point re-rounding can interfere.
std::int64_t round_away_exact(std::int64_t n, double y) {
  double fy = std::floor(y);
  double frac = y - fy;  // exact for |y| < 2^52
  std::int64_t total = n + static_cast<std::int64_t>(fy);
  if (frac == 0.0) return total;
  if (total >= 0) return frac >= 0.5 ? total + 1 : total;
  return frac <= 0.5 ? total : total + 1;
}

}  // namespace

TEST_CASE("encoding follows the fixed-point definition") {
  REQUIRE(encode_value(1.0, 16, 64) == 65536);
  REQUIRE(encode_value(-0.5, 16, 64) ==
          static_cast<std::uint64_t>(-32768));  // two's complement
  // a half-ulp rounds away from zero
  REQUIRE(encode_value(std::ldexp(1.0, -17), 16, 64) == 1);
  REQUIRE(encode_value(-std::ldexp(1.0, -17), 16, 64) ==
          static_cast<std::uint64_t>(-1));
  // w=32 reduces into 32 bits
  REQUIRE(encode_value(-0.5, 16, 32) == 0xFFFF8000ULL);
}

TEST_CASE("encoding rejects values outside the ring range") {
  REQUIRE_THROWS_AS(encode_value(std::ldexp(1.0, 47), 16, 64), OverflowError);
  REQUIRE_THROWS_AS(encode_value(32768.0, 16, 32), OverflowError);
  REQUIRE_NOTHROW(encode_value(32767.0, 16, 32));
  REQUIRE_THROWS_AS(
      encode_value(std::numeric_limits<double>::infinity(), 16, 64),
      OverflowError);
}

TEST_CASE("decoding inverts encoding on the representable grid") {
  REQUIRE(decode_value(encode_value(0.25, 16, 64), 16, 64) == 0.25);
  REQUIRE(decode_value(0, 16, 64) == 0.0);
  REQUIRE(decode_value(encode_value(-0.5, 16, 32), 16, 32) == -0.5);

  SeededRng rng(1);
  for (int i = 0; i < 20000; ++i) {
    double v = rng.uniform_in(-100.0, 100.0, StreamKind::Generic, i);
    double back = decode_value(encode_value(v, 16, 64), 16, 64);
    REQUIRE(std::abs(back - v) <= std::ldexp(1.0, -17));
  }
}

TEST_CASE("ring arithmetic wraps silently at both widths") {
  for (unsigned w : {32u, 64u}) {
    ringcodec::RingMatrix a(1, 1, w, 16), b(1, 1, w, 16);
    a.words[0] = a.mask();  // -1 in the ring
    b.words[0] = 1;
    a.add_inplace(b);
    REQUIRE(a.words[0] == 0);
    a.sub_inplace(b);
    REQUIRE(a.words[0] == a.mask());
  }
}

TEST_CASE("mask sets cancel and are regenerable by address") {
  SeededRng rng(42);
  auto set_a = ringcodec::derive_masks(rng, 3, ringcodec::MaskKind::RelSums,
                                       4, 2, 5, 64, 16);
  auto set_b = ringcodec::derive_masks(rng, 3, ringcodec::MaskKind::RelSums,
                                       4, 2, 5, 64, 16);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(set_a.masks[i].words == set_b.masks[i].words);

  ringcodec::RingMatrix sum(2, 5, 64, 16);
  for (const auto& m : set_a.masks) sum.add_inplace(m);
  REQUIRE(sum.words == set_a.total.words);

  // sums + masks - total recovers the sums exactly in the ring
  SeededRng vals(9);
  ringcodec::RingMatrix acc(2, 5, 64, 16);
  ringcodec::RingMatrix plain(2, 5, 64, 16);
  for (std::size_t party = 0; party < 4; ++party) {
    ringcodec::RingMatrix x(2, 5, 64, 16);
    for (std::size_t e = 0; e < x.words.size(); ++e)
      x.words[e] = vals.word(StreamKind::Generic, party, e);
    plain.add_inplace(x);
    x.add_inplace(set_a.masks[party]);
    acc.add_inplace(x);
  }
  acc.sub_inplace(set_a.total);
  REQUIRE(acc.words == plain.words);
}

TEST_CASE("mask streams for different rounds and kinds are distinct") {
  SeededRng rng(42);
  auto rel = ringcodec::derive_masks(rng, 1, ringcodec::MaskKind::RelSums, 2,
                                     2, 2, 64, 16);
  auto cnt = ringcodec::derive_masks(rng, 1, ringcodec::MaskKind::Counts, 2,
                                     2, 2, 64, 16);
  auto rel2 = ringcodec::derive_masks(rng, 2, ringcodec::MaskKind::RelSums, 2,
                                      2, 2, 64, 16);
  REQUIRE(rel.masks[0].words != cnt.masks[0].words);
  REQUIRE(rel.masks[0].words != rel2.masks[0].words);
  REQUIRE(rel.masks[0].words != rel.masks[1].words);
}

TEST_CASE("mask words are uniform at both ends of the word") {
  SeededRng rng(7);
  auto set = ringcodec::derive_masks(rng, 0, ringcodec::MaskKind::RelSums, 1,
                                     400, 250, 64, 16);
  const auto& words = set.masks[0].words;  // 100000 words
  auto chi_square = [&](auto bucket_of) {
    std::array<double, 256> counts{};
    for (std::uint64_t w : words) counts[bucket_of(w)] += 1.0;
    double expected = double(words.size()) / 256.0;
    double chi = 0.0;
    for (double c : counts) chi += (c - expected) * (c - expected) / expected;
    return chi;
  };
  // df=255: mean 255, sd ~22.6; accept a generous +/-5 sigma band
  double low_byte = chi_square([](std::uint64_t w) { return w & 0xFF; });
  double high_byte = chi_square([](std::uint64_t w) { return w >> 56; });
  REQUIRE(low_byte > 150.0);
  REQUIRE(low_byte < 400.0);
  REQUIRE(high_byte > 150.0);
  REQUIRE(high_byte < 400.0);
}

TEST_CASE("quantized noise commutes with fixed-point addition") {
  SeededRng rng(3);
  const unsigned q = 16;
  for (int i = 0; i < 20000; ++i) {
    double v = rng.uniform_in(-8.0, 8.0, StreamKind::Generic, 1, i);
    double gamma = 3.0 * rng.gaussian(StreamKind::Generic, 2, i);
    std::int64_t n = std::llround(std::ldexp(v, q));
    double y = std::ldexp(gamma, q);  // exact scaling
    std::int64_t lhs = n + std::llround(y);
    std::int64_t rhs = round_away_exact(n, y);
    REQUIRE(lhs == rhs);
    // and through the ring API
    std::uint64_t ring_lhs =
        (encode_value(v, q, 64) + ringcodec::quantize_noise(gamma, q, 64)) &
        ~0ULL;
    REQUIRE(ring_lhs == static_cast<std::uint64_t>(rhs));
  }
}

TEST_CASE("quantize maps known values to known words") {
  REQUIRE(ringcodec::quantize_noise(0.0, 16, 64) == 0);
  REQUIRE(ringcodec::quantize_noise(1.5 * std::ldexp(1.0, -16), 16, 64) == 2);
  REQUIRE(ringcodec::quantize_noise(-1.5 * std::ldexp(1.0, -16), 16, 64) ==
          static_cast<std::uint64_t>(-2));
}

TEST_CASE("masked aggregation is exact for up to eight parties") {
  SeededRng rng(5);
  const unsigned q = 16, w = 64;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t M = 2 + (trial % 7);
    std::size_t rows = 1 + (trial % 4), cols = 1 + (trial % 5);
    auto masks = ringcodec::derive_masks(rng, trial,
                                         ringcodec::MaskKind::RelSums, M,
                                         rows, cols, w, q);
    // integer oracle: sum of the rounded fixed-point values
    std::vector<std::int64_t> oracle(rows * cols, 0);
    ringcodec::RingMatrix acc(rows, cols, w, q);
    for (std::size_t party = 0; party < M; ++party) {
      Matrix v(rows, cols);
      for (std::size_t e = 0; e < v.data.size(); ++e)
        v.data[e] =
            rng.uniform_in(-50.0, 50.0, StreamKind::Generic, trial, party, e);
      for (std::size_t e = 0; e < v.data.size(); ++e)
        oracle[e] += std::llround(std::ldexp(v.data[e], q));
      auto enc = ringcodec::encode(v, q, w);
      enc.add_inplace(masks.masks[party]);
      acc.add_inplace(enc);
    }
    acc.sub_inplace(masks.total);
    Matrix got = ringcodec::decode(acc);
    for (std::size_t e = 0; e < got.data.size(); ++e)
      REQUIRE(got.data[e] == std::ldexp(double(oracle[e]), -int(q)));
  }
}

TEST_CASE("default ring has room for benchmark-scale sums") {
  // with B=1, q=16, w=64: per-coordinate magnitudes up to N*eta for N=1e9
  // and eta below ~128 stay clear of 2^(w-1-q)
  REQUIRE(ringcodec::ring_capacity(16, 64) == std::ldexp(1.0, 47));
  REQUIRE(1e9 * 100.0 < ringcodec::ring_capacity(16, 64));
  REQUIRE(ringcodec::ring_capacity(16, 32) == 32768.0);
}
