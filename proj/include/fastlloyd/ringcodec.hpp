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

#ifndef FASTLLOYD_RINGCODEC_HPP
#define FASTLLOYD_RINGCODEC_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fastlloyd/core.hpp"

namespace fastlloyd::ringcodec {

/// Fixed-point matrix over Z_{2^w}. Words live in uint64_t and every
/// operation reduces mod 2^w; overflow wraps silently, which is exactly the
/// ring semantics the masking relies on. Words decode as w-bit
/// two's-complement values scaled by 2^-q.
struct RingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  unsigned w = 64;  // ring bit-width, 32 or 64
  unsigned q = 16;  // fraction bits
  std::vector<std::uint64_t> words;

  RingMatrix() = default;
  RingMatrix(std::size_t r, std::size_t c, unsigned w_, unsigned q_)
      : rows(r), cols(c), w(w_), q(q_), words(r * c, 0) {}

  std::uint64_t mask() const {
    return w == 64 ? ~0ULL : ((1ULL << w) - 1);
  }

  std::uint64_t& at(std::size_t r, std::size_t c) {
    return words[r * cols + c];
  }
  std::uint64_t at(std::size_t r, std::size_t c) const {
    return words[r * cols + c];
  }

  void add_inplace(const RingMatrix& other) {
    if (rows != other.rows || cols != other.cols || w != other.w)
      throw ProtocolViolation("ring add: shape or width mismatch");
    const std::uint64_t m = mask();
    for (std::size_t i = 0; i < words.size(); ++i)
      words[i] = (words[i] + other.words[i]) & m;
  }

  void sub_inplace(const RingMatrix& other) {
    if (rows != other.rows || cols != other.cols || w != other.w)
      throw ProtocolViolation("ring sub: shape or width mismatch");
    const std::uint64_t m = mask();
    for (std::size_t i = 0; i < words.size(); ++i)
      words[i] = (words[i] - other.words[i]) & m;
  }
};

namespace detail {

/// Reduce a signed integer into the ring.
inline std::uint64_t to_ring(std::int64_t v, unsigned w) {
  std::uint64_t u = static_cast<std::uint64_t>(v);
  return w == 64 ? u : (u & ((1ULL << w) - 1));
}

/// Sign-extend a ring word back to a signed integer.
inline std::int64_t from_ring(std::uint64_t u, unsigned w) {
  if (w == 64) return static_cast<std::int64_t>(u);
  std::uint64_t sign_bit = 1ULL << (w - 1);
  if (u & sign_bit) u |= ~((1ULL << w) - 1);
  return static_cast<std::int64_t>(u);
}

/// Nearest integer, ties away from zero. All parties must agree bit-exactly
/// on this, so it is pinned here rather than left to fegetround.
inline std::int64_t round_away(double x) { return std::llround(x); }

}  // namespace detail

/// Round one real value to the fixed-point grid and reduce into the ring.
/// Throws OverflowError when |v * 2^q| does not fit the signed range.
inline std::uint64_t encode_value(double v, unsigned q, unsigned w,
                                  std::size_t index = 0) {
  double scaled = std::ldexp(v, static_cast<int>(q));
  double limit = std::ldexp(1.0, static_cast<int>(w) - 1);
  if (!(std::abs(scaled) < limit) || !std::isfinite(scaled))
    throw OverflowError("encode: value out of ring range at index " +
                        std::to_string(index));
  std::int64_t n = detail::round_away(scaled);
  // Rounding can land exactly on the limit.
  if (w < 64) {
    std::int64_t lim = static_cast<std::int64_t>(1) << (w - 1);
    if (n >= lim || n < -lim)
      throw OverflowError("encode: value out of ring range at index " +
                          std::to_string(index));
  }
  return detail::to_ring(n, w);
}

/// Decode one ring word: sign-extend and scale down by 2^q.
inline double decode_value(std::uint64_t word, unsigned q, unsigned w) {
  return std::ldexp(static_cast<double>(detail::from_ring(word, w)),
                    -static_cast<int>(q));
}

/// Encode a real matrix element-wise.
inline RingMatrix encode(const Matrix& v, unsigned q, unsigned w) {
  RingMatrix out(v.rows, v.cols, w, q);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    out.words[i] = encode_value(v.data[i], q, w, i);
  return out;
}

/// Decode a ring matrix element-wise.
inline Matrix decode(const RingMatrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.words.size(); ++i)
    out.data[i] = decode_value(m.words[i], m.q, m.w);
  return out;
}

/// Quantize one server-side noise draw to a ring word.
inline std::uint64_t quantize_noise(double gamma, unsigned q, unsigned w) {
  return encode_value(gamma, q, w);
}

/// Which aggregated quantity a mask stream protects.
enum class MaskKind : std::uint8_t { RelSums = 0, Counts = 1 };

/// The per-round mask set: M uniform matrices plus their ring total. Any
/// party holding the seed regenerates the set by address; the sum of the
/// masks minus the total is identically zero in the ring.
struct MaskSet {
  std::vector<RingMatrix> masks;  // one per party
  RingMatrix total;
};

/// Derive the full mask set for (round t, kind). Each word is addressed by
/// (t, kind, party, element) so derivation is stateless and race-free.
inline MaskSet derive_masks(const SeededRng& rng, std::uint32_t t,
                            MaskKind kind, std::size_t M, std::size_t rows,
                            std::size_t cols, unsigned w, unsigned q) {
  StreamKind stream = kind == MaskKind::RelSums ? StreamKind::MaskRelSums
                                                : StreamKind::MaskCounts;
  MaskSet set;
  set.masks.reserve(M);
  set.total = RingMatrix(rows, cols, w, q);
  const std::uint64_t m = set.total.mask();
  for (std::size_t party = 0; party < M; ++party) {
    RingMatrix mat(rows, cols, w, q);
    for (std::size_t e = 0; e < mat.words.size(); ++e)
      mat.words[e] = rng.word(stream, t, party, e) & m;
    set.total.add_inplace(mat);
    set.masks.push_back(std::move(mat));
  }
  return set;
}

/// Largest |value| encodable without overflow, in real units.
inline double ring_capacity(unsigned q, unsigned w) {
  return std::ldexp(1.0, static_cast<int>(w) - 1 - static_cast<int>(q));
}

}  // namespace fastlloyd::ringcodec

#endif  // FASTLLOYD_RINGCODEC_HPP
