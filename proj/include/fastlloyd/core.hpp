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

#ifndef FASTLLOYD_CORE_HPP
#define FASTLLOYD_CORE_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastlloyd {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto distinct exit codes.
// ---------------------------------------------------------------------------

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct OverflowError : std::overflow_error {
  using std::overflow_error::overflow_error;
};

struct ProtocolViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RoundTimeout : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Basic containers
// ---------------------------------------------------------------------------

/// Dense row-major matrix of doubles. All cluster/centroid state uses this.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

/// A single observation. Used at API boundaries (CSV, generators); bulk
/// storage lives in Dataset's flat buffer.
struct Point {
  std::vector<double> coords;
};

/// n points of dimension d, row-major.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;  // n*d, row-major

  Dataset() = default;
  Dataset(std::size_t n_, std::size_t d_) : n(n_), d(d_), values(n_ * d_) {}

  std::span<const double> point(std::size_t i) const {
    return {values.data() + i * d, d};
  }
  std::span<double> point(std::size_t i) {
    return {values.data() + i * d, d};
  }

  void push_back(std::span<const double> p) {
    if (d == 0) d = p.size();
    if (p.size() != d) throw InvalidInput("point dimension mismatch");
    values.insert(values.end(), p.begin(), p.end());
    ++n;
  }
};

/// Radius schedule selector ("Constant" keeps one radius throughout,
/// "Step" starts with half the domain diagonal).
enum class RadiusPolicy { Constant, Step };

inline std::string to_string(RadiusPolicy p) {
  return p == RadiusPolicy::Constant ? "constant" : "step";
}

inline RadiusPolicy radius_policy_from_string(const std::string& s) {
  if (s == "constant" || s == "Constant") return RadiusPolicy::Constant;
  if (s == "step" || s == "Step") return RadiusPolicy::Step;
  throw InvalidInput("unknown radius_policy: " + s);
}

/// Everything needed to make a run deterministic.
struct ProtocolParams {
  std::size_t k = 2;         // cluster count
  std::size_t d = 2;         // dimension
  double epsilon = 1.0;      // privacy budget
  double delta = 1e-5;       // failure probability
  double B = 1.0;            // domain half-width after normalization
  double alpha = 0.8;        // radius scale factor
  RadiusPolicy radius_policy = RadiusPolicy::Step;
  unsigned q = 16;           // fixed-point fraction bits
  unsigned w = 64;           // ring bit-width, 32 or 64
  std::size_t M = 2;         // client count
  std::uint64_t seed = 1;    // shared seed
  std::optional<int> T_override;

  void validate() const {
    if (k < 1) throw InvalidInput("k must be >= 1");
    if (d < 1) throw InvalidInput("d must be >= 1");
    if (M < 1) throw InvalidInput("M must be >= 1");
    if (!(B > 0)) throw InvalidInput("B must be > 0");
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw InvalidInput("alpha must be in (0, 1]");
    if (w != 32 && w != 64) throw InvalidInput("w must be 32 or 64");
    if (q >= w) throw InvalidInput("q must be < w");
  }

  void validate_privacy() const {
    if (!(epsilon > 0)) throw InvalidInput("epsilon must be > 0");
    if (!(delta > 0 && delta < 1))
      throw InvalidInput("delta must be in (0, 1)");
  }
};

/// Current noisy centroids, carried across iterations.
struct CentroidState {
  Matrix centroids;   // k x d
  int iteration = 0;  // completed Lloyd rounds
};

// ---------------------------------------------------------------------------
// SeededRng: a counter-mode PRF keyed by (seed, labels). There is no mutable
// stream state; any party holding the seed can regenerate any sub-stream by
// address, which is the precondition for mask cancellation in the
// aggregation protocol. A deployment would swap in a keyed cryptographic PRF
// with the same addressing.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Stream kinds keep unrelated draws domain-separated even when the other
/// labels collide.
enum class StreamKind : std::uint64_t {
  MaskRelSums = 1,
  MaskCounts = 2,
  ServerNoiseRelSums = 3,
  ServerNoiseCounts = 4,
  Init = 5,
  Partition = 6,
  SynthCenters = 7,
  SynthPoints = 8,
  SynthOutliers = 9,
  Generic = 10,
};

class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// The PRF word at address (kind, a, b, c). Identical (seed, labels) give
  /// the identical word on every party.
  std::uint64_t word(StreamKind kind, std::uint64_t a = 0,
                     std::uint64_t b = 0, std::uint64_t c = 0) const {
    using detail::mix64;
    std::uint64_t h = mix64(seed_ ^ 0xA5A5A5A55A5A5A5AULL);
    h = mix64(h ^ static_cast<std::uint64_t>(kind));
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
  }

  /// Uniform double in [0, 1).
  double uniform(StreamKind kind, std::uint64_t a = 0, std::uint64_t b = 0,
                 std::uint64_t c = 0) const {
    return static_cast<double>(word(kind, a, b, c) >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform_in(double lo, double hi, StreamKind kind, std::uint64_t a = 0,
                    std::uint64_t b = 0, std::uint64_t c = 0) const {
    return lo + (hi - lo) * uniform(kind, a, b, c);
  }

  /// Standard normal via Box-Muller on two PRF words. Addressable and
  /// platform-independent, unlike std::normal_distribution.
  double gaussian(StreamKind kind, std::uint64_t a = 0, std::uint64_t b = 0,
                  std::uint64_t c = 0) const {
    // u1 in (0, 1], u2 in [0, 1)
    double u1 =
        (static_cast<double>(word(kind, a, b, c * 2) >> 11) + 1.0) * 0x1.0p-53;
    double u2 =
        static_cast<double>(word(kind, a, b, c * 2 + 1) >> 11) * 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// Zero-mean Laplace with scale b, via inverse CDF.
  double laplace(double b, StreamKind kind, std::uint64_t a = 0,
                 std::uint64_t b2 = 0, std::uint64_t c = 0) const {
    double u = uniform(kind, a, b2, c) - 0.5;  // (-0.5, 0.5)
    double s = u < 0 ? -1.0 : 1.0;
    double au = std::min(std::abs(u), 0.5 - 1e-17);
    return -b * s * std::log1p(-2.0 * au);
  }

  /// Distinct key for a derived purpose (e.g. the server noise source).
  SeededRng derive(std::uint64_t label) const {
    return SeededRng(detail::mix64(seed_ ^ detail::mix64(label)));
  }

 private:
  std::uint64_t seed_;
};

/// Label for deriving the server's noise key from a run seed. The derived key
/// is handed to the server; the mask seed itself never crosses that boundary.
inline constexpr std::uint64_t kServerNoiseDomain = 0x5EEDF00DDEADBEEFULL;

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Per-dimension affine map kept so callers can round-trip back to raw units.
struct AffineMap {
  std::vector<double> scale;   // d
  std::vector<double> offset;  // d; normalized = scale*x + offset

  double apply(std::size_t dim, double x) const {
    return scale[dim] * x + offset[dim];
  }
  double invert(std::size_t dim, double y) const {
    return scale[dim] != 0.0 ? (y - offset[dim]) / scale[dim] : y;
  }
};

struct NormalizedDataset {
  Dataset data;
  AffineMap map;
};

/// Affinely map each dimension so min -> -B and max -> +B. A constant
/// dimension maps to 0.
inline NormalizedDataset normalize_dataset(const Dataset& raw,
                                           double B = 1.0) {
  if (raw.n == 0) throw InvalidInput("normalize_dataset: empty dataset");
  NormalizedDataset out;
  out.data = Dataset(raw.n, raw.d);
  out.map.scale.assign(raw.d, 0.0);
  out.map.offset.assign(raw.d, 0.0);
  for (std::size_t j = 0; j < raw.d; ++j) {
    double mn = raw.values[j], mx = raw.values[j];
    for (std::size_t i = 1; i < raw.n; ++i) {
      mn = std::min(mn, raw.values[i * raw.d + j]);
      mx = std::max(mx, raw.values[i * raw.d + j]);
    }
    if (mx > mn) {
      out.map.scale[j] = 2.0 * B / (mx - mn);
      out.map.offset[j] = -B - out.map.scale[j] * mn;
    } else {
      out.map.scale[j] = 0.0;  // constant dimension -> 0
      out.map.offset[j] = 0.0;
    }
    for (std::size_t i = 0; i < raw.n; ++i) {
      double v = out.map.apply(j, raw.values[i * raw.d + j]);
      out.data.values[i * raw.d + j] = std::clamp(v, -B, B);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partitioning
// ---------------------------------------------------------------------------

/// Random balanced split into M shards: Fisher-Yates on indices, then deal.
/// Shard sizes differ by at most one and the union equals the input.
inline std::vector<Dataset> partition_dataset(const Dataset& data,
                                              std::size_t M,
                                              const SeededRng& rng) {
  if (M < 1) throw InvalidInput("partition_dataset: M must be >= 1");
  std::vector<std::size_t> idx(data.n);
  for (std::size_t i = 0; i < data.n; ++i) idx[i] = i;
  for (std::size_t i = data.n; i > 1; --i) {
    std::size_t j = rng.word(StreamKind::Partition, i) % i;
    std::swap(idx[i - 1], idx[j]);
  }
  std::vector<Dataset> shards(M);
  for (auto& s : shards) s.d = data.d;
  for (std::size_t i = 0; i < data.n; ++i)
    shards[i % M].push_back(data.point(idx[i]));
  return shards;
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
  const char* b = s.c_str();
  char* end = nullptr;
  out = std::strtod(b, &end);
  if (end == b) return false;
  while (*end != '\0') {
    if (!std::isspace(static_cast<unsigned char>(*end))) return false;
    ++end;
  }
  return true;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace detail

/// One point per row, comma-separated decimal floats. A non-numeric first row
/// is treated as a header and skipped. With `last_col_is_label`, the final
/// column is returned separately.
struct CsvData {
  Dataset data;
  std::vector<int> labels;  // empty unless last_col_is_label
};

inline CsvData load_csv(const std::string& path,
                        bool last_col_is_label = false) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  CsvData out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    std::vector<double> vals;
    vals.reserve(cells.size());
    bool numeric = true;
    for (const auto& c : cells) {
      double v;
      if (!detail::parse_double(c, v)) {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (first && !numeric) {
      first = false;  // header row
      continue;
    }
    first = false;
    if (!numeric)
      throw InvalidInput("non-numeric row in " + path + ": " + line);
    if (last_col_is_label) {
      if (vals.size() < 2)
        throw InvalidInput("label column requested but row has < 2 cells");
      out.labels.push_back(static_cast<int>(vals.back()));
      vals.pop_back();
    }
    out.data.push_back(vals);
  }
  if (out.data.n == 0) throw InvalidInput("no data rows in " + path);
  return out;
}

inline void save_csv(const std::string& path, const Dataset& data,
                     const std::vector<int>* labels = nullptr) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  char buf[64];
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t j = 0; j < data.d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.values[i * data.d + j]);
      out << (j ? "," : "") << buf;
    }
    if (labels) out << "," << (*labels)[i];
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Flat `key = value` config files mirroring ProtocolParams field names.
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_config_text(
    std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto issp = [](unsigned char c) { return std::isspace(c); };
      while (!s.empty() && issp(s.front())) s.erase(s.begin());
      while (!s.empty() && issp(s.back())) s.pop_back();
      return s;
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

inline void apply_config(ProtocolParams& p,
                         const std::map<std::string, std::string>& kv) {
  auto get_u64 = [](const std::string& v) {
    return static_cast<std::uint64_t>(std::stoull(v));
  };
  for (const auto& [key, val] : kv) {
    if (key == "k") p.k = get_u64(val);
    else if (key == "d") p.d = get_u64(val);
    else if (key == "epsilon") p.epsilon = std::stod(val);
    else if (key == "delta") p.delta = std::stod(val);
    else if (key == "B") p.B = std::stod(val);
    else if (key == "alpha") p.alpha = std::stod(val);
    else if (key == "radius_policy") p.radius_policy = radius_policy_from_string(val);
    else if (key == "q") p.q = static_cast<unsigned>(get_u64(val));
    else if (key == "w") p.w = static_cast<unsigned>(get_u64(val));
    else if (key == "M") p.M = get_u64(val);
    else if (key == "seed") p.seed = get_u64(val);
    else if (key == "T_override") p.T_override = std::stoi(val);
    // unknown keys are ignored so configs can carry orchestration extras
  }
}

inline ProtocolParams load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  ProtocolParams p;
  apply_config(p, parse_config_text(in));
  return p;
}

}  // namespace fastlloyd

#endif  // FASTLLOYD_CORE_HPP
