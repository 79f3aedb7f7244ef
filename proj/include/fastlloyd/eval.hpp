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

#ifndef FASTLLOYD_EVAL_HPP
#define FASTLLOYD_EVAL_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fastlloyd/baselines.hpp"
#include "fastlloyd/core.hpp"
#include "fastlloyd/msa.hpp"

namespace fastlloyd::eval {

/// Normalized intra-cluster variance: mean squared distance of every point
/// to its nearest centroid. Evaluation always assigns unconstrained; the
/// radius discard rule is a training-time device only.
inline double nicv(const Dataset& points, const Matrix& centroids) {
  if (points.n == 0) throw InvalidInput("nicv: empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < points.n; ++i) {
    auto x = points.point(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.rows; ++j) {
      auto mu = centroids.row(j);
      double dist = 0.0;
      for (std::size_t h = 0; h < points.d; ++h) {
        double diff = x[h] - mu[h];
        dist += diff * diff;
      }
      best = std::min(best, dist);
    }
    total += best;
  }
  return total / static_cast<double>(points.n);
}

/// Trapezoidal area under a NICV-vs-epsilon curve.
inline double auc(const std::vector<std::pair<double, double>>& nicv_by_eps) {
  if (nicv_by_eps.size() < 2) throw InvalidInput("auc: need >= 2 points");
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < nicv_by_eps.size(); ++i) {
    double de = nicv_by_eps[i + 1].first - nicv_by_eps[i].first;
    if (!(de > 0)) throw InvalidInput("auc: eps values must strictly increase");
    area += 0.5 * (nicv_by_eps[i].second + nicv_by_eps[i + 1].second) * de;
  }
  return area;
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

/// Everything a run produced. The [config], [plan] and [centroids] sections
/// are deterministic given the config seed (byte-comparable across replays
/// and transports); wall-clock figures live in [timing].
struct RunReport {
  std::string algo;
  ProtocolParams params;
  std::size_t total_n = 0;
  std::vector<std::pair<std::string, double>> plan_echo;
  Matrix centroids;
  int T = 0;
  int rounds_per_iteration = 1;
  std::optional<double> nicv_value;
  std::uint64_t bytes_up_per_client = 0;
  std::uint64_t bytes_down_per_client = 0;
  std::uint64_t bytes_per_iteration = 0;  // all clients, both directions
  double total_ms = 0.0;
  double iter_ms_mean = 0.0;

  std::string canonical_text() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    os << "# fastlloyd run report\n";
    os << "[config]\n";
    os << "algo = " << algo << "\n";
    os << "k = " << params.k << "\n";
    os << "d = " << params.d << "\n";
    os << "epsilon = " << num(params.epsilon) << "\n";
    os << "delta = " << num(params.delta) << "\n";
    os << "B = " << num(params.B) << "\n";
    os << "alpha = " << num(params.alpha) << "\n";
    os << "radius_policy = " << to_string(params.radius_policy) << "\n";
    os << "q = " << params.q << "\n";
    os << "w = " << params.w << "\n";
    os << "M = " << params.M << "\n";
    os << "seed = " << params.seed << "\n";
    if (params.T_override) os << "T_override = " << *params.T_override << "\n";
    os << "total_n = " << total_n << "\n";
    os << "[plan]\n";
    for (const auto& [key, value] : plan_echo)
      os << key << " = " << num(value) << "\n";
    os << "[centroids]\n";
    for (std::size_t j = 0; j < centroids.rows; ++j) {
      for (std::size_t h = 0; h < centroids.cols; ++h)
        os << (h ? "," : "") << num(centroids.at(j, h));
      os << "\n";
    }
    return os.str();
  }

  std::string full_text() const {
    std::ostringstream os;
    os << canonical_text();
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    os << "[metrics]\n";
    if (nicv_value) os << "nicv = " << num(*nicv_value) << "\n";
    os << "bytes_per_iteration = " << bytes_per_iteration << "\n";
    os << "bytes_up_per_client = " << bytes_up_per_client << "\n";
    os << "bytes_down_per_client = " << bytes_down_per_client << "\n";
    os << "rounds_per_iteration = " << rounds_per_iteration << "\n";
    os << "[timing]\n";
    os << "total_ms = " << num(total_ms) << "\n";
    os << "iter_ms_mean = " << num(iter_ms_mean) << "\n";
    return os.str();
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report " + path);
    out << full_text();
    if (!out) throw IoError("report write failed: " + path);
  }
};

inline RunReport make_report(const std::string& algo,
                             const msa::RunProfile& profile,
                             std::size_t total_n,
                             const msa::ProtocolResult& result,
                             std::optional<double> nicv_value) {
  RunReport report;
  report.algo = algo;
  report.params = profile.params;
  report.total_n = total_n;
  report.plan_echo = profile.plan_echo;
  report.centroids = result.centroids.centroids;
  report.T = profile.T;
  report.rounds_per_iteration = result.rounds_per_iteration;
  report.nicv_value = nicv_value;
  if (!result.client_stats.empty()) {
    report.bytes_up_per_client = result.client_stats[0].payload_up;
    report.bytes_down_per_client = result.client_stats[0].payload_down;
    std::uint64_t all = 0;
    for (const auto& s : result.client_stats)
      all += s.payload_up + s.payload_down;
    report.bytes_per_iteration = all / static_cast<std::uint64_t>(profile.T);
  }
  report.total_ms = result.total_ms;
  if (!result.iter_ms.empty()) {
    double sum = 0.0;
    for (double v : result.iter_ms) sum += v;
    report.iter_ms_mean = sum / static_cast<double>(result.iter_ms.size());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string algo;
  double eps = 0.0;
  int run = 0;
  double nicv = 0.0;
  double iter_ms_mean = 0.0;
  double bytes_per_iter = 0.0;
  int T = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SweepOptions {
  std::vector<baselines::BaselineKind> algos = {
      baselines::BaselineKind::Lloyd, baselines::BaselineKind::SuLloyd,
      baselines::BaselineKind::GLloyd, baselines::BaselineKind::FastLloyd};
  std::vector<double> eps_grid = {0.1, 0.25, 0.5, 0.75, 1.0};
  int runs = 10;
  bool use_msa = false;  // central fast path unless the wire matters
  double rho = -1.0;
};

/// Per-run seeds are base+run so initialization is shared across algorithms
/// within a run and utility differences are noise-driven.
inline std::vector<SweepRow> sweep(const ProtocolParams& base,
                                   const Dataset& dataset,
                                   const SweepOptions& opts) {
  if (opts.runs < 1) throw InvalidInput("sweep: runs >= 1");
  std::vector<SweepRow> rows;
  for (int run = 0; run < opts.runs; ++run) {
    ProtocolParams run_params = base;
    run_params.seed = base.seed + static_cast<std::uint64_t>(run);
    for (double eps : opts.eps_grid) {
      run_params.epsilon = eps;
      for (auto kind : opts.algos) {
        auto profile =
            baselines::make_profile(kind, run_params, dataset.n, opts.rho);
        SweepRow row;
        row.algo = baselines::to_string(kind);
        row.eps = eps;
        row.run = run;
        row.T = profile.T;
        row.seed = run_params.seed;
        for (const auto& [key, value] : profile.plan_echo)
          if (key == "sigma") row.sigma = value;
        if (opts.use_msa) {
          auto shards =
              partition_dataset(dataset, run_params.M, SeededRng(run_params.seed));
          auto result = msa::run_local(profile, shards);
          row.nicv = nicv(dataset, result.centroids.centroids);
          double sum = 0.0;
          for (double v : result.iter_ms) sum += v;
          row.iter_ms_mean = result.iter_ms.empty()
                                 ? 0.0
                                 : sum / static_cast<double>(result.iter_ms.size());
          std::uint64_t all = 0;
          for (const auto& s : result.client_stats)
            all += s.payload_up + s.payload_down;
          row.bytes_per_iter =
              static_cast<double>(all) / static_cast<double>(profile.T);
        } else {
          auto started = std::chrono::steady_clock::now();
          auto centroids = baselines::run_central(profile, dataset);
          double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started)
                          .count();
          row.nicv = nicv(dataset, centroids.centroids);
          row.iter_ms_mean = ms / static_cast<double>(profile.T);
          row.bytes_per_iter = 0.0;
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline const char* kSweepCsvHeader =
    "algo,eps,run,nicv,iter_ms_mean,bytes_per_iter,T,sigma,seed";

inline void write_sweep_csv(const std::string& path,
                            const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << kSweepCsvHeader << "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%.17g,%.17g,%.17g,%d,%.17g,%llu",
                  r.algo.c_str(), r.eps, r.run, r.nicv, r.iter_ms_mean,
                  r.bytes_per_iter, r.T, r.sigma,
                  static_cast<unsigned long long>(r.seed));
    out << buf << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<SweepRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("algo,", 0) == 0) continue;  // header
    }
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 9)
      throw InvalidInput("bad sweep row in " + path + ": " + line);
    SweepRow r;
    r.algo = cells[0];
    r.eps = std::stod(cells[1]);
    r.run = std::stoi(cells[2]);
    r.nicv = std::stod(cells[3]);
    r.iter_ms_mean = std::stod(cells[4]);
    r.bytes_per_iter = std::stod(cells[5]);
    r.T = std::stoi(cells[6]);
    r.sigma = std::stod(cells[7]);
    r.seed = std::stoull(cells[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Summaries: mean, normal-approximation 95% CI, and per-algorithm AUC.
// ---------------------------------------------------------------------------

struct SummaryRow {
  std::string algo;
  double eps = 0.0;
  double mean_nicv = 0.0;
  double ci95 = 0.0;  // half-width
  int runs = 0;
  // the normal approximation is only trustworthy from ~30 runs up
  bool ci_indicative() const { return runs < 30; }
};

struct AucRow {
  std::string algo;
  double auc_value = 0.0;
};

struct Summary {
  std::vector<SummaryRow> cells;
  std::vector<AucRow> aucs;
};

inline Summary summarize(const std::vector<SweepRow>& rows) {
  std::map<std::pair<std::string, double>, std::vector<double>> cells;
  for (const auto& r : rows) cells[{r.algo, r.eps}].push_back(r.nicv);
  Summary summary;
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  for (const auto& [key, values] : cells) {
    SummaryRow row;
    row.algo = key.first;
    row.eps = key.second;
    row.runs = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean_nicv = sum / values.size();
    if (values.size() >= 2) {
      double ss = 0.0;
      for (double v : values) ss += (v - row.mean_nicv) * (v - row.mean_nicv);
      double sd = std::sqrt(ss / (values.size() - 1));
      row.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
    }
    summary.cells.push_back(row);
    curves[row.algo].emplace_back(row.eps, row.mean_nicv);
  }
  for (auto& [algo, curve] : curves) {
    std::sort(curve.begin(), curve.end());
    if (curve.size() >= 2) summary.aucs.push_back({algo, auc(curve)});
  }
  return summary;
}

inline void write_summary_csv(const std::string& path,
                              const Summary& summary) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "algo,eps,mean_nicv,ci95,runs,ci_quality\n";
  char buf[256];
  for (const auto& c : summary.cells) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%d,%s",
                  c.algo.c_str(), c.eps, c.mean_nicv, c.ci95, c.runs,
                  c.ci_indicative() ? "indicative" : "normal");
    out << buf << "\n";
  }
  out << "algo,auc\n";
  for (const auto& a : summary.aucs) {
    std::snprintf(buf, sizeof buf, "%s,%.17g", a.algo.c_str(), a.auc_value);
    out << buf << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace fastlloyd::eval

#endif  // FASTLLOYD_EVAL_HPP
