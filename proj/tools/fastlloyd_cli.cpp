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

// Command-line front end: gen / run / sweep / bench / summary.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fastlloyd/fastlloyd.hpp"

namespace fl = fastlloyd;

namespace {

struct ParamFlags {
  std::optional<std::string> config_path;
  std::optional<std::size_t> k, d, clients;
  std::optional<double> eps, delta, bound, alpha, rho;
  std::optional<std::string> policy;
  std::optional<unsigned> q, w;
  std::optional<std::uint64_t> seed;
  std::optional<int> iters;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "flat key=value config file (flags override)");
    cmd->add_option("--k", k, "cluster count");
    cmd->add_option("--d", d, "dimension");
    cmd->add_option("--clients", clients, "client count M");
    cmd->add_option("--eps", eps, "privacy budget epsilon");
    cmd->add_option("--delta", delta,
                    "failure probability (default 1/(N ln N))");
    cmd->add_option("--B", bound, "domain half-width");
    cmd->add_option("--alpha", alpha, "radius scale factor");
    cmd->add_option("--policy", policy, "radius policy: step|constant");
    cmd->add_option("--q", q, "fixed-point fraction bits");
    cmd->add_option("--w", w, "ring width: 32|64");
    cmd->add_option("--seed", seed, "shared 64-bit seed");
    cmd->add_option("--iters", iters, "iteration count override");
    cmd->add_option("--rho", rho, "baseline error-analysis constant");
  }

  /// Precedence: flag > FASTLLOYD_SEED env > config file > defaults.
  fl::ProtocolParams resolve() const {
    fl::ProtocolParams p;
    if (config_path) p = fl::load_config(*config_path);
    if (const char* env = std::getenv("FASTLLOYD_SEED"))
      p.seed = std::strtoull(env, nullptr, 10);
    if (k) p.k = *k;
    if (d) p.d = *d;
    if (clients) p.M = *clients;
    if (eps) p.epsilon = *eps;
    if (delta) p.delta = *delta;
    if (bound) p.B = *bound;
    if (alpha) p.alpha = *alpha;
    if (policy) p.radius_policy = fl::radius_policy_from_string(*policy);
    if (q) p.q = *q;
    if (w) p.w = *w;
    if (seed) p.seed = *seed;
    if (iters) p.T_override = *iters;
    return p;
  }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

/// "k=2,d=2,n=10000[,sep=..][,ratio=..][,outliers=..][,seed=..]"
fl::data::SynthSpec parse_synth_spec(const std::string& text,
                                     std::uint64_t default_seed, double B) {
  fl::data::SynthSpec spec;
  spec.seed = default_seed;
  spec.B = B;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw fl::InvalidInput("bad synth item: " + item);
    std::string key = item.substr(0, eq);
    std::string val = item.substr(eq + 1);
    if (key == "k") spec.k_true = std::stoul(val);
    else if (key == "d") spec.d = std::stoul(val);
    else if (key == "n") spec.n = std::stoul(val);
    else if (key == "sep") spec.separation = std::stod(val);
    else if (key == "rscale") spec.radius_scale = std::stod(val);
    else if (key == "outliers") spec.outliers = std::stoi(val);
    else if (key == "seed") spec.seed = std::stoull(val);
    else if (key == "ratio")
      spec.size_ratio = val == "balanced" ? fl::data::SizeRatio::Balanced
                                          : fl::data::SizeRatio::Linear;
    else throw fl::InvalidInput("unknown synth key: " + key);
  }
  return spec;
}

struct EndpointFlag {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

EndpointFlag parse_endpoint(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos)
    throw fl::InvalidInput("endpoint must be host:port, got " + s);
  EndpointFlag ep;
  ep.host = s.substr(0, colon);
  if (ep.host.empty() || ep.host == "0.0.0.0") ep.host = "127.0.0.1";
  ep.port = static_cast<std::uint16_t>(std::stoul(s.substr(colon + 1)));
  return ep;
}

// --------------------------------------------------------------------------
// gen
// --------------------------------------------------------------------------

struct GenOpts {
  std::string out;
  std::string shard_prefix;
  std::size_t n = 10000, k = 2, d = 2, shards = 0;
  double sep = 0.5, B = 1.0;
  int outliers = -1;
  std::string ratio = "linear";
  std::uint64_t seed = 1;
  bool timesynth = false;
  bool labels = false;
};

int cmd_gen(const GenOpts& o) {
  fl::data::SynthResult result;
  if (o.timesynth) {
    result = fl::data::generate_timesynth(o.n, o.k, o.d, o.seed);
  } else {
    fl::data::SynthSpec spec;
    spec.n = o.n;
    spec.k_true = o.k;
    spec.d = o.d;
    spec.separation = o.sep;
    spec.outliers = o.outliers;
    spec.size_ratio = o.ratio == "balanced" ? fl::data::SizeRatio::Balanced
                                            : fl::data::SizeRatio::Linear;
    spec.seed = o.seed;
    spec.B = o.B;
    result = fl::data::generate_synth(spec);
  }
  fl::save_csv(o.out, result.data, o.labels ? &result.labels : nullptr);
  std::printf("wrote %zu points (d=%zu) to %s\n", result.data.n,
              result.data.d, o.out.c_str());
  if (o.shards > 0) {
    auto shards = fl::partition_dataset(result.data, o.shards,
                                        fl::SeededRng(o.seed));
    for (std::size_t i = 0; i < shards.size(); ++i) {
      std::string path = o.shard_prefix + std::to_string(i) + ".csv";
      fl::save_csv(path, shards[i]);
      std::printf("wrote shard %zu (%zu points) to %s\n", i, shards[i].n,
                  path.c_str());
    }
  }
  return 0;
}

// --------------------------------------------------------------------------
// run
// --------------------------------------------------------------------------

struct RunOpts {
  ParamFlags params;
  std::string algo = "fast";
  std::string role = "local";
  std::string data_path;
  std::string synth_spec;
  std::string listen, connect;
  std::string out;
  std::size_t party = 0;
  std::size_t total_n = 0;  // required for server/client roles
  double latency_ms = 0.0;
  int timeout_ms = 30000;
  bool normalize = true;
  bool label_col = false;
  bool zero_noise = false;
  std::string dump_centroids;  // per-iteration trajectory CSV
};

void write_trajectory(const std::string& path,
                      const std::vector<fl::Matrix>& trajectory) {
  std::ofstream out(path);
  if (!out) throw fl::IoError("cannot write " + path);
  out << "iteration,cluster";
  if (!trajectory.empty())
    for (std::size_t h = 0; h < trajectory[0].cols; ++h) out << ",c" << h;
  out << "\n";
  char buf[64];
  for (std::size_t t = 0; t < trajectory.size(); ++t)
    for (std::size_t j = 0; j < trajectory[t].rows; ++j) {
      out << t << "," << j;
      for (std::size_t h = 0; h < trajectory[t].cols; ++h) {
        std::snprintf(buf, sizeof buf, "%.17g", trajectory[t].at(j, h));
        out << "," << buf;
      }
      out << "\n";
    }
  if (!out) throw fl::IoError("write failed: " + path);
}

fl::Dataset load_run_dataset(const RunOpts& o, const fl::ProtocolParams& p) {
  if (!o.synth_spec.empty()) {
    auto spec = parse_synth_spec(o.synth_spec, p.seed, p.B);
    return fl::data::generate_synth(spec).data;
  }
  if (o.data_path.empty())
    throw fl::InvalidInput("run: provide --data or --synth");
  auto csv = fl::load_csv(o.data_path, o.label_col);
  if (o.normalize) return fl::normalize_dataset(csv.data, p.B).data;
  return csv.data;
}

fl::msa::RunProfile build_profile(const RunOpts& o, fl::ProtocolParams params,
                                  std::size_t total_n) {
  auto kind = fl::baselines::baseline_from_string(o.algo);
  // delta defaults to 1/(N ln N) when the flag and config leave it unset
  if (!o.params.delta && total_n >= 2 &&
      (kind == fl::baselines::BaselineKind::FastLloyd ||
       kind == fl::baselines::BaselineKind::GLloyd))
    params.delta = fl::dpcalib::default_delta(total_n);
  double rho = o.params.rho ? *o.params.rho : -1.0;
  return fl::baselines::make_profile(kind, params, total_n, rho,
                                     o.zero_noise);
}

void print_report_line(const fl::eval::RunReport& r) {
  std::printf("algo=%s T=%d", r.algo.c_str(), r.T);
  if (r.nicv_value) std::printf(" nicv=%.6g", *r.nicv_value);
  std::printf(" bytes/iter=%llu iter_ms=%.3f total_ms=%.1f\n",
              static_cast<unsigned long long>(r.bytes_per_iteration),
              r.iter_ms_mean, r.total_ms);
}

int cmd_run_local(const RunOpts& o) {
  fl::ProtocolParams params = o.params.resolve();
  fl::Dataset all = load_run_dataset(o, params);
  if (all.d != params.d && !o.params.d && o.synth_spec.empty())
    params.d = all.d;  // take the dimension from the file
  if (all.d != params.d) {
    if (!o.synth_spec.empty())
      params.d = all.d;
    else
      throw fl::InvalidInput("dataset dimension " + std::to_string(all.d) +
                             " != configured d " + std::to_string(params.d));
  }
  if (!o.synth_spec.empty()) {
    // synth string carries k/d/n
    auto spec = parse_synth_spec(o.synth_spec, params.seed, params.B);
    if (!o.params.k) params.k = spec.k_true;
    params.d = spec.d;
  }
  auto profile = build_profile(o, params, all.n);
  profile.record_trajectory = !o.dump_centroids.empty();
  params = profile.params;
  auto shards = fl::partition_dataset(all, params.M, fl::SeededRng(params.seed));
  fl::msa::LocalRunOptions run_opts;
  run_opts.latency_ms = o.latency_ms;
  run_opts.timeout_ms = o.timeout_ms;
  auto result = fl::msa::run_local(profile, shards, run_opts);
  auto report = fl::eval::make_report(
      o.algo, profile, all.n, result,
      fl::eval::nicv(all, result.centroids.centroids));
  if (!o.out.empty()) report.write(o.out);
  if (!o.dump_centroids.empty())
    write_trajectory(o.dump_centroids, result.trajectory);
  print_report_line(report);
  return 0;
}

int cmd_run_server(const RunOpts& o) {
  fl::ProtocolParams params = o.params.resolve();
  if (o.total_n < 1)
    throw fl::InvalidInput("server role needs --total-n");
  auto profile = build_profile(o, params, o.total_n);
  auto ep = parse_endpoint(o.listen.empty() ? "0.0.0.0:9000" : o.listen);
  fl::msa::TcpListener listener(ep.port);
  std::fprintf(stderr, "server: listening on port %u for %zu clients\n",
               listener.port(), profile.params.M);
  std::vector<std::unique_ptr<fl::msa::TcpChannel>> channels;
  std::vector<fl::msa::FrameChannel*> peers;
  for (std::size_t i = 0; i < profile.params.M; ++i) {
    channels.push_back(std::make_unique<fl::msa::TcpChannel>(
        listener.accept_fd(o.timeout_ms), o.latency_ms, o.timeout_ms));
    peers.push_back(channels.back().get());
  }
  fl::msa::run_server(fl::msa::make_server_config(profile), peers);
  std::fprintf(stderr, "server: run complete\n");
  return 0;
}

int cmd_run_client(const RunOpts& o) {
  fl::ProtocolParams params = o.params.resolve();
  if (o.total_n < 1)
    throw fl::InvalidInput("client role needs --total-n");
  if (o.data_path.empty())
    throw fl::InvalidInput("client role needs --data <shard.csv>");
  auto csv = fl::load_csv(o.data_path, o.label_col);
  fl::Dataset shard =
      o.normalize ? fl::normalize_dataset(csv.data, params.B).data : csv.data;
  auto profile = build_profile(o, params, o.total_n);
  if (shard.d != profile.params.d)
    throw fl::InvalidInput("shard dimension != configured d");
  auto ep = parse_endpoint(o.connect.empty() ? "127.0.0.1:9000" : o.connect);
  fl::msa::TcpChannel channel(fl::msa::tcp_connect(ep.host, ep.port,
                                                   o.timeout_ms),
                              o.latency_ms, o.timeout_ms);
  auto outcome = fl::msa::run_client(profile, shard, o.party, channel);

  // Per-client traffic is symmetric, so the run-wide accounting follows
  // from this client's counters.
  fl::msa::ProtocolResult result;
  result.centroids = outcome.centroids;
  result.iter_ms = outcome.iter_ms;
  result.client_stats.assign(profile.params.M, outcome.stats);
  for (double v : outcome.iter_ms) result.total_ms += v;
  auto report = fl::eval::make_report(o.algo, profile, o.total_n, result,
                                      std::nullopt);
  if (!o.out.empty()) report.write(o.out);
  print_report_line(report);
  return 0;
}

int cmd_run(const RunOpts& o) {
  if (o.role == "local") return cmd_run_local(o);
  if (o.role == "server") return cmd_run_server(o);
  if (o.role == "client") return cmd_run_client(o);
  throw fl::InvalidInput("unknown role: " + o.role);
}

// --------------------------------------------------------------------------
// sweep
// --------------------------------------------------------------------------

struct SweepOpts {
  ParamFlags params;
  std::string data_path;
  std::string synth_spec;
  std::string algos = "lloyd,su,gauss,fast";
  std::string eps_grid = "0.1,0.25,0.5,0.75,1.0";
  int runs = 10;
  bool use_msa = false;
  bool normalize = true;
  bool label_col = false;
  std::string out;
};

int cmd_sweep(const SweepOpts& o) {
  fl::ProtocolParams params = o.params.resolve();
  fl::Dataset all;
  if (!o.synth_spec.empty()) {
    auto spec = parse_synth_spec(o.synth_spec, params.seed, params.B);
    all = fl::data::generate_synth(spec).data;
    if (!o.params.k) params.k = spec.k_true;
    params.d = spec.d;
  } else if (!o.data_path.empty()) {
    auto csv = fl::load_csv(o.data_path, o.label_col);
    all = o.normalize ? fl::normalize_dataset(csv.data, params.B).data
                      : csv.data;
    params.d = all.d;
  } else {
    throw fl::InvalidInput("sweep: provide --data or --synth");
  }
  if (!o.params.delta && all.n >= 2)
    params.delta = fl::dpcalib::default_delta(all.n);

  fl::eval::SweepOptions sweep_opts;
  sweep_opts.algos.clear();
  for (const auto& name : split(o.algos, ','))
    sweep_opts.algos.push_back(fl::baselines::baseline_from_string(name));
  sweep_opts.eps_grid.clear();
  for (const auto& e : split(o.eps_grid, ','))
    sweep_opts.eps_grid.push_back(std::stod(e));
  sweep_opts.runs = o.runs;
  sweep_opts.use_msa = o.use_msa;
  sweep_opts.rho = o.params.rho ? *o.params.rho : -1.0;

  auto rows = fl::eval::sweep(params, all, sweep_opts);
  if (!o.out.empty()) {
    fl::eval::write_sweep_csv(o.out, rows);
    std::printf("wrote %zu sweep rows to %s\n", rows.size(), o.out.c_str());
  }
  auto summary = fl::eval::summarize(rows);
  for (const auto& c : summary.cells)
    std::printf("%-6s eps=%-5g nicv=%.6g +/- %.3g (%d runs)\n",
                c.algo.c_str(), c.eps, c.mean_nicv, c.ci95, c.runs);
  for (const auto& a : summary.aucs)
    std::printf("%-6s auc=%.6g\n", a.algo.c_str(), a.auc_value);
  return 0;
}

// --------------------------------------------------------------------------
// bench
// --------------------------------------------------------------------------

struct BenchOpts {
  ParamFlags params;
  std::string algo = "fast";
  std::string n_grid = "10000,100000";
  std::string k_grid = "2,5";
  std::string d_grid = "2,5";
  int min_iters = 100;
  double latency_ms = 0.0;
  std::string out;
};

int cmd_bench(const BenchOpts& o) {
  fl::ProtocolParams base = o.params.resolve();
  auto kind = fl::baselines::baseline_from_string(o.algo);
  std::FILE* csv = nullptr;
  if (!o.out.empty()) {
    csv = std::fopen(o.out.c_str(), "w");
    if (!csv) throw fl::IoError("cannot write " + o.out);
    std::fprintf(csv, "n,k,d,iters,iter_ms_mean,bytes_per_iter\n");
  }
  std::printf("%-8s %-3s %-3s %-8s %-12s %s\n", "n", "k", "d", "iters",
              "iter_ms", "bytes/iter");
  for (const auto& ns : split(o.n_grid, ',')) {
    for (const auto& ks : split(o.k_grid, ',')) {
      for (const auto& ds : split(o.d_grid, ',')) {
        fl::ProtocolParams params = base;
        std::size_t n = std::stoul(ns);
        params.k = std::stoul(ks);
        params.d = std::stoul(ds);
        if (!o.params.delta) params.delta = fl::dpcalib::default_delta(n);
        auto synth = fl::data::generate_timesynth(n, params.k, params.d,
                                                  params.seed);
        auto shards = fl::partition_dataset(synth.data, params.M,
                                            fl::SeededRng(params.seed));
        double rho = o.params.rho ? *o.params.rho : -1.0;
        auto profile = fl::baselines::make_profile(kind, params, n, rho);
        fl::msa::LocalRunOptions run_opts;
        run_opts.latency_ms = o.latency_ms;
        std::vector<double> iter_ms;
        std::uint64_t bytes_per_iter = 0;
        while (static_cast<int>(iter_ms.size()) < o.min_iters) {
          auto result = fl::msa::run_local(profile, shards, run_opts);
          iter_ms.insert(iter_ms.end(), result.iter_ms.begin(),
                         result.iter_ms.end());
          std::uint64_t all = 0;
          for (const auto& s : result.client_stats)
            all += s.payload_up + s.payload_down;
          bytes_per_iter = all / static_cast<std::uint64_t>(profile.T);
        }
        double mean = 0.0;
        for (double v : iter_ms) mean += v;
        mean /= static_cast<double>(iter_ms.size());
        std::printf("%-8zu %-3zu %-3zu %-8zu %-12.3f %llu\n", n, params.k,
                    params.d, iter_ms.size(), mean,
                    static_cast<unsigned long long>(bytes_per_iter));
        if (csv)
          std::fprintf(csv, "%zu,%zu,%zu,%zu,%.6f,%llu\n", n, params.k,
                       params.d, iter_ms.size(), mean,
                       static_cast<unsigned long long>(bytes_per_iter));
      }
    }
  }
  if (csv) std::fclose(csv);
  return 0;
}

// --------------------------------------------------------------------------
// summary
// --------------------------------------------------------------------------

struct SummaryOpts {
  std::string in;
  std::string out;
};

int cmd_summary(const SummaryOpts& o) {
  auto rows = fl::eval::read_sweep_csv(o.in);
  auto summary = fl::eval::summarize(rows);
  if (!o.out.empty()) fl::eval::write_summary_csv(o.out, summary);
  for (const auto& c : summary.cells)
    std::printf("%-6s eps=%-5g nicv=%.6g +/- %.3g (%d runs)\n",
                c.algo.c_str(), c.eps, c.mean_nicv, c.ci95, c.runs);
  for (const auto& a : summary.aucs)
    std::printf("%-6s auc=%.6g\n", a.algo.c_str(), a.auc_value);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FastLloyd: federated differentially private k-means"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate synthetic datasets");
  gen_cmd->add_option("--out", gen.out, "output CSV")->required();
  gen_cmd->add_option("--n", gen.n, "total points");
  gen_cmd->add_option("--k", gen.k, "generating clusters");
  gen_cmd->add_option("--d", gen.d, "dimension");
  gen_cmd->add_option("--sep", gen.sep, "separation knob");
  gen_cmd->add_option("--outliers", gen.outliers,
                      "outlier count (-1: random in [0,100])");
  gen_cmd->add_option("--ratio", gen.ratio, "linear|balanced");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--B", gen.B, "domain half-width");
  gen_cmd->add_flag("--labels", gen.labels, "append label column");
  gen_cmd->add_flag("--timesynth", gen.timesynth,
                    "balanced timing variant, no outliers");
  gen_cmd->add_option("--shards", gen.shards, "also write this many shards");
  gen_cmd->add_option("--shard-prefix", gen.shard_prefix,
                      "shard file prefix");

  RunOpts run;
  auto* run_cmd = app.add_subcommand("run", "run one clustering protocol");
  run.params.add_to(run_cmd);
  run_cmd->add_option("--algo", run.algo, "lloyd|su|gauss|fast");
  run_cmd->add_option("--role", run.role, "local|server|client");
  run_cmd->add_option("--data", run.data_path, "dataset or shard CSV");
  run_cmd->add_option("--synth", run.synth_spec,
                      "inline synth spec, e.g. k=2,d=2,n=10000");
  run_cmd->add_option("--listen", run.listen, "server bind host:port");
  run_cmd->add_option("--connect", run.connect, "server address host:port");
  run_cmd->add_option("--party", run.party, "client index in [0, M)");
  run_cmd->add_option("--total-n", run.total_n,
                      "union dataset size (server/client roles)");
  run_cmd->add_option("--latency-ms", run.latency_ms,
                      "injected delay per send");
  run_cmd->add_option("--timeout-ms", run.timeout_ms, "round timeout");
  run_cmd->add_option("--out", run.out, "report file");
  run_cmd->add_flag("!--no-normalize", run.normalize,
                    "skip input normalization");
  run_cmd->add_flag("--label-col", run.label_col,
                    "dataset CSV carries a trailing label column");
  run_cmd->add_flag("--zero-noise", run.zero_noise,
                    "disable DP noise (testing)");
  run_cmd->add_option("--dump-centroids", run.dump_centroids,
                      "write the per-iteration centroid trajectory CSV");

  SweepOpts sweep;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "NICV over an epsilon grid, many runs");
  sweep.params.add_to(sweep_cmd);
  sweep_cmd->add_option("--data", sweep.data_path, "dataset CSV");
  sweep_cmd->add_option("--synth", sweep.synth_spec, "inline synth spec");
  sweep_cmd->add_option("--algos", sweep.algos, "comma list of algorithms");
  sweep_cmd->add_option("--eps-grid", sweep.eps_grid, "comma list of eps");
  sweep_cmd->add_option("--runs", sweep.runs, "repetitions per cell");
  sweep_cmd->add_flag("--msa", sweep.use_msa,
                      "run over the loopback transport instead of the "
                      "central fast path");
  sweep_cmd->add_flag("!--no-normalize", sweep.normalize,
                      "skip input normalization");
  sweep_cmd->add_flag("--label-col", sweep.label_col,
                      "dataset CSV carries a trailing label column");
  sweep_cmd->add_option("--out", sweep.out, "sweep CSV output");

  BenchOpts bench;
  auto* bench_cmd =
      app.add_subcommand("bench", "per-iteration runtime/communication");
  bench.params.add_to(bench_cmd);
  bench_cmd->add_option("--algo", bench.algo, "algorithm to time");
  bench_cmd->add_option("--n-grid", bench.n_grid, "comma list of N");
  bench_cmd->add_option("--k-grid", bench.k_grid, "comma list of k");
  bench_cmd->add_option("--d-grid", bench.d_grid, "comma list of d");
  bench_cmd->add_option("--min-iters", bench.min_iters,
                        "iterations to average over");
  bench_cmd->add_option("--latency-ms", bench.latency_ms,
                        "injected delay per send");
  bench_cmd->add_option("--out", bench.out, "bench CSV output");

  SummaryOpts summary;
  auto* summary_cmd =
      app.add_subcommand("summary", "fold a sweep CSV into mean/CI/AUC");
  summary_cmd->add_option("--in", summary.in, "sweep CSV")->required();
  summary_cmd->add_option("--out", summary.out, "summary CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*run_cmd) return cmd_run(run);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*bench_cmd) return cmd_bench(bench);
    if (*summary_cmd) return cmd_summary(summary);
  } catch (const fl::InvalidInput& e) {
    std::fprintf(stderr, "error (invalid input): %s\n", e.what());
    return 2;
  } catch (const fl::ProtocolViolation& e) {
    std::fprintf(stderr, "error (protocol): %s\n", e.what());
    return 3;
  } catch (const fl::RoundTimeout& e) {
    std::fprintf(stderr, "error (timeout): %s\n", e.what());
    return 3;
  } catch (const fl::IoError& e) {
    std::fprintf(stderr, "error (io): %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
