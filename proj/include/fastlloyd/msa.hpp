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

#ifndef FASTLLOYD_MSA_HPP
#define FASTLLOYD_MSA_HPP

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cassert>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "fastlloyd/cluster.hpp"
#include "fastlloyd/core.hpp"
#include "fastlloyd/dpcalib.hpp"
#include "fastlloyd/ringcodec.hpp"

namespace fastlloyd::msa {

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr char kMagic[4] = {'F', 'L', 'M', 'A'};

enum class MsgKind : std::uint8_t {
  RelSums = 0,
  Counts = 1,
  NoisedResult = 2,
};

/// One protocol message: header + row-major little-endian ring words.
/// Header layout (15 bytes): magic[4] | version u8 | round u32 | kind u8 |
/// rows u16 | cols u16 | width u8, all little-endian.
struct MsaMessage {
  std::uint32_t round = 0;
  MsgKind kind = MsgKind::RelSums;
  ringcodec::RingMatrix payload;

  std::size_t payload_bytes() const {
    return payload.words.size() * (payload.w / 8);
  }

  std::vector<std::uint8_t> serialize() const {
    if (payload.rows > 0xFFFF || payload.cols > 0xFFFF)
      throw ProtocolViolation("message shape exceeds wire limits");
    std::vector<std::uint8_t> out;
    out.reserve(15 + payload_bytes());
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kWireVersion);
    append_u32(out, round);
    out.push_back(static_cast<std::uint8_t>(kind));
    append_u16(out, static_cast<std::uint16_t>(payload.rows));
    append_u16(out, static_cast<std::uint16_t>(payload.cols));
    out.push_back(static_cast<std::uint8_t>(payload.w));
    const unsigned bytes = payload.w / 8;
    for (std::uint64_t word : payload.words)
      for (unsigned b = 0; b < bytes; ++b)
        out.push_back(static_cast<std::uint8_t>(word >> (8 * b)));
    return out;
  }

  /// Parse one message starting at `offset`, advancing it. The fraction-bit
  /// count is not on the wire; the caller supplies its configured q.
  static MsaMessage parse(std::span<const std::uint8_t> buf,
                          std::size_t& offset, unsigned q) {
    auto need = [&](std::size_t n) {
      if (buf.size() - offset < n)
        throw ProtocolViolation("truncated message");
    };
    need(15);
    if (std::memcmp(buf.data() + offset, kMagic, 4) != 0)
      throw ProtocolViolation("bad magic");
    offset += 4;
    std::uint8_t version = buf[offset++];
    if (version != kWireVersion)
      throw ProtocolViolation("unsupported version " +
                              std::to_string(version));
    MsaMessage msg;
    msg.round = read_u32(buf, offset);
    std::uint8_t kind = buf[offset++];
    if (kind > 2) throw ProtocolViolation("unknown message kind");
    msg.kind = static_cast<MsgKind>(kind);
    std::uint16_t rows = read_u16(buf, offset);
    std::uint16_t cols = read_u16(buf, offset);
    std::uint8_t width = buf[offset++];
    if (width != 32 && width != 64)
      throw ProtocolViolation("unsupported ring width");
    msg.payload = ringcodec::RingMatrix(rows, cols, width, q);
    const unsigned bytes = width / 8;
    need(static_cast<std::size_t>(rows) * cols * bytes);
    for (auto& word : msg.payload.words) {
      word = 0;
      for (unsigned b = 0; b < bytes; ++b)
        word |= static_cast<std::uint64_t>(buf[offset++]) << (8 * b);
    }
    return msg;
  }

 private:
  static void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  static void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b)
      out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  static std::uint16_t read_u16(std::span<const std::uint8_t> buf,
                                std::size_t& off) {
    std::uint16_t v = static_cast<std::uint16_t>(
        buf[off] | (static_cast<std::uint16_t>(buf[off + 1]) << 8));
    off += 2;
    return v;
  }
  static std::uint32_t read_u32(std::span<const std::uint8_t> buf,
                                std::size_t& off) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= static_cast<std::uint32_t>(buf[off + b]) << (8 * b);
    off += 4;
    return v;
  }
};

// ---------------------------------------------------------------------------
// Framing: every write is one u32-little-endian length prefix plus body.
// The loopback and TCP transports share these helpers so their bytes are
// identical.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxFrameBytes = 1u << 26;

inline std::vector<std::uint8_t> wrap_frame(
    std::span<const std::uint8_t> body) {
  if (body.size() > kMaxFrameBytes) throw ProtocolViolation("frame too large");
  std::vector<std::uint8_t> out;
  out.reserve(4 + body.size());
  std::uint32_t len = static_cast<std::uint32_t>(body.size());
  for (int b = 0; b < 4; ++b)
    out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline std::vector<std::uint8_t> unwrap_frame(
    std::span<const std::uint8_t> wire) {
  if (wire.size() < 4) throw ProtocolViolation("short frame");
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b)
    len |= static_cast<std::uint32_t>(wire[b]) << (8 * b);
  if (len > kMaxFrameBytes) throw ProtocolViolation("frame too large");
  if (wire.size() - 4 != len) throw ProtocolViolation("frame length mismatch");
  return {wire.begin() + 4, wire.end()};
}

/// One duplex endpoint moving framed byte blobs.
class FrameChannel {
 public:
  virtual ~FrameChannel() = default;
  virtual void send_frame(std::span<const std::uint8_t> body) = 0;
  virtual std::vector<std::uint8_t> recv_frame() = 0;
};

// ---------------------------------------------------------------------------
// In-process loopback transport
// ---------------------------------------------------------------------------

namespace detail {

struct FrameQueue {
  std::mutex m;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> q;

  void push(std::vector<std::uint8_t> frame) {
    {
      std::lock_guard<std::mutex> lk(m);
      q.push_back(std::move(frame));
    }
    cv.notify_all();
  }

  std::vector<std::uint8_t> pop(std::chrono::milliseconds timeout) {
    std::unique_lock<std::mutex> lk(m);
    if (!cv.wait_for(lk, timeout, [&] { return !q.empty(); }))
      throw RoundTimeout("loopback recv timed out");
    auto frame = std::move(q.front());
    q.pop_front();
    return frame;
  }
};

}  // namespace detail

class LoopbackChannel final : public FrameChannel {
 public:
  LoopbackChannel(detail::FrameQueue* out, detail::FrameQueue* in,
                  double latency_ms, int timeout_ms)
      : out_(out), in_(in), latency_ms_(latency_ms), timeout_ms_(timeout_ms) {}

  void send_frame(std::span<const std::uint8_t> body) override {
    if (latency_ms_ > 0)
      std::this_thread::sleep_for(
          std::chrono::duration<double, std::milli>(latency_ms_));
    out_->push(wrap_frame(body));
  }

  std::vector<std::uint8_t> recv_frame() override {
    auto wire = in_->pop(std::chrono::milliseconds(timeout_ms_));
    return unwrap_frame(wire);
  }

 private:
  detail::FrameQueue* out_;
  detail::FrameQueue* in_;
  double latency_ms_;
  int timeout_ms_;
};

/// Wires M client endpoints to M server-side peer endpoints in process.
class LoopbackHub {
 public:
  LoopbackHub(std::size_t clients, double latency_ms = 0.0,
              int timeout_ms = 30000) {
    for (std::size_t i = 0; i < clients; ++i) {
      up_.push_back(std::make_unique<detail::FrameQueue>());
      down_.push_back(std::make_unique<detail::FrameQueue>());
      client_ends_.emplace_back(up_[i].get(), down_[i].get(), latency_ms,
                                timeout_ms);
      server_ends_.emplace_back(down_[i].get(), up_[i].get(), latency_ms,
                                timeout_ms);
    }
  }

  FrameChannel& client_end(std::size_t i) { return client_ends_[i]; }
  FrameChannel& server_end(std::size_t i) { return server_ends_[i]; }

 private:
  std::vector<std::unique_ptr<detail::FrameQueue>> up_, down_;
  std::deque<LoopbackChannel> client_ends_, server_ends_;
};

// ---------------------------------------------------------------------------
// TCP transport
// ---------------------------------------------------------------------------

class TcpChannel final : public FrameChannel {
 public:
  TcpChannel(int fd, double latency_ms, int timeout_ms)
      : fd_(fd), latency_ms_(latency_ms), timeout_ms_(timeout_ms) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    timeval tv{};
    tv.tv_sec = timeout_ms / 1000;
    tv.tv_usec = (timeout_ms % 1000) * 1000;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }

  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;
  TcpChannel(TcpChannel&& o) noexcept
      : fd_(o.fd_), latency_ms_(o.latency_ms_), timeout_ms_(o.timeout_ms_) {
    o.fd_ = -1;
  }

  ~TcpChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send_frame(std::span<const std::uint8_t> body) override {
    if (latency_ms_ > 0)
      std::this_thread::sleep_for(
          std::chrono::duration<double, std::milli>(latency_ms_));
    auto wire = wrap_frame(body);
    std::size_t sent = 0;
    while (sent < wire.size()) {
      ssize_t n = ::send(fd_, wire.data() + sent, wire.size() - sent,
                         MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("send failed: " + std::string(std::strerror(errno)));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::vector<std::uint8_t> recv_frame() override {
    std::uint8_t len_buf[4];
    read_exact(len_buf, 4);
    std::uint32_t len = 0;
    for (int b = 0; b < 4; ++b)
      len |= static_cast<std::uint32_t>(len_buf[b]) << (8 * b);
    if (len > kMaxFrameBytes) throw ProtocolViolation("frame too large");
    std::vector<std::uint8_t> body(len);
    if (len > 0) read_exact(body.data(), len);
    return body;
  }

 private:
  void read_exact(std::uint8_t* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      ssize_t r = ::recv(fd_, dst + got, n - got, 0);
      if (r == 0) throw ProtocolViolation("peer closed connection");
      if (r < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK)
          throw RoundTimeout("tcp recv timed out");
        throw IoError("recv failed: " + std::string(std::strerror(errno)));
      }
      got += static_cast<std::size_t>(r);
    }
  }

  int fd_ = -1;
  double latency_ms_;
  int timeout_ms_;
};

/// Listening socket; accept() blocks up to `timeout_ms`.
class TcpListener {
 public:
  explicit TcpListener(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw IoError("socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      int err = errno;
      ::close(fd_);
      fd_ = -1;
      throw IoError("bind: " + std::string(std::strerror(err)));
    }
    if (::listen(fd_, 16) < 0) {
      int err = errno;
      ::close(fd_);
      fd_ = -1;
      throw IoError("listen: " + std::string(std::strerror(err)));
    }
  }

  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }

  std::uint16_t port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
  }

  int accept_fd(int timeout_ms) {
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc == 0) throw RoundTimeout("accept timed out");
    if (rc < 0) throw IoError("poll: " + std::string(std::strerror(errno)));
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) throw IoError("accept: " + std::string(std::strerror(errno)));
    return cfd;
  }

 private:
  int fd_ = -1;
};

/// Connect with retries so clients may start before the server is listening.
inline int tcp_connect(const std::string& host, std::uint16_t port,
                       int total_timeout_ms = 10000) {
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(total_timeout_ms);
  std::string port_str = std::to_string(port);
  for (;;) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) == 0) {
      for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
          ::freeaddrinfo(res);
          return fd;
        }
        ::close(fd);
      }
      ::freeaddrinfo(res);
    }
    if (std::chrono::steady_clock::now() >= deadline)
      throw IoError("cannot connect to " + host + ":" + port_str);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

// ---------------------------------------------------------------------------
// Protocol state machines
// ---------------------------------------------------------------------------

/// Server-side noise applied to one aggregated quantity.
struct NoiseDraw {
  enum class Kind { None, Gaussian, Laplace };
  Kind kind = Kind::None;
  double scale = 0.0;  // Gaussian std or Laplace scale

  static NoiseDraw none() { return {}; }
  static NoiseDraw gaussian(double std) {
    return {Kind::Gaussian, std};
  }
  static NoiseDraw laplace(double b) { return {Kind::Laplace, b}; }
};

/// One real-valued noise sample, addressed by (round, element) so the draw
/// order never depends on message arrival order.
inline double noise_value(const SeededRng& noise_rng, StreamKind stream,
                          std::uint32_t t, std::size_t element,
                          const NoiseDraw& draw) {
  switch (draw.kind) {
    case NoiseDraw::Kind::None:
      return 0.0;
    case NoiseDraw::Kind::Gaussian:
      return draw.scale * noise_rng.gaussian(stream, t, element);
    case NoiseDraw::Kind::Laplace:
      return noise_rng.laplace(draw.scale, stream, t, element);
  }
  return 0.0;
}

/// Per-iteration server noise scales.
struct RoundNoise {
  NoiseDraw sums;
  NoiseDraw counts;
};

/// Everything a client needs to run one protocol instance. The same profile
/// drives FastLloyd and the baselines; they differ only in the radius
/// schedule, the relative/absolute switch, and the noise scales.
struct RunProfile {
  ProtocolParams params;
  int T = 0;
  cluster::RadiusSchedule schedule;  // unconstrained() for baselines
  bool relative = true;              // relative sums + shift/clip
  std::vector<RoundNoise> noise;     // size T
  std::vector<std::pair<std::string, double>> plan_echo;  // for reports
  bool record_trajectory = false;    // keep per-iteration centroids
};

/// Server configuration. Deliberately excludes the shared mask seed: the
/// aggregator only ever holds masked words and its own noise key.
struct ServerConfig {
  std::size_t clients = 0;
  std::size_t k = 0;
  std::size_t d = 0;
  unsigned w = 64;
  unsigned q = 16;
  int T = 0;
  std::vector<RoundNoise> noise;
  std::uint64_t noise_key = 0;
};

inline ServerConfig make_server_config(const RunProfile& profile) {
  ServerConfig cfg;
  cfg.clients = profile.params.M;
  cfg.k = profile.params.k;
  cfg.d = profile.params.d;
  cfg.w = profile.params.w;
  cfg.q = profile.params.q;
  cfg.T = profile.T;
  cfg.noise = profile.noise;
  cfg.noise_key =
      SeededRng(profile.params.seed).derive(kServerNoiseDomain).seed();
  return cfg;
}

/// Mask and encode one local update into the round's two messages.
inline std::pair<MsaMessage, MsaMessage> client_send(
    const cluster::LocalUpdate& update, std::uint32_t t, unsigned q,
    unsigned w, const ringcodec::MaskSet& masks_rel,
    const ringcodec::MaskSet& masks_cnt, std::size_t party) {
  MsaMessage rel;
  rel.round = t;
  rel.kind = MsgKind::RelSums;
  rel.payload = ringcodec::encode(update.rel_sums, q, w);
  rel.payload.add_inplace(masks_rel.masks[party]);

  Matrix counts_col(update.counts.size(), 1);
  for (std::size_t j = 0; j < update.counts.size(); ++j)
    counts_col.at(j, 0) = update.counts[j];
  MsaMessage cnt;
  cnt.round = t;
  cnt.kind = MsgKind::Counts;
  cnt.payload = ringcodec::encode(counts_col, q, w);
  cnt.payload.add_inplace(masks_cnt.masks[party]);
  return {std::move(rel), std::move(cnt)};
}

/// Wrapping-sum all clients' masked words for one kind and add quantized
/// noise drawn from the server's own key. The result is still masked by the
/// clients' mask total; the server never sees the aggregate.
inline MsaMessage server_aggregate(const std::vector<MsaMessage>& msgs,
                                   const NoiseDraw& draw,
                                   const SeededRng& noise_rng,
                                   StreamKind stream) {
  if (msgs.empty()) throw ProtocolViolation("no messages to aggregate");
  MsaMessage out;
  out.round = msgs.front().round;
  out.kind = MsgKind::NoisedResult;
  out.payload = msgs.front().payload;
  for (std::size_t i = 1; i < msgs.size(); ++i) {
    if (msgs[i].round != out.round)
      throw ProtocolViolation("round mismatch in aggregate");
    if (msgs[i].kind != msgs.front().kind)
      throw ProtocolViolation("kind mismatch in aggregate");
    out.payload.add_inplace(msgs[i].payload);
  }
  const std::uint64_t m = out.payload.mask();
  for (std::size_t e = 0; e < out.payload.words.size(); ++e) {
    double gamma = noise_value(noise_rng, stream, out.round, e, draw);
    std::uint64_t g =
        ringcodec::quantize_noise(gamma, out.payload.q, out.payload.w);
    out.payload.words[e] = (out.payload.words[e] + g) & m;
  }
  return out;
}

/// Unmask a broadcast result and decode it to reals.
inline Matrix client_receive(const MsaMessage& msg,
                             const ringcodec::RingMatrix& mask_total,
                             std::uint32_t expected_round) {
  if (msg.round != expected_round)
    throw ProtocolViolation("round mismatch: got " +
                            std::to_string(msg.round) + ", expected " +
                            std::to_string(expected_round));
  if (msg.kind != MsgKind::NoisedResult)
    throw ProtocolViolation("expected noised result");
  ringcodec::RingMatrix unmasked = msg.payload;
  unmasked.sub_inplace(mask_total);
  return ringcodec::decode(unmasked);
}

/// Payload bytes moved per direction per client per iteration.
inline std::size_t iteration_payload_bytes(std::size_t k, std::size_t d,
                                           unsigned w) {
  return k * (d + 1) * (w / 8);
}

struct TransferStats {
  std::uint64_t payload_up = 0;
  std::uint64_t payload_down = 0;
  std::uint64_t frames_up = 0;
  std::uint64_t frames_down = 0;
};

struct ClientOutcome {
  CentroidState centroids;
  TransferStats stats;
  std::vector<double> iter_ms;
  std::vector<Matrix> trajectory;  // filled when the profile asks for it
};

namespace detail {

inline void validate_incoming(const MsaMessage& msg, std::uint32_t t,
                              MsgKind kind, std::size_t rows,
                              std::size_t cols, unsigned w) {
  if (msg.round != t)
    throw ProtocolViolation("round mismatch on incoming message");
  if (msg.kind != kind) throw ProtocolViolation("unexpected message kind");
  if (msg.payload.rows != rows || msg.payload.cols != cols)
    throw ProtocolViolation("unexpected message shape");
  if (msg.payload.w != w) throw ProtocolViolation("ring width mismatch");
}

}  // namespace detail

/// One client's end of the protocol, start to finish. Deterministic given
/// (profile, shard, party): initialization and masks derive from the shared
/// seed, and every client applies identical arithmetic to the identical
/// broadcast, so all clients finish with bit-equal centroids.
inline ClientOutcome run_client(const RunProfile& profile,
                                const Dataset& shard, std::size_t party,
                                FrameChannel& channel) {
  const auto& p = profile.params;
  SeededRng rng(p.seed);
  ClientOutcome out;
  out.centroids = cluster::sphere_packing_init(p, rng);
  if (profile.record_trajectory)
    out.trajectory.push_back(out.centroids.centroids);
  for (std::uint32_t t = 0; t < static_cast<std::uint32_t>(profile.T); ++t) {
    auto started = std::chrono::steady_clock::now();
    double eta_t = profile.schedule.at(static_cast<int>(t));
    auto labels = cluster::assign(shard, out.centroids, eta_t);
    cluster::LocalUpdate update =
        profile.relative
            ? cluster::local_update(shard, labels, out.centroids)
            : cluster::local_update_absolute(shard, labels, p.k);

    auto masks_rel = ringcodec::derive_masks(
        rng, t, ringcodec::MaskKind::RelSums, p.M, p.k, p.d, p.w, p.q);
    auto masks_cnt = ringcodec::derive_masks(
        rng, t, ringcodec::MaskKind::Counts, p.M, p.k, 1, p.w, p.q);
#ifndef NDEBUG
    {
      ringcodec::RingMatrix check(p.k, p.d, p.w, p.q);
      for (const auto& mask : masks_rel.masks) check.add_inplace(mask);
      check.sub_inplace(masks_rel.total);
      for (std::uint64_t word : check.words) assert(word == 0);
    }
#endif
    auto [msg_rel, msg_cnt] =
        client_send(update, t, p.q, p.w, masks_rel, masks_cnt, party);

    auto frame = msg_rel.serialize();
    auto cnt_bytes = msg_cnt.serialize();
    frame.insert(frame.end(), cnt_bytes.begin(), cnt_bytes.end());
    out.stats.payload_up += msg_rel.payload_bytes() + msg_cnt.payload_bytes();
    out.stats.frames_up += 1;
    channel.send_frame(frame);

    auto body = channel.recv_frame();
    out.stats.frames_down += 1;
    std::size_t off = 0;
    MsaMessage res_rel = MsaMessage::parse(body, off, p.q);
    MsaMessage res_cnt = MsaMessage::parse(body, off, p.q);
    if (off != body.size())
      throw ProtocolViolation("trailing bytes in result frame");
    detail::validate_incoming(res_rel, t, MsgKind::NoisedResult, p.k, p.d,
                              p.w);
    detail::validate_incoming(res_cnt, t, MsgKind::NoisedResult, p.k, 1, p.w);
    out.stats.payload_down +=
        res_rel.payload_bytes() + res_cnt.payload_bytes();

    cluster::GlobalUpdate global;
    global.sums = client_receive(res_rel, masks_rel.total, t);
    Matrix counts = client_receive(res_cnt, masks_cnt.total, t);
    global.counts.resize(p.k);
    for (std::size_t j = 0; j < p.k; ++j) global.counts[j] = counts.at(j, 0);

    out.centroids =
        profile.relative
            ? cluster::reconstruct_centroids(global, out.centroids, eta_t,
                                             p.B)
            : cluster::reconstruct_centroids_absolute(global, out.centroids,
                                                      p.B);
    if (profile.record_trajectory)
      out.trajectory.push_back(out.centroids.centroids);
    out.iter_ms.push_back(std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - started)
                              .count());
  }
  return out;
}

/// The aggregator loop: per round, gather every client's frame, sum each
/// kind in the ring, noise it, and broadcast one frame. Arrival order does
/// not matter (wrapping addition commutes) and nothing here can unmask.
inline void run_server(const ServerConfig& cfg,
                       const std::vector<FrameChannel*>& peers) {
  if (peers.size() != cfg.clients)
    throw InvalidInput("run_server: peer count != clients");
  SeededRng noise_rng(cfg.noise_key);
  for (std::uint32_t t = 0; t < static_cast<std::uint32_t>(cfg.T); ++t) {
    std::vector<MsaMessage> rel_msgs, cnt_msgs;
    rel_msgs.reserve(cfg.clients);
    cnt_msgs.reserve(cfg.clients);
    for (FrameChannel* peer : peers) {
      auto body = peer->recv_frame();
      std::size_t off = 0;
      MsaMessage rel = MsaMessage::parse(body, off, cfg.q);
      MsaMessage cnt = MsaMessage::parse(body, off, cfg.q);
      if (off != body.size())
        throw ProtocolViolation("trailing bytes in client frame");
      detail::validate_incoming(rel, t, MsgKind::RelSums, cfg.k, cfg.d,
                                cfg.w);
      detail::validate_incoming(cnt, t, MsgKind::Counts, cfg.k, 1, cfg.w);
      rel_msgs.push_back(std::move(rel));
      cnt_msgs.push_back(std::move(cnt));
    }
    MsaMessage res_rel = server_aggregate(
        rel_msgs, cfg.noise[t].sums, noise_rng, StreamKind::ServerNoiseRelSums);
    MsaMessage res_cnt = server_aggregate(
        cnt_msgs, cfg.noise[t].counts, noise_rng,
        StreamKind::ServerNoiseCounts);
    auto frame = res_rel.serialize();
    auto cnt_bytes = res_cnt.serialize();
    frame.insert(frame.end(), cnt_bytes.begin(), cnt_bytes.end());
    for (FrameChannel* peer : peers) peer->send_frame(frame);
  }
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

struct ProtocolResult {
  CentroidState centroids;
  std::vector<TransferStats> client_stats;
  std::vector<double> iter_ms;  // client 0's per-iteration wall clock
  std::vector<Matrix> trajectory;
  double total_ms = 0.0;
  int rounds_per_iteration = 1;
};

struct LocalRunOptions {
  double latency_ms = 0.0;
  int timeout_ms = 30000;
};

/// Sanity-check that sums, counts and noise headroom fit the ring before
/// anything is encoded.
inline void validate_capacity(const RunProfile& profile,
                              std::size_t total_n) {
  const auto& p = profile.params;
  double basis = profile.relative
                     ? std::max(profile.schedule.eta0, profile.schedule.eta)
                     : p.B;
  if (std::isinf(basis)) basis = p.B * std::sqrt(static_cast<double>(p.d));
  double max_std = 0.0;
  for (const auto& rn : profile.noise)
    max_std = std::max({max_std, rn.sums.scale, rn.counts.scale});
  double bound = static_cast<double>(total_n) * std::max(basis, 1.0) +
                 10.0 * max_std;
  if (bound >= ringcodec::ring_capacity(p.q, p.w))
    throw InvalidInput(
        "ring too narrow: expected magnitudes overflow 2^(w-1-q); "
        "increase w or reduce N");
}

/// Run M in-process clients plus the aggregator over loopback channels.
/// Identical framing bytes to the TCP path; used by tests and `--role
/// local`.
inline ProtocolResult run_local(const RunProfile& profile,
                                const std::vector<Dataset>& shards,
                                const LocalRunOptions& opts = {}) {
  const auto& p = profile.params;
  if (shards.size() != p.M)
    throw InvalidInput("run_local: shard count != M");
  std::size_t total_n = 0;
  for (const auto& s : shards) total_n += s.n;
  validate_capacity(profile, total_n);

  LoopbackHub hub(p.M, opts.latency_ms, opts.timeout_ms);
  ServerConfig server_cfg = make_server_config(profile);
  std::vector<FrameChannel*> peers;
  for (std::size_t i = 0; i < p.M; ++i) peers.push_back(&hub.server_end(i));

  std::vector<ClientOutcome> outcomes(p.M);
  std::vector<std::exception_ptr> errors(p.M + 1);

  auto started = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  threads.emplace_back([&] {
    try {
      run_server(server_cfg, peers);
    } catch (...) {
      errors[p.M] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < p.M; ++i) {
    threads.emplace_back([&, i] {
      try {
        outcomes[i] = run_client(profile, shards[i], i, hub.client_end(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  for (std::size_t i = 1; i < p.M; ++i)
    if (!(outcomes[i].centroids.centroids == outcomes[0].centroids.centroids))
      throw ProtocolViolation("clients disagree on final centroids");

  ProtocolResult result;
  result.centroids = outcomes[0].centroids;
  result.iter_ms = outcomes[0].iter_ms;
  result.trajectory = std::move(outcomes[0].trajectory);
  for (auto& o : outcomes) result.client_stats.push_back(o.stats);
  result.total_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  return result;
}

/// The FastLloyd profile: radius-constrained relative updates with the
/// calibrated Gaussian scales. `zero_noise` keeps everything else identical
/// for equivalence tests.
inline RunProfile make_fastlloyd_profile(const ProtocolParams& params,
                                         std::size_t total_n,
                                         bool zero_noise = false) {
  params.validate();
  RunProfile profile;
  profile.params = params;
  profile.schedule = cluster::compute_radius(params);
  dpcalib::NoisePlan plan =
      dpcalib::make_plan(params, total_n, profile.schedule.eta);
  profile.T = plan.T;
  profile.relative = true;
  profile.noise.resize(plan.T);
  for (int t = 0; t < plan.T; ++t) {
    if (zero_noise) {
      profile.noise[t] = {NoiseDraw::none(), NoiseDraw::none()};
    } else {
      double eta_t = profile.schedule.at(t);
      profile.noise[t] = {NoiseDraw::gaussian(plan.std_R(eta_t)),
                          NoiseDraw::gaussian(plan.std_C())};
    }
  }
  profile.plan_echo = {
      {"sigma", plan.sigma},
      {"sigma_R", plan.sigma_R},
      {"sigma_C", plan.sigma_C},
      {"T", static_cast<double>(plan.T)},
      {"eps_total", params.epsilon},
      {"delta_used", params.delta},
      {"eta", profile.schedule.eta},
      {"eta0", profile.schedule.eta0},
  };
  for (int t = 0; t < plan.T; ++t) {
    profile.plan_echo.emplace_back("std_R_" + std::to_string(t),
                                   profile.noise[t].sums.scale);
    profile.plan_echo.emplace_back("std_C_" + std::to_string(t),
                                   profile.noise[t].counts.scale);
  }
  return profile;
}

/// End-to-end FastLloyd over loopback.
inline ProtocolResult run_protocol(const ProtocolParams& params,
                                   const std::vector<Dataset>& shards,
                                   const LocalRunOptions& opts = {}) {
  std::size_t total_n = 0;
  for (const auto& s : shards) total_n += s.n;
  return run_local(make_fastlloyd_profile(params, total_n), shards, opts);
}

}  // namespace fastlloyd::msa

#endif  // FASTLLOYD_MSA_HPP
