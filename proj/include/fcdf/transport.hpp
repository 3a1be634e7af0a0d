// Copyright 2026 The FCDF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FCDF_TRANSPORT_HPP_
#define FCDF_TRANSPORT_HPP_

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fcdf/bytes.hpp"
#include "fcdf/error.hpp"
#include "fcdf/protocol.hpp"

namespace fcdf {

using Clock = std::chrono::steady_clock;

/// A bidirectional frame pipe. receive() blocks until a whole frame arrives
/// and throws kIo once the peer is gone; close() unblocks pending receives.
class Connection {
 public:
  virtual ~Connection() = default;
  virtual void send(std::span<const std::uint8_t> frame) = 0;
  virtual Bytes receive() = 0;
  virtual void close() = 0;

  void send_message(const Message& m) { send(serialize(m)); }
};

class Listener {
 public:
  virtual ~Listener() = default;
  // nullptr when nothing arrived within `wait`.
  virtual std::unique_ptr<Connection> accept(std::chrono::milliseconds wait) = 0;
  virtual void close() = 0;
};

// ---------------------------------------------------------------------------
// In-process loopback

namespace detail {

class FrameQueue {
 public:
  void push(Bytes frame) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      frames_.push_back(std::move(frame));
    }
    cv_.notify_all();
  }

  Bytes pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !frames_.empty(); });
    if (frames_.empty()) fail(ErrorKind::kIo, "loopback connection closed");
    Bytes f = std::move(frames_.front());
    frames_.pop_front();
    return f;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> frames_;
  bool closed_ = false;
};

class LoopbackConnection final : public Connection {
 public:
  LoopbackConnection(std::shared_ptr<FrameQueue> in, std::shared_ptr<FrameQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackConnection() override { close(); }

  void send(std::span<const std::uint8_t> frame) override {
    out_->push(Bytes(frame.begin(), frame.end()));
  }
  Bytes receive() override { return in_->pop(); }
  void close() override {
    in_->close();
    out_->close();
  }

 private:
  std::shared_ptr<FrameQueue> in_;
  std::shared_ptr<FrameQueue> out_;
};

}  // namespace detail

/// In-process listener; connect() hands the client end back immediately
/// and queues the server end for accept().
class LoopbackHub final : public Listener {
 public:
  std::unique_ptr<Connection> connect() {
    auto up = std::make_shared<detail::FrameQueue>();
    auto down = std::make_shared<detail::FrameQueue>();
    {
      std::lock_guard lock(mu_);
      if (closed_) fail(ErrorKind::kIo, "loopback listener closed");
      pending_.push_back(std::make_unique<detail::LoopbackConnection>(up, down));
    }
    cv_.notify_all();
    return std::make_unique<detail::LoopbackConnection>(down, up);
  }

  std::unique_ptr<Connection> accept(std::chrono::milliseconds wait) override {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, wait, [&] { return closed_ || !pending_.empty(); });
    if (pending_.empty()) return nullptr;
    auto c = std::move(pending_.front());
    pending_.pop_front();
    return c;
  }

  void close() override {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
      pending_.clear();
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<Connection>> pending_;
  bool closed_ = false;
};

// ---------------------------------------------------------------------------
// TCP

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
};

/// "host:port", "host" or ":port".
inline Endpoint parse_endpoint(const std::string& text) {
  Endpoint e;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    if (!text.empty()) e.host = text;
    return e;
  }
  if (colon > 0) e.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  require(!port.empty() && end == port.c_str() + port.size() && p >= 0 && p <= 65535,
          ErrorKind::kValidation, "bad port in address '" + text + "'");
  e.port = static_cast<std::uint16_t>(p);
  return e;
}

namespace detail {

inline void send_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::kIo, std::string("send failed: ") + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

inline void recv_all(int fd, std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::recv(fd, data, size, 0);
    if (n == 0) fail(ErrorKind::kIo, "connection closed by peer");
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::kIo, std::string("recv failed: ") + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

class TcpConnection final : public Connection {
 public:
  explicit TcpConnection(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpConnection() override {
    close();
    ::close(fd_);
  }

  void send(std::span<const std::uint8_t> frame) override {
    std::lock_guard lock(send_mu_);
    send_all(fd_, frame.data(), frame.size());
  }

  Bytes receive() override {
    Bytes frame(kFrameHeaderSize);
    recv_all(fd_, frame.data(), kFrameHeaderSize);
    const FrameHeader h = parse_frame_header(frame);
    frame.resize(kFrameHeaderSize + h.payload_size);
    recv_all(fd_, frame.data() + kFrameHeaderSize, h.payload_size);
    return frame;
  }

  void close() override {
    if (!shut_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_;
  std::mutex send_mu_;
  std::atomic<bool> shut_{false};
};

inline addrinfo* resolve(const Endpoint& e, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(e.port);
  const int rc = ::getaddrinfo(e.host.empty() ? nullptr : e.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) fail(ErrorKind::kIo, "cannot resolve " + e.host + ": " + ::gai_strerror(rc));
  return res;
}

}  // namespace detail

class TcpListener final : public Listener {
 public:
  explicit TcpListener(const Endpoint& bind_to) {
    addrinfo* res = detail::resolve(bind_to, true);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0) {
      ::freeaddrinfo(res);
      fail(ErrorKind::kIo, std::string("socket failed: ") + std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    const int rc = ::bind(fd_, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0 || ::listen(fd_, 64) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      fail(ErrorKind::kIo, "cannot listen on " + bind_to.host + ":" +
                               std::to_string(bind_to.port) + ": " + why);
    }
  }
  ~TcpListener() override { close(); }

  // Actual port, useful after binding port 0.
  std::uint16_t port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
  }

  std::unique_ptr<Connection> accept(std::chrono::milliseconds wait) override {
    if (fd_ < 0) return nullptr;
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(wait.count()));
    if (rc <= 0) return nullptr;
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c < 0) return nullptr;
    return std::make_unique<detail::TcpConnection>(c);
  }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

/// Connects, retrying until `patience` runs out (the server may start late).
inline std::unique_ptr<Connection> tcp_connect(const Endpoint& e,
                                               std::chrono::milliseconds patience =
                                                   std::chrono::milliseconds(10000)) {
  const auto deadline = Clock::now() + patience;
  std::string last_error;
  for (;;) {
    addrinfo* res = detail::resolve(e, false);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_unique<detail::TcpConnection>(fd);
    }
    last_error = std::strerror(errno);
    if (fd >= 0) ::close(fd);
    ::freeaddrinfo(res);
    if (Clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  fail(ErrorKind::kIo, "cannot connect to " + e.host + ":" + std::to_string(e.port) + ": " +
                           last_error);
}

// ---------------------------------------------------------------------------
// Drivers

struct ServerOutcome {
  int status = 0;  // 0 ok, otherwise an exit code
  std::string diagnostic;
  ServerSession session;
};

struct ServerRunOptions {
  // Zero waits forever.
  std::chrono::milliseconds timeout{0};
};

/// Feeds frames from every connection into server_step through a single
/// owner loop. Returns once AGG_RESULT has been delivered, or on timeout or
/// mid-session connection loss (partial state is discarded).
inline ServerOutcome run_server(Listener& listener, ServerConfig config,
                                ServerRunOptions options = {}) {
  struct Event {
    std::size_t conn = 0;
    std::optional<Bytes> frame;
    std::string error;
  };
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Event> events;
  std::vector<std::shared_ptr<Connection>> conns;
  std::vector<std::thread> readers;
  std::atomic<bool> stop{false};

  auto push = [&](Event e) {
    {
      std::lock_guard lock(mu);
      events.push_back(std::move(e));
    }
    cv.notify_all();
  };

  std::thread acceptor([&] {
    while (!stop) {
      std::unique_ptr<Connection> c = listener.accept(std::chrono::milliseconds(50));
      if (!c) continue;
      std::shared_ptr<Connection> shared = std::move(c);
      std::size_t index = 0;
      {
        std::lock_guard lock(mu);
        if (stop) {
          shared->close();
          break;
        }
        index = conns.size();
        conns.push_back(shared);
        readers.emplace_back([&, shared, index] {
          for (;;) {
            try {
              push({index, shared->receive(), {}});
            } catch (const std::exception& e) {
              push({index, std::nullopt, e.what()});
              return;
            }
          }
        });
      }
    }
  });

  ServerSession session = make_server_session(std::move(config));
  std::map<std::uint32_t, std::size_t> client_conn;
  ServerOutcome outcome;
  const auto deadline = options.timeout.count() > 0 ? Clock::now() + options.timeout
                                                    : Clock::time_point::max();

  auto connection = [&](std::size_t i) {
    std::lock_guard lock(mu);
    return conns[i];
  };

  for (;;) {
    Event ev;
    {
      std::unique_lock lock(mu);
      if (!cv.wait_until(lock, deadline, [&] { return !events.empty(); })) {
        outcome.status = exit_code(ErrorKind::kProtocol);
        outcome.diagnostic = "timed out waiting for clients (phase " +
                             to_string(session.phase) + ", " +
                             std::to_string(session.domains.size()) + " registered)";
        break;
      }
      ev = std::move(events.front());
      events.pop_front();
    }
    bool registered = false;
    for (const auto& [id, idx] : client_conn) registered = registered || idx == ev.conn;
    if (!ev.frame) {
      if (registered) {
        outcome.status = exit_code(ErrorKind::kIo);
        outcome.diagnostic = "client connection lost mid-session: " + ev.error;
        break;
      }
      continue;
    }
    Message msg;
    try {
      msg = deserialize(*ev.frame);
    } catch (const Error& e) {
      try {
        connection(ev.conn)->send_message(make_error(ErrorCode::kMalformed, e.what()));
      } catch (const Error&) {
      }
      continue;
    }
    std::optional<std::uint32_t> new_client;
    if (const auto* hello = std::get_if<HelloMsg>(&msg)) {
      if (!session.domains.contains(hello->client_id)) new_client = hello->client_id;
    }
    ServerStep step = server_step(std::move(session), msg);
    session = std::move(step.session);
    if (new_client && session.domains.contains(*new_client)) client_conn[*new_client] = ev.conn;
    for (const auto& o : step.out) {
      const std::size_t target = o.route == Route::kReply ? ev.conn : client_conn.at(o.client_id);
      try {
        connection(target)->send_message(o.message);
      } catch (const Error& e) {
        if (o.route == Route::kClient) {
          outcome.status = exit_code(ErrorKind::kIo);
          outcome.diagnostic = "send to client " + std::to_string(o.client_id) + " failed: " + e.what();
        }
      }
    }
    if (outcome.status != 0) break;
    if (session.phase == ServerPhase::kDone) break;
  }

  stop = true;
  acceptor.join();
  listener.close();
  {
    std::lock_guard lock(mu);
    for (auto& c : conns) c->close();
  }
  for (auto& t : readers) t.join();
  if (outcome.status != 0) session = make_server_session(session.config);
  outcome.session = std::move(session);
  return outcome;
}

struct ClientOutcome {
  int status = 0;
  std::string diagnostic;
  ClientSession session;
};

/// Runs one client to completion over an established connection.
inline ClientOutcome run_client(Connection& conn, ClientSession session) {
  ClientOutcome outcome;
  const std::uint32_t id = session.client_id;
  ClientPhase last_phase = session.phase;
  try {
    ClientStep step = client_start(std::move(session));
    for (const auto& m : step.out) conn.send_message(m);
    session = std::move(step.session);
    while (session.phase != ClientPhase::kGotAggregate && session.phase != ClientPhase::kAborted) {
      last_phase = session.phase;
      const Message in = deserialize(conn.receive());
      step = client_step(std::move(session), in);
      session = std::move(step.session);
      for (const auto& m : step.out) conn.send_message(m);
    }
  } catch (const Error& e) {
    outcome.status = exit_code(e.kind());
    outcome.diagnostic = "client " + std::to_string(id) + " in phase " +
                         to_string(last_phase) + ": " + e.what();
  }
  conn.close();
  if (outcome.status == 0 && session.phase == ClientPhase::kAborted) {
    outcome.status = exit_code(ErrorKind::kProtocol);
    outcome.diagnostic = "client " + std::to_string(session.client_id) + " aborted: " +
                         session.abort_reason;
  }
  outcome.session = std::move(session);
  return outcome;
}

}  // namespace fcdf

#endif  // FCDF_TRANSPORT_HPP_
