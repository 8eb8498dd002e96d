#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <utility>
#include <vector>

#include "archer/overlay/node_id.hpp"
#include "archer/util/bytes.hpp"

namespace archer::overlay {

// Point-to-point byte transport. The network installs one handler and calls
// send(); the transport is responsible for getting the frame to the handler
// under the addressee's id. flush() drains queued traffic where applicable.
class Transport {
 public:
  using Handler = std::function<void(const NodeId& at, std::span<const std::byte> frame)>;

  virtual ~Transport() = default;

  virtual void set_handler(Handler handler) { handler_ = std::move(handler); }
  virtual void attach(const NodeId& node) = 0;
  virtual void detach(const NodeId& node) = 0;
  virtual void send(const NodeId& to, util::Bytes frame) = 0;
  virtual void flush() {}

  // True when flush() settles all in-flight traffic on the caller's thread.
  virtual bool synchronous() const { return true; }

 protected:
  Handler handler_;
};

// Deterministic FIFO queue used by the simulation driver: frames are handled
// in exactly the order they were sent, on the caller's thread.
class InMemoryTransport : public Transport {
 public:
  void attach(const NodeId& node) override { live_.insert(node); }
  void detach(const NodeId& node) override { live_.erase(node); }

  void send(const NodeId& to, util::Bytes frame) override {
    ++frames_sent_;
    if (!live_.contains(to)) {
      ++frames_dropped_;
      return;
    }
    queue_.emplace_back(to, std::move(frame));
  }

  void flush() override {
    while (!queue_.empty()) {
      auto [to, frame] = std::move(queue_.front());
      queue_.pop_front();
      if (!live_.contains(to)) {
        ++frames_dropped_;
        continue;
      }
      if (handler_) handler_(to, frame);
    }
  }

  std::uint64_t frames_sent() const { return frames_sent_; }
  std::uint64_t frames_dropped() const { return frames_dropped_; }

 private:
  std::set<NodeId> live_;
  std::deque<std::pair<NodeId, util::Bytes>> queue_;
  std::uint64_t frames_sent_ = 0;
  std::uint64_t frames_dropped_ = 0;
};

// Demo transport: every node listens on an ephemeral TCP port on 127.0.0.1 and
// each frame travels over its own connection, length-prefixed. Handlers run on
// per-node reader threads, so the installed handler must be thread-safe.
class LoopbackTransport final : public Transport {
 public:
  ~LoopbackTransport() override { stop(); }

  bool synchronous() const override { return false; }

  void attach(const NodeId& node) override {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 64) != 0) {
      ::close(fd);
      return;
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);

    std::lock_guard<std::mutex> lock(mutex_);
    Listener& l = listeners_[node];
    l.fd = fd;
    l.port = ntohs(addr.sin_port);
    l.running = std::make_shared<std::atomic<bool>>(true);
    l.thread = std::thread([this, node, fd, running = l.running] { accept_loop(node, fd, *running); });
  }

  void detach(const NodeId& node) override {
    Listener victim;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = listeners_.find(node);
      if (it == listeners_.end()) return;
      victim = std::move(it->second);
      listeners_.erase(it);
    }
    shut_down(victim);
  }

  void send(const NodeId& to, util::Bytes frame) override {
    std::uint16_t port = 0;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = listeners_.find(to);
      if (it == listeners_.end()) return;
      port = it->second.port;
    }
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      util::Bytes wire;
      util::put_u32_be(wire, static_cast<std::uint32_t>(frame.size()));
      wire.insert(wire.end(), frame.begin(), frame.end());
      std::size_t off = 0;
      while (off < wire.size()) {
        const ssize_t n = ::write(fd, wire.data() + off, wire.size() - off);
        if (n <= 0) break;
        off += static_cast<std::size_t>(n);
      }
    }
    ::close(fd);
  }

  void stop() {
    std::map<NodeId, Listener> victims;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      victims.swap(listeners_);
    }
    for (auto& [id, l] : victims) shut_down(l);
  }

 private:
  struct Listener {
    int fd = -1;
    std::uint16_t port = 0;
    std::shared_ptr<std::atomic<bool>> running;
    std::thread thread;
  };

  void accept_loop(const NodeId& node, int listen_fd, std::atomic<bool>& running) {
    while (running.load()) {
      const int conn = ::accept(listen_fd, nullptr, nullptr);
      if (conn < 0) break;
      if (!running.load()) {
        ::close(conn);
        break;
      }
      util::Bytes frame = read_frame(conn);
      ::close(conn);
      if (!frame.empty() && handler_) handler_(node, frame);
    }
    ::close(listen_fd);
  }

  static util::Bytes read_frame(int fd) {
    std::byte header[4];
    if (!read_exact(fd, header, 4)) return {};
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | std::to_integer<std::uint32_t>(header[i]);
    if (len == 0 || len > (1u << 24)) return {};
    util::Bytes frame(len);
    if (!read_exact(fd, frame.data(), len)) return {};
    return frame;
  }

  static bool read_exact(int fd, std::byte* out, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
      const ssize_t got = ::read(fd, out + off, n - off);
      if (got <= 0) return false;
      off += static_cast<std::size_t>(got);
    }
    return true;
  }

  // Wakes the accept loop with a throwaway connection, then joins the thread.
  void shut_down(Listener& l) {
    if (!l.running) return;
    l.running->store(false);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd >= 0) {
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      addr.sin_port = htons(l.port);
      ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
      ::close(fd);
    }
    if (l.thread.joinable()) l.thread.join();
  }

  std::mutex mutex_;
  std::map<NodeId, Listener> listeners_;
};

}  // namespace archer::overlay
