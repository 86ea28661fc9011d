#include "dtree/relay/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace dtree::relay {

namespace {

[[noreturn]] void sys_fail(const std::string& what) { throw std::runtime_error(what + ": " + std::strerror(errno)); }

class TcpStream final : public Stream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override {
    shutdown();
    ::close(fd_);
  }

  std::size_t read_some(std::span<char> buf) override {
    while (true) {
      ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
      if (n >= 0) return static_cast<std::size_t>(n);
      if (errno == EINTR) continue;
      return 0;
    }
  }

  void write_all(std::string_view bytes) override {
    while (!bytes.empty()) {
      ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        sys_fail("send");
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  void shutdown() override {
    if (!shut_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_;
  std::atomic<bool> shut_{false};
};

/// One direction of an in-memory connection.
struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::string data;
  bool closed = false;
};

class MemoryStream final : public Stream {
 public:
  MemoryStream(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out) : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryStream() override { shutdown(); }

  std::size_t read_some(std::span<char> buf) override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->data.empty() || in_->closed; });
    if (in_->data.empty()) return 0;
    std::size_t n = std::min(buf.size(), in_->data.size());
    std::memcpy(buf.data(), in_->data.data(), n);
    in_->data.erase(0, n);
    return n;
  }

  void write_all(std::string_view bytes) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw std::runtime_error("memory stream closed");
    out_->data.append(bytes);
    out_->cv.notify_all();
  }

  void shutdown() override {
    for (auto* p : {in_.get(), out_.get()}) {
      std::lock_guard lock(p->mu);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
};

}  // namespace

// ---------------------------------------------------------------------------
// TCP

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error(std::string("getaddrinfo: ") + ::gai_strerror(rc));
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    sys_fail("socket");
  }
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0) {
    ::freeaddrinfo(res);
    ::close(fd_);
    sys_fail("bind " + host + ":" + service);
  }
  ::freeaddrinfo(res);
  if (::listen(fd_, 64) != 0) sys_fail("listen");
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

TcpListener::~TcpListener() {
  close();
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Stream> TcpListener::accept() {
  while (true) {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<TcpStream>(fd);
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return nullptr;
  }
}

void TcpListener::close() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::unique_ptr<Stream> tcp_connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error(std::string("getaddrinfo: ") + ::gai_strerror(rc));
  }
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_unique<TcpStream>(fd);
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  sys_fail("connect " + host + ":" + service);
}

// ---------------------------------------------------------------------------
// in-memory network

struct MemoryNetwork::Backlog {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::unique_ptr<Stream>> queue;
  bool closed = false;
};

class MemoryListener final : public Listener {
 public:
  explicit MemoryListener(std::shared_ptr<MemoryNetwork::Backlog> b) : backlog_(std::move(b)) {}
  ~MemoryListener() override { close(); }

  std::unique_ptr<Stream> accept() override {
    std::unique_lock lock(backlog_->mu);
    backlog_->cv.wait(lock, [&] { return !backlog_->queue.empty() || backlog_->closed; });
    if (backlog_->queue.empty()) return nullptr;
    auto s = std::move(backlog_->queue.front());
    backlog_->queue.pop_front();
    return s;
  }

  void close() override {
    std::lock_guard lock(backlog_->mu);
    backlog_->closed = true;
    backlog_->cv.notify_all();
  }

 private:
  std::shared_ptr<MemoryNetwork::Backlog> backlog_;
};

std::unique_ptr<Listener> MemoryNetwork::listen(const std::string& address) {
  auto backlog = std::make_shared<Backlog>();
  std::lock_guard lock(mu_);
  listeners_[address] = backlog;
  return std::make_unique<MemoryListener>(backlog);
}

std::unique_ptr<Stream> MemoryNetwork::dial(const std::string& address, const std::string& from) {
  std::shared_ptr<Backlog> backlog;
  {
    std::lock_guard lock(mu_);
    auto it = listeners_.find(address);
    if (it == listeners_.end()) throw std::runtime_error("nothing listens on " + address);
    backlog = it->second;
    log_.push_back({from, address});
  }
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  auto server_side = std::make_unique<MemoryStream>(a_to_b, b_to_a);
  auto client_side = std::make_unique<MemoryStream>(b_to_a, a_to_b);
  {
    std::lock_guard lock(backlog->mu);
    if (backlog->closed) throw std::runtime_error("listener on " + address + " is closed");
    backlog->queue.push_back(std::move(server_side));
    backlog->cv.notify_all();
  }
  return client_side;
}

std::vector<MemoryNetwork::DialRecord> MemoryNetwork::dial_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

}  // namespace dtree::relay
