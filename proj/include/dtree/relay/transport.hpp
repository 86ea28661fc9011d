#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dtree::relay {

/// A reliable, ordered byte stream.
class Stream {
 public:
  virtual ~Stream() = default;
  /// Blocks until at least one byte is available. Returns 0 at end of stream.
  virtual std::size_t read_some(std::span<char> buf) = 0;
  /// Throws std::runtime_error if the stream is closed.
  virtual void write_all(std::string_view bytes) = 0;
  /// Unblocks readers on both ends; idempotent.
  virtual void shutdown() = 0;
};

/// Accept side. The relay server only ever holds one of these; it has no way
/// to initiate a connection.
class Listener {
 public:
  virtual ~Listener() = default;
  /// nullptr once closed.
  virtual std::unique_ptr<Stream> accept() = 0;
  virtual void close() = 0;
};

class TcpListener final : public Listener {
 public:
  /// port 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener() override;

  std::unique_ptr<Stream> accept() override;
  void close() override;
  [[nodiscard]] std::uint16_t port() const { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<Stream> tcp_connect(const std::string& host, std::uint16_t port);

/// In-process network for tests. Every dial is recorded with the name of the
/// party that initiated it.
class MemoryNetwork {
 public:
  struct DialRecord {
    std::string from;
    std::string to;
  };

  std::unique_ptr<Listener> listen(const std::string& address);
  /// Throws std::runtime_error if nobody listens on `address`.
  std::unique_ptr<Stream> dial(const std::string& address, const std::string& from);
  [[nodiscard]] std::vector<DialRecord> dial_log() const;

 private:
  struct Backlog;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Backlog>> listeners_;
  std::vector<DialRecord> log_;

  friend class MemoryListener;
};

}  // namespace dtree::relay
