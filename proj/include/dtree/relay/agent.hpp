#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dtree/mounts.hpp"
#include "dtree/relay/transport.hpp"
#include "dtree/relay/wire.hpp"

namespace dtree::relay {

/// Read-only view of the agent's exported directories. Only paths that
/// already passed validate_relative_path reach this layer, and each access is
/// re-checked against the share root after symlink resolution.
class ShareFs {
 public:
  explicit ShareFs(std::map<std::string, std::filesystem::path> shares);

  [[nodiscard]] std::vector<RemoteEntry> list(const std::string& share, const std::string& rel) const;
  /// Canonical path of a regular file inside the share.
  [[nodiscard]] std::filesystem::path open_file(const std::string& share, const std::string& rel) const;

  /// Number of calls that reached the filesystem. Tests use it to prove that
  /// rejected paths never got this far.
  [[nodiscard]] std::uint64_t accesses() const { return accesses_.load(); }

 private:
  std::filesystem::path resolve(const std::string& share, const std::string& rel) const;

  std::map<std::string, std::filesystem::path> shares_;  // canonical roots
  mutable std::atomic<std::uint64_t> accesses_{0};
};

struct AgentConfig {
  std::string agent_id;
  std::string token;
  std::map<std::string, std::filesystem::path> shares;  // label -> local dir
  std::chrono::milliseconds heartbeat_interval{10'000};
  std::chrono::milliseconds handshake_timeout{5'000};
};

/// Fault injection for relay tests.
struct AgentFaults {
  /// Stop sending anything (chunks and heartbeats) after this many chunks,
  /// without closing the connection.
  std::optional<std::uint64_t> freeze_after_chunks;
  /// Close the connection after this many chunks.
  std::optional<std::uint64_t> drop_after_chunks;
};

/// Reference mount agent. Dials the relay, authenticates, then answers
/// LIST_REQ and FETCH_REQ for its shares and sends PING every heartbeat.
class Agent {
 public:
  explicit Agent(AgentConfig config, AgentFaults faults = {});
  ~Agent();
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  /// Performs the handshake on an already-dialed stream and starts serving.
  /// Throws Error(AuthFailed) or Error(ProtocolError).
  void attach(std::unique_ptr<Stream> stream);
  /// Blocks until the connection ends or stop() is called.
  void wait();
  void stop();
  [[nodiscard]] bool connected() const { return connected_.load(); }

  /// Dial-and-serve loop with reconnect back-off, for long-running agents.
  /// `dial` is invoked for every attempt. Returns when stop() is called or
  /// authentication fails.
  void run(const std::function<std::unique_ptr<Stream>()>& dial, std::chrono::milliseconds max_backoff);

  [[nodiscard]] const ShareFs& fs() const { return fs_; }

 private:
  void read_loop();
  void ping_loop();
  void handle(const Message& m);
  void serve_fetch(Message m);
  void send(const Message& m);
  bool frozen() const { return frozen_.load(); }
  void join_all();
  /// Waits for one chunk of credit. False if the transfer should stop.
  bool take_credit(std::uint64_t corr);

  AgentConfig config_;
  AgentFaults faults_;
  ShareFs fs_;
  std::unique_ptr<Stream> stream_;
  std::mutex write_mu_;
  std::atomic<bool> connected_{false};
  std::atomic<bool> stopping_{false};
  std::atomic<bool> frozen_{false};
  std::atomic<std::uint64_t> chunks_sent_{0};
  std::atomic<std::uint64_t> next_corr_{1};

  std::mutex mu_;
  std::condition_variable cv_;
  std::thread reader_;
  std::thread pinger_;
  std::vector<std::thread> workers_;

  struct Credit {
    std::size_t available = 0;
    bool unlimited = false;
    bool cancelled = false;
  };
  std::map<std::uint64_t, Credit> credits_;  // by fetch correlation id, guarded by mu_
};

}  // namespace dtree::relay
