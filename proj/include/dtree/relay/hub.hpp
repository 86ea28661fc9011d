#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dtree/ids.hpp"
#include "dtree/mounts.hpp"
#include "dtree/relay/transport.hpp"
#include "dtree/relay/wire.hpp"

namespace dtree::relay {

struct RelayConfig {
  std::chrono::milliseconds heartbeat_interval{10'000};
  int missed_heartbeats = 3;
  std::chrono::milliseconds list_timeout{5'000};
  std::chrono::milliseconds fetch_idle_timeout{30'000};
  std::size_t chunk_size = 64U << 10U;
  /// Chunk credit per fetch: the agent may have this many chunks in flight
  /// beyond what the consumer has taken.
  std::size_t fetch_window = 16;
};

class RelayHub;

/// Pull side of a relayed file transfer. Chunks arrive as the agent sends
/// them; at most RelayConfig::fetch_window are held in memory.
class FetchStream {
 public:
  ~FetchStream();
  FetchStream(const FetchStream&) = delete;
  FetchStream& operator=(const FetchStream&) = delete;

  /// Next chunk, or nullopt once the agent reports the end of the file.
  /// Throws TransferTimeout when the agent goes silent or disconnects
  /// mid-transfer, RemotePathRejected / NotFound when the agent refuses.
  std::optional<std::string> next();

  [[nodiscard]] std::uint64_t bytes_received() const { return bytes_; }
  /// True when the transfer failed after delivering some data.
  [[nodiscard]] bool partial() const { return failed_ && bytes_ > 0; }

 private:
  friend class RelayHub;
  struct Impl;
  explicit FetchStream(std::unique_ptr<Impl> impl);

  std::unique_ptr<Impl> impl_;
  std::uint64_t bytes_ = 0;
  std::uint64_t next_seq_ = 0;
  bool done_ = false;
  bool failed_ = false;
};

/// Server end of the mount relay. Agents connect out to it, authenticate
/// with a session token, and keep the connection open; listing and fetch
/// requests are multiplexed over that connection by correlation id.
class RelayHub {
 public:
  using Authenticator = std::function<std::optional<UserId>(std::string_view token)>;

  explicit RelayHub(Authenticator auth, RelayConfig config = {});
  ~RelayHub();
  RelayHub(const RelayHub&) = delete;
  RelayHub& operator=(const RelayHub&) = delete;

  /// Starts accepting agent connections. Call once.
  void serve(std::unique_ptr<Listener> listener);
  void stop();

  [[nodiscard]] bool is_live(UserId account, std::string_view agent_id) const;
  [[nodiscard]] std::size_t live_sessions() const;

  /// Entries of `path` inside `share` (binding/label fields left empty).
  /// Throws AgentOffline, TransferTimeout, RemotePathRejected, NotFound.
  std::vector<RemoteEntry> list(UserId account, std::string_view agent_id, std::string_view share,
                                std::string_view path);
  std::unique_ptr<FetchStream> fetch(UserId account, std::string_view agent_id, std::string_view share,
                                     std::string_view path);

  [[nodiscard]] const RelayConfig& config() const { return config_; }

 private:
  struct Request;
  struct Session;
  friend class FetchStream;

  void accept_loop();
  void reap_loop();
  void run_connection(const std::shared_ptr<Session>& s);
  void route(Session& s, Message m);
  std::shared_ptr<Session> live_session(UserId account, std::string_view agent_id) const;
  [[nodiscard]] bool stale(const Session& s) const;

  Authenticator auth_;
  RelayConfig config_;
  std::unique_ptr<Listener> listener_;
  std::atomic<std::uint64_t> next_corr_{1};
  std::atomic<bool> stopping_{false};

  mutable std::mutex mu_;
  std::condition_variable stop_cv_;
  std::map<std::pair<UserId, std::string>, std::shared_ptr<Session>> sessions_;
  std::vector<std::shared_ptr<Session>> connections_;
  std::vector<std::thread> conn_threads_;
  std::thread accept_thread_;
  std::thread reap_thread_;
};

}  // namespace dtree::relay
