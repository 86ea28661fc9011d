#pragma once

// A hub, a Core with one account, and helpers to attach agents over either
// loopback TCP or the in-memory network.

#include <chrono>
#include <fstream>
#include <memory>
#include <string>
#include <thread>

#include "dtree/mount_service.hpp"
#include "dtree/relay/agent.hpp"
#include "dtree/relay/hub.hpp"
#include "support.hpp"

namespace dtree::testing {

using namespace std::chrono_literals;

inline relay::RelayConfig quick_relay_config() {
  relay::RelayConfig c;
  c.heartbeat_interval = 50ms;
  c.missed_heartbeats = 4;
  c.list_timeout = 500ms;
  c.fetch_idle_timeout = 400ms;
  c.chunk_size = 4096;
  c.fetch_window = 4;
  return c;
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Polls `pred` for up to `limit`.
template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = 3000ms) {
  auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

struct RelayRig {
  // Real time: heartbeats and token expiry are measured on the system clock.
  SystemClock clock;
  Core core{clock, fast_hasher()};
  UserId owner;
  std::string token;
  TempDir share_root;
  relay::RelayHub hub;
  MountService mounts{core, hub};
  std::uint16_t port = 0;

  explicit RelayRig(relay::RelayConfig config = quick_relay_config())
      : hub([this](std::string_view t) { return core.authenticate(t); }, config) {
    owner = core.register_user("owner", kPassword).id;
    token = core.login("owner", kPassword);
  }

  ~RelayRig() { hub.stop(); }

  void serve_tcp() {
    auto l = std::make_unique<relay::TcpListener>("127.0.0.1", 0);
    port = l->port();
    hub.serve(std::move(l));
  }

  relay::AgentConfig agent_config(const std::string& agent_id = "laptop") const {
    relay::AgentConfig c;
    c.agent_id = agent_id;
    c.token = token;
    c.shares = {{"share", share_root.path()}};
    c.heartbeat_interval = 20ms;
    c.handshake_timeout = 2000ms;
    return c;
  }

  std::unique_ptr<relay::Agent> attach_tcp(relay::AgentConfig c, relay::AgentFaults faults = {}) {
    auto a = std::make_unique<relay::Agent>(std::move(c), faults);
    a->attach(relay::tcp_connect("127.0.0.1", port));
    return a;
  }
};

/// Relative paths that try to leave a share one way or another.
inline const std::vector<std::string>& traversal_corpus() {
  static const std::vector<std::string> v{
      "..",          "../",        "../etc/passwd", "a/../../b",   "a/..",          "/etc/passwd", "/",
      "./../x",      "a\\..\\b",   "..\\x",         "C:\\x",       std::string("a\0b", 3),        "a\x01",
      "a\nb",        "x/../../..", "share/../../", "a/./../../b", "//etc",
  };
  return v;
}

/// Drains a fetch into a string.
inline std::string drain(relay::FetchStream& fs) {
  std::string out;
  while (auto chunk = fs.next()) out += *chunk;
  return out;
}

}  // namespace dtree::testing
