// dtreed: directory tree server. Serves the HTTP API and accepts mount agent
// connections on a second port.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "dtree/clock.hpp"
#include "dtree/core.hpp"
#include "dtree/http_api.hpp"
#include "dtree/mount_service.hpp"
#include "dtree/relay/hub.hpp"
#include "dtree/snapshot.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

std::pair<std::string, std::uint16_t> split_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw CLI::ValidationError("address must be host:port: " + addr);
  return {addr.substr(0, colon), static_cast<std::uint16_t>(std::stoul(addr.substr(colon + 1)))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dtreed: directory tree server"};
  std::string listen = "127.0.0.1:8080";
  std::string agent_listen = "127.0.0.1:8081";
  std::string data_dir = "./dtree-data";
  int snapshot_interval = 60;
  std::string static_dir;
  app.add_option("--listen", listen, "HTTP address host:port")->envname("DTREE_LISTEN");
  app.add_option("--agent-listen", agent_listen, "Agent relay address host:port")->envname("DTREE_AGENT_LISTEN");
  app.add_option("--data-dir", data_dir, "Snapshot directory")->envname("DTREE_DATA_DIR");
  app.add_option("--snapshot-interval", snapshot_interval, "Seconds between snapshots (0 disables)")
      ->envname("DTREE_SNAPSHOT_INTERVAL");
  app.add_option("--static-dir", static_dir, "Browser client assets served at /")->envname("DTREE_STATIC_DIR");
  CLI11_PARSE(app, argc, argv);

  try {
    dtree::SystemClock clock;
    dtree::Core core(clock, std::make_shared<dtree::Argon2Hasher>());
    const std::filesystem::path snapshot = std::filesystem::path(data_dir) / "snapshot.json";
    std::filesystem::create_directories(data_dir);
    if (std::filesystem::exists(snapshot)) {
      core.replace_state(dtree::load_state(snapshot));
      std::cerr << "loaded " << snapshot << '\n';
    }

    dtree::relay::RelayHub hub([&core](std::string_view token) { return core.authenticate(token); });
    auto [agent_host, agent_port] = split_addr(agent_listen);
    hub.serve(std::make_unique<dtree::relay::TcpListener>(agent_host, agent_port));
    dtree::MountService mounts(core, hub);

    dtree::ApiOptions opts;
    if (!static_dir.empty()) opts.static_dir = static_dir;
    dtree::ApiServer api(core, &mounts, opts);
    auto [host, port] = split_addr(listen);
    auto bound = api.start(host, port);
    std::cerr << "listening on " << host << ':' << bound << ", agents on " << agent_listen << '\n';

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    auto save = [&] {
      try {
        dtree::save_state(core.snapshot(), snapshot);
      } catch (const std::exception& e) {
        std::cerr << "snapshot failed: " << e.what() << '\n';
      }
    };
    auto last = std::chrono::steady_clock::now();
    while (!g_stop) {
      std::this_thread::sleep_for(std::chrono::milliseconds{200});
      if (snapshot_interval > 0 && std::chrono::steady_clock::now() - last >= std::chrono::seconds{snapshot_interval}) {
        save();
        last = std::chrono::steady_clock::now();
      }
    }
    std::cerr << "shutting down\n";
    api.stop();
    hub.stop();
    save();
  } catch (const std::exception& e) {
    std::cerr << "dtreed: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
