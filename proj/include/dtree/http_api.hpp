#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtree/core.hpp"
#include "dtree/error.hpp"
#include "dtree/mount_service.hpp"

namespace dtree {

/// HTTP status for a domain error class.
int http_status(Errc code);

struct Endpoint {
  std::string method;
  std::string pattern;  // e.g. "/api/dirs/{id}/children"

  auto operator<=>(const Endpoint&) const = default;
};

/// Every route the server registers.
const std::vector<Endpoint>& api_endpoints();

/// True if `path` (no query string) matches `pattern`.
bool endpoint_matches(const Endpoint& e, std::string_view method, std::string_view path);

struct ApiOptions {
  /// Served at / when set (the browser client bundle).
  std::optional<std::filesystem::path> static_dir;
  int worker_threads = 8;
};

/// The HTTP+JSON surface. Every handler resolves the bearer token and then
/// delegates to Core or MountService, which re-derive permissions.
class ApiServer {
 public:
  /// `mounts` may be null; mount endpoints then answer 503.
  ApiServer(Core& core, MountService* mounts, ApiOptions options = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds; port 0 picks an ephemeral port. Returns the bound port.
  std::uint16_t bind(const std::string& host, std::uint16_t port);
  /// Serves until stop(). Requires bind().
  void run();
  /// bind + run on a background thread; returns once accepting.
  std::uint16_t start(const std::string& host, std::uint16_t port);
  void stop();

  /// Called with (method, path) for every request served. Install before start().
  void set_request_observer(std::function<void(const std::string&, const std::string&)> observer);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dtree
