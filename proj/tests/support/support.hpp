#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include <unistd.h>

#include "dtree/accounts.hpp"
#include "dtree/clock.hpp"
#include "dtree/core.hpp"

namespace dtree::testing {

inline std::shared_ptr<const PasswordHasher> fast_hasher() {
  static auto h = std::make_shared<const Argon2Hasher>(Argon2Hasher::Strength::Minimal);
  return h;
}

inline constexpr const char* kPassword = "password1";

/// A Core on a manual clock with cheap password hashing.
struct World {
  ManualClock clock;
  Core core;

  explicit World(CoreConfig config = {}, std::chrono::microseconds tick = std::chrono::microseconds{1})
      : clock(from_micros(1'500'000'000'000'000), tick), core(clock, fast_hasher(), config) {}

  UserId user(const std::string& name) { return core.register_user(name, kPassword).id; }
};

/// Deletes the directory tree on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dtree-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace dtree::testing
