#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtree/clock.hpp"
#include "dtree/ids.hpp"

namespace dtree {

inline constexpr std::size_t kMinPasswordLength = 8;
inline constexpr std::string_view kSystemUsername = "system";

struct UserAccount {
  UserId id;
  std::string username;
  std::string password_hash;  // empty: login disabled (system account)
  Timestamp created_at;

  bool operator==(const UserAccount&) const = default;
};

/// Seam for the password digest. The default is Argon2id via libsodium.
class PasswordHasher {
 public:
  virtual ~PasswordHasher() = default;
  [[nodiscard]] virtual std::string hash(std::string_view password) const = 0;
  [[nodiscard]] virtual bool verify(std::string_view stored, std::string_view password) const = 0;
};

class Argon2Hasher final : public PasswordHasher {
 public:
  enum class Strength { Interactive, Minimal };
  explicit Argon2Hasher(Strength strength = Strength::Interactive);

  [[nodiscard]] std::string hash(std::string_view password) const override;
  [[nodiscard]] bool verify(std::string_view stored, std::string_view password) const override;

 private:
  std::uint64_t ops_;
  std::size_t mem_;
};

/// Registered users. Usernames are unique under ASCII case folding.
class AccountStore {
 public:
  /// Creates the built-in system account that owns the root.
  explicit AccountStore(Timestamp now);

  const UserAccount& add(std::string_view username, std::string password_hash, Timestamp now);
  [[nodiscard]] const UserAccount* find(UserId id) const;
  [[nodiscard]] const UserAccount* find_by_name(std::string_view username) const;
  [[nodiscard]] bool exists(UserId id) const { return find(id) != nullptr; }
  [[nodiscard]] UserId system_user() const { return UserId{1}; }

  [[nodiscard]] const std::map<UserId, UserAccount>& all() const { return accounts_; }
  [[nodiscard]] std::uint64_t next_id() const { return next_id_; }

  static AccountStore rebuild(std::vector<UserAccount> accounts, std::uint64_t next_id);

 private:
  AccountStore() = default;

  std::map<UserId, UserAccount> accounts_;
  std::map<std::string, UserId> by_name_;
  std::uint64_t next_id_ = 1;
};

/// Throws InvalidArgument unless the username is 1-64 chars of [A-Za-z0-9_.-]
/// and not all digits.
void validate_username(std::string_view username);

/// Fills a buffer with cryptographically random bytes.
using RandomSource = std::function<void(std::span<std::uint8_t>)>;
RandomSource system_random();

inline constexpr std::size_t kTokenBytes = 32;

struct Session {
  UserId user;
  Timestamp expires_at;
};

/// Bearer tokens. Not persisted: a restart logs everybody out.
class SessionStore {
 public:
  SessionStore(const Clock& clock, std::chrono::microseconds ttl, RandomSource random = system_random());

  std::string issue(UserId user);
  /// The token's user, or nullopt for unknown or expired tokens.
  std::optional<UserId> resolve(std::string_view token);
  void revoke(std::string_view token);

 private:
  const Clock& clock_;
  std::chrono::microseconds ttl_;
  RandomSource random_;
  std::mutex mu_;
  std::unordered_map<std::string, Session> sessions_;
};

}  // namespace dtree
