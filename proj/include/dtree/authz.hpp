#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <set>
#include <string_view>

#include "dtree/ids.hpp"

namespace dtree {

enum class Role : std::uint8_t { DirCreator = 0, ThisGroup = 1, GrantGroup = 2, GrantUser = 3, AnyUser = 4 };
enum class Right : std::uint8_t { Publish = 0, Read = 1, CreateSubDir = 2, ShowDir = 3 };

inline constexpr std::size_t kRoleCount = 5;
inline constexpr std::size_t kRightCount = 4;
inline constexpr std::array<Role, kRoleCount> kAllRoles{Role::DirCreator, Role::ThisGroup, Role::GrantGroup,
                                                        Role::GrantUser, Role::AnyUser};
inline constexpr std::array<Right, kRightCount> kAllRights{Right::Publish, Right::Read, Right::CreateSubDir,
                                                           Right::ShowDir};

/// Wire names. These are fixed by the API contract.
std::string_view role_name(Role role);
std::string_view right_name(Right right);
std::optional<Role> parse_role(std::string_view name);
std::optional<Right> parse_right(std::string_view name);

/// Set of roles a principal holds toward one directory.
class RoleSet {
 public:
  constexpr RoleSet() = default;
  constexpr explicit RoleSet(std::uint8_t bits) : bits_(bits & 0x1F) {}
  RoleSet(std::initializer_list<Role> roles) {
    for (Role r : roles) insert(r);
  }

  void insert(Role r) { bits_ |= static_cast<std::uint8_t>(1U << static_cast<unsigned>(r)); }
  void erase(Role r) { bits_ &= static_cast<std::uint8_t>(~(1U << static_cast<unsigned>(r))); }
  [[nodiscard]] bool contains(Role r) const { return (bits_ >> static_cast<unsigned>(r)) & 1U; }
  [[nodiscard]] bool empty() const { return bits_ == 0; }
  [[nodiscard]] std::uint8_t bits() const { return bits_; }

  bool operator==(const RoleSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

/// The per-directory role x right grid: 20 boolean cells, all always defined.
class AuthMatrix {
 public:
  static constexpr std::size_t kCells = kRoleCount * kRightCount;

  AuthMatrix() = default;
  static AuthMatrix from_bits(std::uint32_t bits);
  static AuthMatrix all(bool value);

  [[nodiscard]] bool get(Role role, Right right) const { return cells_.test(index(role, right)); }
  void set(Role role, Right right, bool value) { cells_.set(index(role, right), value); }
  [[nodiscard]] std::uint32_t bits() const { return static_cast<std::uint32_t>(cells_.to_ulong()); }

  /// True iff some role in `roles` has `right` checked.
  [[nodiscard]] bool permits(RoleSet roles, Right right) const;

  bool operator==(const AuthMatrix&) const = default;

 private:
  static constexpr std::size_t index(Role role, Right right) {
    return static_cast<std::size_t>(role) * kRightCount + static_cast<std::size_t>(right);
  }
  std::bitset<kCells> cells_;
};

/// Owner: every right. Group members: publish, read, show. Any logged-in
/// user: read and show. Grant roles start empty.
AuthMatrix default_matrix();

/// Matrix installed on the root at first boot.
AuthMatrix root_matrix();

/// The facts about a principal that decide its roles on one directory.
struct RoleFacts {
  bool authenticated = false;
  bool owner = false;
  bool member = false;
  bool granted_user = false;
  bool granted_group_member = false;
  bool blacklisted = false;
};

/// Blacklisting removes every role; unauthenticated principals hold none.
RoleSet derive_roles(const RoleFacts& facts);

struct GrantSet {
  std::set<UserId> users;
  std::set<DirectoryId> groups;

  bool operator==(const GrantSet&) const = default;
};

}  // namespace dtree
