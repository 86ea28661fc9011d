#include "dtree/authz.hpp"

namespace dtree {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::DirCreator: return "DirCreator";
    case Role::ThisGroup: return "thisGroup";
    case Role::GrantGroup: return "grantGroup";
    case Role::GrantUser: return "grantUser";
    case Role::AnyUser: return "AnyUser";
  }
  return {};
}

std::string_view right_name(Right right) {
  switch (right) {
    case Right::Publish: return "Publish";
    case Right::Read: return "Read";
    case Right::CreateSubDir: return "CreateSubDir";
    case Right::ShowDir: return "ShowDir";
  }
  return {};
}

std::optional<Role> parse_role(std::string_view name) {
  for (Role r : kAllRoles) {
    if (role_name(r) == name) return r;
  }
  return std::nullopt;
}

std::optional<Right> parse_right(std::string_view name) {
  for (Right r : kAllRights) {
    if (right_name(r) == name) return r;
  }
  return std::nullopt;
}

AuthMatrix AuthMatrix::from_bits(std::uint32_t bits) {
  AuthMatrix m;
  m.cells_ = std::bitset<kCells>(bits & ((1U << kCells) - 1));
  return m;
}

AuthMatrix AuthMatrix::all(bool value) { return from_bits(value ? 0xFFFFFU : 0U); }

bool AuthMatrix::permits(RoleSet roles, Right right) const {
  // Gather the right's column into a 5-bit role mask, then intersect.
  std::uint32_t bits = this->bits() >> static_cast<unsigned>(right);
  std::uint8_t column = 0;
  for (unsigned r = 0; r < kRoleCount; ++r) {
    column |= static_cast<std::uint8_t>(((bits >> (r * kRightCount)) & 1U) << r);
  }
  return (column & roles.bits()) != 0;
}

AuthMatrix default_matrix() {
  AuthMatrix m;
  for (Right r : kAllRights) m.set(Role::DirCreator, r, true);
  m.set(Role::ThisGroup, Right::Publish, true);
  m.set(Role::ThisGroup, Right::Read, true);
  m.set(Role::ThisGroup, Right::ShowDir, true);
  m.set(Role::AnyUser, Right::Read, true);
  m.set(Role::AnyUser, Right::ShowDir, true);
  return m;
}

AuthMatrix root_matrix() {
  AuthMatrix m = default_matrix();
  m.set(Role::AnyUser, Right::CreateSubDir, true);
  return m;
}

RoleSet derive_roles(const RoleFacts& facts) {
  RoleSet roles;
  if (!facts.authenticated || facts.blacklisted) return roles;
  if (facts.owner) roles.insert(Role::DirCreator);
  if (facts.member) roles.insert(Role::ThisGroup);
  if (facts.granted_group_member) roles.insert(Role::GrantGroup);
  if (facts.granted_user) roles.insert(Role::GrantUser);
  roles.insert(Role::AnyUser);
  return roles;
}

}  // namespace dtree
