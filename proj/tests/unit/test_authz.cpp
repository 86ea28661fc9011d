#include <doctest.h>

#include <random>

#include "dtree/authz.hpp"
#include "dtree/error.hpp"
#include "support.hpp"

using namespace dtree;
using dtree::testing::World;

namespace {

// Reference evaluation straight from the grid: walk every held role and OR
// its cell. Cells are addressed through get(), never through the bit layout.
bool oracle(const AuthMatrix& m, RoleSet roles, Right right) {
  bool any = false;
  for (Role r : kAllRoles) any = any || (roles.contains(r) && m.get(r, right));
  return any;
}

AuthMatrix random_matrix(std::mt19937_64& rng) {
  AuthMatrix m;
  for (Role r : kAllRoles) {
    for (Right x : kAllRights) m.set(r, x, (rng() & 1U) != 0);
  }
  return m;
}

}  // namespace

TEST_SUITE("authz") {
  TEST_CASE("default matrix cells") {
    auto m = default_matrix();
    for (Right r : kAllRights) CHECK(m.get(Role::DirCreator, r));
    CHECK(m.get(Role::ThisGroup, Right::Publish));
    CHECK(m.get(Role::ThisGroup, Right::Read));
    CHECK(m.get(Role::ThisGroup, Right::ShowDir));
    CHECK_FALSE(m.get(Role::ThisGroup, Right::CreateSubDir));
    CHECK(m.get(Role::AnyUser, Right::Read));
    CHECK(m.get(Role::AnyUser, Right::ShowDir));
    CHECK_FALSE(m.get(Role::AnyUser, Right::CreateSubDir));
    CHECK_FALSE(m.get(Role::AnyUser, Right::Publish));
    for (Right r : kAllRights) {
      CHECK_FALSE(m.get(Role::GrantGroup, r));
      CHECK_FALSE(m.get(Role::GrantUser, r));
    }
  }

  TEST_CASE("wire names round trip") {
    CHECK(role_name(Role::ThisGroup) == "thisGroup");
    CHECK(role_name(Role::AnyUser) == "AnyUser");
    CHECK(right_name(Right::CreateSubDir) == "CreateSubDir");
    for (Role r : kAllRoles) CHECK(parse_role(role_name(r)) == r);
    for (Right r : kAllRights) CHECK(parse_right(right_name(r)) == r);
    CHECK_FALSE(parse_role("Owner").has_value());
  }

  TEST_CASE("permits equals OR fold on random samples") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 20000; ++i) {
      auto m = random_matrix(rng);
      RoleSet roles = RoleSet(static_cast<std::uint8_t>(rng() & 31U));
      for (Right r : kAllRights) REQUIRE(m.permits(roles, r) == oracle(m, roles, r));
    }
  }

  TEST_CASE("monotone in roles") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 5000; ++i) {
      auto m = random_matrix(rng);
      RoleSet roles = RoleSet(static_cast<std::uint8_t>(rng() & 31U));
      for (Role extra : kAllRoles) {
        RoleSet more = roles;
        more.insert(extra);
        for (Right r : kAllRights) {
          if (m.permits(roles, r)) REQUIRE(m.permits(more, r));
        }
      }
    }
  }

  TEST_CASE("derive_roles") {
    RoleFacts f;
    CHECK(derive_roles(f).empty());  // unauthenticated
    f.authenticated = true;
    f.owner = true;
    CHECK(derive_roles(f) == RoleSet{Role::DirCreator, Role::AnyUser});
    f.blacklisted = true;
    CHECK(derive_roles(f).empty());
  }

  TEST_CASE("check_right through Core agrees with the oracle") {
    World w;
    auto owner = w.user("owner");
    auto member = w.user("member");
    auto granted = w.user("granted");
    auto outsider = w.user("outsider");
    auto g = w.core.create_directory(kRootId, "grp", owner).id;
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    w.core.join(d, member);
    w.core.grant_user(d, owner, granted);
    w.core.join(g, granted);
    w.core.grant_group(d, owner, g);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
      auto m = random_matrix(rng);
      w.core.set_matrix(d, owner, m);
      for (auto u : {owner, member, granted, outsider}) {
        auto roles = w.core.roles_of(u, d);
        for (Right r : kAllRights) REQUIRE(w.core.check_right(u, d, r) == oracle(m, roles, r));
      }
    }
    CHECK(w.core.roles_of(granted, d) == RoleSet{Role::GrantUser, Role::GrantGroup, Role::AnyUser});
  }

  TEST_CASE("all-false matrix denies the owner but administration still works") {
    World w;
    auto owner = w.user("owner");
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    w.core.set_matrix(d, owner, AuthMatrix{});
    for (Right r : kAllRights) CHECK_FALSE(w.core.check_right(owner, d, r));
    w.core.set_matrix(d, owner, default_matrix());
    CHECK(w.core.check_right(owner, d, Right::Publish));
  }

  TEST_CASE("administrative operations are owner-only") {
    World w;
    auto owner = w.user("owner");
    auto other = w.user("other");
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    w.core.set_matrix(d, owner, AuthMatrix::all(true));
    auto expect_not_owner = [](auto&& fn) {
      try {
        fn();
        FAIL("expected NotOwner");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::NotOwner);
      }
    };
    expect_not_owner([&] { w.core.set_matrix(d, other, AuthMatrix::all(true)); });
    expect_not_owner([&] { w.core.grant_user(d, other, other); });
    expect_not_owner([&] { w.core.revoke_user(d, other, other); });
    expect_not_owner([&] { w.core.grant_group(d, other, d); });
    expect_not_owner([&] { w.core.revoke_group(d, other, d); });
    expect_not_owner([&] { w.core.set_visibility(d, other, Visibility::Private); });
    expect_not_owner([&] { w.core.trash_directory(d, other); });
    expect_not_owner([&] { w.core.delete_directory(d, other); });
    expect_not_owner([&] { w.core.blacklist_user(d, other, owner); });
    expect_not_owner([&] { (void)w.core.pending_applications(d, other); });
  }

  TEST_CASE("grant errors") {
    World w;
    auto owner = w.user("owner");
    auto u = w.user("u");
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    w.core.grant_user(d, owner, u);
    CHECK_THROWS_AS(w.core.grant_user(d, owner, u), Error);
    w.core.revoke_user(d, owner, u);
    try {
      w.core.revoke_user(d, owner, u);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NotGranted);
    }
    try {
      w.core.grant_user(d, owner, UserId{999});
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UserNotFound);
    }
    try {
      w.core.grant_group(d, owner, DirectoryId{999});
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NotFound);
    }
  }

  TEST_CASE("group grant is evaluated live") {
    World w;
    auto owner = w.user("owner");
    auto student = w.user("student");
    auto a = w.core.create_directory(kRootId, "course-A", owner).id;
    auto b = w.core.create_directory(kRootId, "course-B", owner).id;
    auto m = default_matrix();
    m.set(Role::GrantGroup, Right::Publish, true);
    w.core.set_matrix(b, owner, m);
    w.core.grant_group(b, owner, a);
    CHECK_FALSE(w.core.check_right(student, b, Right::Publish));
    w.core.join(a, student);  // after the grant
    CHECK(w.core.check_right(student, b, Right::Publish));
    w.core.blacklist_user(a, owner, student);
    CHECK_FALSE(w.core.roles_of(student, b).contains(Role::GrantGroup));
    w.core.unblacklist_user(a, owner, student);
    w.core.join(a, student);
    w.core.revoke_group(b, owner, a);
    CHECK_FALSE(w.core.check_right(student, b, Right::Publish));
  }

  TEST_CASE("blacklist removes every role including AnyUser") {
    World w;
    auto owner = w.user("owner");
    auto u = w.user("u");
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    w.core.join(d, u);
    CHECK(w.core.check_right(u, d, Right::Read));
    w.core.blacklist_user(d, owner, u);
    CHECK(w.core.roles_of(u, d).empty());
    CHECK_FALSE(w.core.check_right(u, d, Right::Read));
    CHECK(w.core.group_state(d).members().empty());
  }

  TEST_CASE("weaker blacklist reading keeps AnyUser") {
    CoreConfig cfg;
    cfg.blacklist_denies_all = false;
    World w(cfg);
    auto owner = w.user("owner");
    auto u = w.user("u");
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    w.core.blacklist_user(d, owner, u);
    CHECK(w.core.roles_of(u, d) == RoleSet{Role::AnyUser});
    CHECK(w.core.check_right(u, d, Right::Read));
  }
}
