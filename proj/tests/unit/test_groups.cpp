#include <doctest.h>

#include <random>
#include <set>

#include "dtree/error.hpp"
#include "dtree/groups.hpp"
#include "support.hpp"

using namespace dtree;
using dtree::testing::World;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::NotFound;
}

const Timestamp kT = from_micros(1'000);

}  // namespace

TEST_SUITE("groups") {
  TEST_CASE("public join is immediate") {
    GroupState g;
    CHECK(g.join(UserId{5}, Visibility::Public, kT) == JoinOutcome::Joined);
    CHECK(g.is_member(UserId{5}));
    CHECK(code_of([&] { g.join(UserId{5}, Visibility::Public, kT); }) == Errc::AlreadyMember);
  }

  TEST_CASE("private join queues in order and review decides") {
    GroupState g;
    CHECK(g.join(UserId{5}, Visibility::Private, from_micros(1)) == JoinOutcome::ApplicationPending);
    CHECK(g.join(UserId{6}, Visibility::Private, from_micros(2)) == JoinOutcome::ApplicationPending);
    CHECK(code_of([&] { g.join(UserId{5}, Visibility::Private, kT); }) == Errc::AlreadyPending);
    REQUIRE(g.pending().size() == 2);
    CHECK(g.pending()[0].user == UserId{5});
    g.review(UserId{5}, Decision::Permit);
    g.review(UserId{6}, Decision::Refuse);
    CHECK(g.is_member(UserId{5}));
    CHECK_FALSE(g.is_member(UserId{6}));
    CHECK(g.pending().empty());
    CHECK(code_of([&] { g.review(UserId{6}, Decision::Permit); }) == Errc::NoSuchApplication);
  }

  TEST_CASE("stale application is consumed when the group turns public") {
    GroupState g;
    g.join(UserId{5}, Visibility::Private, kT);
    CHECK(g.join(UserId{5}, Visibility::Public, kT) == JoinOutcome::Joined);
    CHECK_FALSE(g.is_pending(UserId{5}));
    CHECK(g.consistent());
  }

  TEST_CASE("blacklist evicts and blocks") {
    GroupState g;
    g.join(UserId{5}, Visibility::Public, kT);
    g.join(UserId{6}, Visibility::Private, kT);
    g.blacklist(UserId{5});
    g.blacklist(UserId{6});
    CHECK(g.members().empty());
    CHECK(g.pending().empty());
    CHECK(code_of([&] { g.join(UserId{5}, Visibility::Public, kT); }) == Errc::Blacklisted);
    CHECK(code_of([&] { g.blacklist(UserId{5}); }) == Errc::AlreadyBlacklisted);
    g.unblacklist(UserId{5});
    CHECK(code_of([&] { g.unblacklist(UserId{5}); }) == Errc::NotBlacklisted);
    CHECK(g.join(UserId{5}, Visibility::Public, kT) == JoinOutcome::Joined);
  }

  TEST_CASE("remove member") {
    GroupState g;
    CHECK(code_of([&] { g.remove_member(UserId{5}); }) == Errc::NotMember);
    g.join(UserId{5}, Visibility::Public, kT);
    g.remove_member(UserId{5});
    CHECK_FALSE(g.is_member(UserId{5}));
  }

  TEST_CASE("random transitions keep the sets disjoint") {
    std::mt19937_64 rng(99);
    for (int run = 0; run < 200; ++run) {
      GroupState g;
      for (int step = 0; step < 200; ++step) {
        UserId u{1 + rng() % 6};
        auto vis = (rng() & 1U) ? Visibility::Public : Visibility::Private;
        try {
          switch (rng() % 6) {
            case 0: g.join(u, vis, kT); break;
            case 1: g.review(u, (rng() & 1U) ? Decision::Permit : Decision::Refuse); break;
            case 2: g.remove_member(u); break;
            case 3: g.blacklist(u); break;
            case 4: g.unblacklist(u); break;
            default: g.join(u, Visibility::Private, kT); break;
          }
        } catch (const Error&) {
        }
        REQUIRE(g.consistent());
      }
    }
  }

  TEST_CASE("Core join rules") {
    World w;
    auto owner = w.user("owner");
    auto u = w.user("u");
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    CHECK(code_of([&] { w.core.join(d, owner); }) == Errc::InvalidArgument);
    CHECK(code_of([&] { w.core.join(d, UserId{999}); }) == Errc::Unauthenticated);
    w.core.set_visibility(d, owner, Visibility::Private);
    CHECK(w.core.join(d, u) == JoinOutcome::ApplicationPending);
    auto pending = w.core.pending_applications(d, owner);
    REQUIRE(pending.size() == 1);
    CHECK(pending[0].user == u);
    CHECK_FALSE(w.core.roles_of(u, d).contains(Role::ThisGroup));
    w.core.review_application(d, owner, u, Decision::Permit);
    CHECK(w.core.roles_of(u, d).contains(Role::ThisGroup));
    w.core.remove_member(d, owner, u);
    CHECK_FALSE(w.core.roles_of(u, d).contains(Role::ThisGroup));
    CHECK(code_of([&] { w.core.blacklist_user(d, owner, owner); }) == Errc::InvalidArgument);
    w.core.trash_directory(d, owner);
    CHECK(code_of([&] { w.core.join(d, u); }) == Errc::NotFound);
  }

  TEST_CASE("ThisGroup role tracks membership") {
    World w;
    auto owner = w.user("owner");
    std::vector<UserId> users;
    for (int i = 0; i < 5; ++i) users.push_back(w.user("u" + std::to_string(i)));
    auto d = w.core.create_directory(kRootId, "d", owner).id;
    std::mt19937_64 rng(5);
    for (int step = 0; step < 300; ++step) {
      auto u = users[rng() % users.size()];
      try {
        switch (rng() % 5) {
          case 0: w.core.join(d, u); break;
          case 1: w.core.remove_member(d, owner, u); break;
          case 2: w.core.blacklist_user(d, owner, u); break;
          case 3: w.core.unblacklist_user(d, owner, u); break;
          default:
            w.core.set_visibility(d, owner, (rng() & 1U) ? Visibility::Public : Visibility::Private);
            break;
        }
      } catch (const Error&) {
      }
      auto g = w.core.group_state(d);
      REQUIRE(g.consistent());
      for (auto x : users) REQUIRE(w.core.roles_of(x, d).contains(Role::ThisGroup) == g.is_member(x));
    }
  }
}
