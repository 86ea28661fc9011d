#pragma once

#include <set>
#include <vector>

#include "dtree/ids.hpp"

namespace dtree {

enum class Visibility { Public, Private };
enum class JoinOutcome { Joined, ApplicationPending };
enum class Decision { Permit, Refuse };

struct PendingApplication {
  UserId user;
  Timestamp applied_at;

  bool operator==(const PendingApplication&) const = default;
};

/// Membership bookkeeping for the group attached to one directory.
///
/// Keeps members, pending and blacklist pairwise disjoint. Owner checks and
/// directory lifecycle checks are the caller's job; this class only enforces
/// the membership state machine.
class GroupState {
 public:
  JoinOutcome join(UserId user, Visibility visibility, Timestamp now);
  void review(UserId applicant, Decision decision);
  void remove_member(UserId user);
  void blacklist(UserId user);
  void unblacklist(UserId user);

  [[nodiscard]] bool is_member(UserId u) const { return members_.contains(u); }
  [[nodiscard]] bool is_blacklisted(UserId u) const { return blacklist_.contains(u); }
  [[nodiscard]] bool is_pending(UserId u) const;

  [[nodiscard]] const std::set<UserId>& members() const { return members_; }
  [[nodiscard]] const std::set<UserId>& blacklisted() const { return blacklist_; }
  /// Oldest application first.
  [[nodiscard]] const std::vector<PendingApplication>& pending() const { return pending_; }

  /// Checks the set-disjointness invariants. Used by tests and snapshot load.
  [[nodiscard]] bool consistent() const;

  /// Rebuilds state from persisted parts without replaying transitions.
  static GroupState restore(std::set<UserId> members, std::vector<PendingApplication> pending,
                            std::set<UserId> blacklist);

  bool operator==(const GroupState&) const = default;

 private:
  void drop_pending(UserId user);

  std::set<UserId> members_;
  std::vector<PendingApplication> pending_;
  std::set<UserId> blacklist_;
};

}  // namespace dtree
