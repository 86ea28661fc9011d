#include "dtree/groups.hpp"

#include <algorithm>

#include "dtree/error.hpp"

namespace dtree {

bool GroupState::is_pending(UserId u) const {
  return std::any_of(pending_.begin(), pending_.end(), [u](const auto& p) { return p.user == u; });
}

JoinOutcome GroupState::join(UserId user, Visibility visibility, Timestamp now) {
  if (blacklist_.contains(user)) fail(Errc::Blacklisted);
  if (members_.contains(user)) fail(Errc::AlreadyMember);
  if (is_pending(user)) {
    // A directory made public after the application was filed admits the
    // applicant on a fresh join; the stale application is consumed.
    if (visibility == Visibility::Private) fail(Errc::AlreadyPending);
    drop_pending(user);
  }
  if (visibility == Visibility::Public) {
    members_.insert(user);
    return JoinOutcome::Joined;
  }
  pending_.push_back({user, now});
  return JoinOutcome::ApplicationPending;
}

void GroupState::review(UserId applicant, Decision decision) {
  if (!is_pending(applicant)) fail(Errc::NoSuchApplication);
  drop_pending(applicant);
  if (decision == Decision::Permit) members_.insert(applicant);
}

void GroupState::remove_member(UserId user) {
  if (members_.erase(user) == 0) fail(Errc::NotMember);
}

void GroupState::blacklist(UserId user) {
  if (!blacklist_.insert(user).second) fail(Errc::AlreadyBlacklisted);
  members_.erase(user);
  drop_pending(user);
}

void GroupState::unblacklist(UserId user) {
  if (blacklist_.erase(user) == 0) fail(Errc::NotBlacklisted);
}

void GroupState::drop_pending(UserId user) {
  std::erase_if(pending_, [user](const auto& p) { return p.user == user; });
}

bool GroupState::consistent() const {
  std::set<UserId> seen;
  for (const auto& p : pending_) {
    if (!seen.insert(p.user).second) return false;
    if (members_.contains(p.user) || blacklist_.contains(p.user)) return false;
  }
  return std::none_of(members_.begin(), members_.end(), [&](UserId u) { return blacklist_.contains(u); });
}

GroupState GroupState::restore(std::set<UserId> members, std::vector<PendingApplication> pending,
                               std::set<UserId> blacklist) {
  GroupState g;
  g.members_ = std::move(members);
  g.pending_ = std::move(pending);
  g.blacklist_ = std::move(blacklist);
  return g;
}

}  // namespace dtree
