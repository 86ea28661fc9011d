#include "dtree/core.hpp"

#include <mutex>

#include "dtree/error.hpp"

namespace dtree {

State::State(Timestamp now) : accounts(now), tree(accounts.system_user(), now) {}

State::State(AccountStore a, TreeStore t, std::map<BindingId, MountBinding> b, std::uint64_t next_b)
    : accounts(std::move(a)), tree(std::move(t)), bindings(std::move(b)), next_binding(next_b) {}

Core::Core(const Clock& clock, std::shared_ptr<const PasswordHasher> hasher, CoreConfig config, RandomSource random)
    : clock_(clock),
      hasher_(std::move(hasher)),
      config_(config),
      state_(clock.now()),
      sessions_(clock, config.session_ttl, std::move(random)) {
  rebuild_index_locked();
}

// ---------------------------------------------------------------------------
// accounts

UserAccount Core::register_user(std::string_view username, std::string_view password) {
  validate_username(username);
  if (password.size() < kMinPasswordLength) fail(Errc::WeakPassword, "at least 8 characters required");
  {
    std::shared_lock lock(mu_);
    if (state_.accounts.find_by_name(username) != nullptr) fail(Errc::UsernameTaken, std::string(username));
  }
  std::string digest = hasher_->hash(password);
  std::unique_lock lock(mu_);
  return state_.accounts.add(username, std::move(digest), clock_.now());
}

std::string Core::login(std::string_view username, std::string_view password) {
  std::optional<UserAccount> acct = account_by_name(username);
  if (!acct || !hasher_->verify(acct->password_hash, password)) fail(Errc::AuthFailed);
  return sessions_.issue(acct->id);
}

std::optional<UserId> Core::authenticate(std::string_view token) {
  auto user = sessions_.resolve(token);
  if (!user) return std::nullopt;
  std::shared_lock lock(mu_);
  if (!state_.accounts.exists(*user)) return std::nullopt;
  return user;
}

void Core::logout(std::string_view token) { sessions_.revoke(token); }

std::optional<UserAccount> Core::account(UserId id) const {
  std::shared_lock lock(mu_);
  const auto* a = state_.accounts.find(id);
  return a ? std::optional<UserAccount>(*a) : std::nullopt;
}

std::optional<UserAccount> Core::account_by_name(std::string_view username) const {
  std::shared_lock lock(mu_);
  const auto* a = state_.accounts.find_by_name(username);
  return a ? std::optional<UserAccount>(*a) : std::nullopt;
}

UserId Core::system_user() const { return state_.accounts.system_user(); }

// ---------------------------------------------------------------------------
// authorization

RoleSet Core::roles_locked(UserId user, const DirectoryNode& node) const {
  RoleFacts facts;
  facts.authenticated = state_.accounts.exists(user);
  facts.owner = node.dir.owner == user;
  facts.member = node.group.is_member(user);
  facts.granted_user = node.grants.users.contains(user);
  for (DirectoryId g : node.grants.groups) {
    const auto* group = state_.tree.find(g);
    if (group != nullptr && group->group.is_member(user) && !group->group.is_blacklisted(user)) {
      facts.granted_group_member = true;
      break;
    }
  }
  facts.blacklisted = config_.blacklist_denies_all && node.group.is_blacklisted(user);
  return derive_roles(facts);
}

bool Core::right_locked(UserId user, const DirectoryNode& node, Right right) const {
  return node.dir.matrix.permits(roles_locked(user, node), right);
}

RoleSet Core::roles_of(UserId user, DirectoryId dir) const {
  std::shared_lock lock(mu_);
  return roles_locked(user, state_.tree.at(dir));
}

bool Core::check_right(UserId user, DirectoryId dir, Right right) const {
  std::shared_lock lock(mu_);
  return right_locked(user, state_.tree.at(dir), right);
}

DirectoryNode& Core::owned_node(DirectoryId dir, UserId actor) {
  auto& node = state_.tree.at(dir);
  if (node.dir.owner != actor) fail(Errc::NotOwner);
  return node;
}

const DirectoryNode& Core::visible_node(DirectoryId dir, UserId viewer) const {
  const auto& node = state_.tree.at(dir);
  if (!state_.tree.visible_through_trash(dir, viewer)) fail(Errc::NotFound, "directory " + dir.str());
  return node;
}

void Core::set_matrix(DirectoryId dir, UserId actor, const AuthMatrix& matrix) {
  std::unique_lock lock(mu_);
  owned_node(dir, actor).dir.matrix = matrix;
}

Directory Core::update_matrix(DirectoryId dir, UserId actor, const std::function<void(AuthMatrix&)>& edit) {
  std::unique_lock lock(mu_);
  auto& node = owned_node(dir, actor);
  AuthMatrix m = node.dir.matrix;
  edit(m);
  node.dir.matrix = m;
  return node.dir;
}

void Core::grant_user(DirectoryId dir, UserId actor, UserId user) {
  std::unique_lock lock(mu_);
  auto& node = owned_node(dir, actor);
  if (!state_.accounts.exists(user)) fail(Errc::UserNotFound);
  if (!node.grants.users.insert(user).second) fail(Errc::AlreadyGranted);
}

void Core::revoke_user(DirectoryId dir, UserId actor, UserId user) {
  std::unique_lock lock(mu_);
  auto& node = owned_node(dir, actor);
  if (node.grants.users.erase(user) == 0) fail(Errc::NotGranted);
}

void Core::grant_group(DirectoryId dir, UserId actor, DirectoryId group_dir) {
  std::unique_lock lock(mu_);
  auto& node = owned_node(dir, actor);
  if (state_.tree.find(group_dir) == nullptr) fail(Errc::NotFound, "group directory " + group_dir.str());
  if (!node.grants.groups.insert(group_dir).second) fail(Errc::AlreadyGranted);
}

void Core::revoke_group(DirectoryId dir, UserId actor, DirectoryId group_dir) {
  std::unique_lock lock(mu_);
  auto& node = owned_node(dir, actor);
  if (node.grants.groups.erase(group_dir) == 0) fail(Errc::NotGranted);
}

// ---------------------------------------------------------------------------
// groups

void Core::set_visibility(DirectoryId dir, UserId actor, Visibility v) {
  std::unique_lock lock(mu_);
  owned_node(dir, actor).dir.visibility = v;
}

JoinOutcome Core::join(DirectoryId dir, UserId user) {
  std::unique_lock lock(mu_);
  if (!state_.accounts.exists(user)) fail(Errc::Unauthenticated);
  visible_node(dir, user);
  auto& node = state_.tree.at(dir);
  if (!state_.tree.trashed_on_chain(dir).empty()) fail(Errc::TrashedDirectory);
  if (node.dir.owner == user) fail(Errc::InvalidArgument, "the owner cannot join their own group");
  return node.group.join(user, node.dir.visibility, clock_.now());
}

void Core::review_application(DirectoryId dir, UserId actor, UserId applicant, Decision decision) {
  std::unique_lock lock(mu_);
  owned_node(dir, actor).group.review(applicant, decision);
}

void Core::remove_member(DirectoryId dir, UserId actor, UserId user) {
  std::unique_lock lock(mu_);
  owned_node(dir, actor).group.remove_member(user);
}

void Core::blacklist_user(DirectoryId dir, UserId actor, UserId user) {
  std::unique_lock lock(mu_);
  auto& node = owned_node(dir, actor);
  if (!state_.accounts.exists(user)) fail(Errc::UserNotFound);
  if (user == node.dir.owner) fail(Errc::InvalidArgument, "the owner cannot be blacklisted");
  node.group.blacklist(user);
}

void Core::unblacklist_user(DirectoryId dir, UserId actor, UserId user) {
  std::unique_lock lock(mu_);
  owned_node(dir, actor).group.unblacklist(user);
}

std::vector<PendingApplication> Core::pending_applications(DirectoryId dir, UserId actor) const {
  std::shared_lock lock(mu_);
  const auto& node = state_.tree.at(dir);
  if (node.dir.owner != actor) fail(Errc::NotOwner);
  return node.group.pending();
}

GroupState Core::group_state(DirectoryId dir) const {
  std::shared_lock lock(mu_);
  return state_.tree.at(dir).group;
}

// ---------------------------------------------------------------------------
// mount bindings

MountBinding Core::bind_mount(DirectoryId dir, UserId actor, std::string_view agent_id, std::string_view share_path) {
  validate_agent_id(agent_id);
  try {
    validate_name(share_path);
  } catch (const Error& e) {
    fail(Errc::InvalidArgument, "share label: " + e.detail());
  }
  std::unique_lock lock(mu_);
  if (!state_.accounts.exists(actor)) fail(Errc::Unauthenticated);
  const auto& node = visible_node(dir, actor);
  if (!right_locked(actor, node, Right::Publish)) fail(Errc::PermissionDenied, "Publish");
  for (const auto& [id, b] : state_.bindings) {
    if (b.directory == dir && b.account == actor && b.agent_id == agent_id && b.share_path == share_path) {
      fail(Errc::DuplicateBinding);
    }
  }
  MountBinding b{BindingId{state_.next_binding++}, dir, actor, std::string(agent_id), std::string(share_path),
                 clock_.now()};
  state_.bindings.emplace(b.id, b);
  return b;
}

void Core::unbind_mount(BindingId binding, UserId actor) {
  std::unique_lock lock(mu_);
  auto it = state_.bindings.find(binding);
  if (it == state_.bindings.end()) fail(Errc::NotFound, "binding " + binding.str());
  const auto* node = state_.tree.find(it->second.directory);
  bool dir_owner = node != nullptr && node->dir.owner == actor;
  if (it->second.account != actor && !dir_owner) fail(Errc::NotOwner);
  state_.bindings.erase(it);
}

std::vector<MountBinding> Core::readable_mounts(DirectoryId dir, UserId viewer) const {
  std::shared_lock lock(mu_);
  const auto& node = visible_node(dir, viewer);
  if (!right_locked(viewer, node, Right::Read)) fail(Errc::PermissionDenied, "Read");
  std::vector<MountBinding> out;
  for (const auto& [id, b] : state_.bindings) {
    if (b.directory == dir) out.push_back(b);
  }
  return out;
}

MountBinding Core::readable_mount(BindingId binding, UserId viewer) const {
  std::shared_lock lock(mu_);
  auto it = state_.bindings.find(binding);
  if (it == state_.bindings.end()) fail(Errc::NotFound, "binding " + binding.str());
  const auto& node = visible_node(it->second.directory, viewer);
  if (!right_locked(viewer, node, Right::Read)) fail(Errc::PermissionDenied, "Read");
  return it->second;
}

std::string Core::mount_label(const MountBinding& b) const {
  std::shared_lock lock(mu_);
  const auto* acct = state_.accounts.find(b.account);
  return (acct ? acct->username : b.account.str()) + ":" + b.share_path;
}

// ---------------------------------------------------------------------------
// persistence

State Core::snapshot() const {
  std::shared_lock lock(mu_);
  return state_;
}

void Core::replace_state(State state) {
  std::unique_lock lock(mu_);
  state_ = std::move(state);
  rebuild_index_locked();
}

}  // namespace dtree
