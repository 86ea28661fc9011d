#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dtree/accounts.hpp"
#include "dtree/authz.hpp"
#include "dtree/clock.hpp"
#include "dtree/groups.hpp"
#include "dtree/mounts.hpp"
#include "dtree/search.hpp"
#include "dtree/tree_store.hpp"

namespace dtree {

struct CoreConfig {
  std::size_t max_attachment_bytes = 32U << 20U;
  std::chrono::microseconds session_ttl = std::chrono::hours{24};
  /// When false, a blacklisted user keeps AnyUser (and grant roles) on the
  /// directory and only loses group membership.
  bool blacklist_denies_all = true;
};

/// Everything that survives a restart.
struct State {
  AccountStore accounts;
  TreeStore tree;
  std::map<BindingId, MountBinding> bindings;
  std::uint64_t next_binding = 1;

  explicit State(Timestamp now);
  State(AccountStore a, TreeStore t, std::map<BindingId, MountBinding> b, std::uint64_t next_b);
};

struct ArticleDraft {
  std::string title;
  std::string abstract;
  std::string body;
  std::vector<std::pair<std::string, std::string>> attachments;  // filename, bytes
};

struct ArticleSummary {
  ArticleId id;
  DirectoryId directory;
  UserId author;
  std::string title;
  std::string abstract;
  std::string url;
  Timestamp published_at;
  std::vector<std::pair<std::string, std::size_t>> attachments;  // filename, size

  bool operator==(const ArticleSummary&) const = default;
};

struct OwnerPanel {
  GroupState group;
  GrantSet grants;
};

/// The per-directory view: the directory, its visible children, and the
/// viewer's standing. The owner additionally gets group and grant details.
struct DomainToolView {
  Directory dir;
  NavigatorBar bar;
  std::vector<Directory> children;
  RoleSet viewer_roles;
  bool viewer_is_member = false;
  bool viewer_is_pending = false;
  std::optional<OwnerPanel> owner_panel;
};

/// The directory service. Every operation re-derives permissions from the
/// current state. Writers are serialised on one lock; readers share it.
class Core {
 public:
  Core(const Clock& clock, std::shared_ptr<const PasswordHasher> hasher, CoreConfig config = {},
       RandomSource random = system_random());

  Core(const Core&) = delete;
  Core& operator=(const Core&) = delete;

  // accounts and sessions
  UserAccount register_user(std::string_view username, std::string_view password);
  std::string login(std::string_view username, std::string_view password);
  std::optional<UserId> authenticate(std::string_view token);
  void logout(std::string_view token);
  [[nodiscard]] std::optional<UserAccount> account(UserId id) const;
  [[nodiscard]] std::optional<UserAccount> account_by_name(std::string_view username) const;
  [[nodiscard]] UserId system_user() const;

  // tree
  Directory create_directory(DirectoryId parent, std::string_view name, UserId creator);
  void delete_directory(DirectoryId dir, UserId actor);
  void trash_directory(DirectoryId dir, UserId actor);
  void restore_directory(DirectoryId dir, UserId actor);
  /// Root-to-dir chain, without viewer checks.
  [[nodiscard]] NavigatorBar navigator_path(DirectoryId dir) const;
  /// As navigator_path, but NotFound when trash hides dir from the viewer.
  [[nodiscard]] NavigatorBar navigator_path_for(DirectoryId dir, UserId viewer) const;
  [[nodiscard]] DomainToolView domain_tool_view(DirectoryId dir, UserId viewer) const;
  [[nodiscard]] std::vector<Directory> list_children(DirectoryId dir, UserId viewer) const;
  [[nodiscard]] Directory directory(DirectoryId dir) const;
  ArticleSummary publish_article(DirectoryId dir, UserId author, ArticleDraft draft);
  /// Newest first; ties by id descending.
  [[nodiscard]] std::vector<ArticleSummary> list_articles(DirectoryId dir, UserId viewer) const;
  [[nodiscard]] Article get_article(ArticleId id, UserId viewer) const;
  [[nodiscard]] std::shared_ptr<const std::string> get_attachment(ArticleId id, std::string_view filename,
                                                                  UserId viewer) const;

  // authorization
  void set_matrix(DirectoryId dir, UserId actor, const AuthMatrix& matrix);
  /// Read-modify-write of the matrix under one lock. `edit` may throw to abort.
  Directory update_matrix(DirectoryId dir, UserId actor, const std::function<void(AuthMatrix&)>& edit);
  void grant_user(DirectoryId dir, UserId actor, UserId user);
  void revoke_user(DirectoryId dir, UserId actor, UserId user);
  void grant_group(DirectoryId dir, UserId actor, DirectoryId group_dir);
  void revoke_group(DirectoryId dir, UserId actor, DirectoryId group_dir);
  [[nodiscard]] RoleSet roles_of(UserId user, DirectoryId dir) const;
  [[nodiscard]] bool check_right(UserId user, DirectoryId dir, Right right) const;

  // groups
  void set_visibility(DirectoryId dir, UserId actor, Visibility v);
  JoinOutcome join(DirectoryId dir, UserId user);
  void review_application(DirectoryId dir, UserId actor, UserId applicant, Decision decision);
  void remove_member(DirectoryId dir, UserId actor, UserId user);
  void blacklist_user(DirectoryId dir, UserId actor, UserId user);
  void unblacklist_user(DirectoryId dir, UserId actor, UserId user);
  [[nodiscard]] std::vector<PendingApplication> pending_applications(DirectoryId dir, UserId actor) const;
  [[nodiscard]] GroupState group_state(DirectoryId dir) const;

  // search
  [[nodiscard]] std::vector<SearchHit> execute_search(const Query& q) const;
  void reindex_full();
  void reindex_directory(DirectoryId dir);
  void reindex_article(ArticleId article);

  // mount bindings (the relay itself lives in MountService)
  MountBinding bind_mount(DirectoryId dir, UserId actor, std::string_view agent_id, std::string_view share_path);
  void unbind_mount(BindingId binding, UserId actor);
  /// Bindings on dir, after checking Read for the viewer.
  [[nodiscard]] std::vector<MountBinding> readable_mounts(DirectoryId dir, UserId viewer) const;
  [[nodiscard]] MountBinding readable_mount(BindingId binding, UserId viewer) const;
  [[nodiscard]] std::string mount_label(const MountBinding& b) const;

  // persistence
  /// Consistent copy of the persistent state; readers are not paused.
  [[nodiscard]] State snapshot() const;
  /// Replaces all state (boot-time load) and rebuilds the search index.
  void replace_state(State state);

  /// Runs fn with a consistent read-only view. For oracles and diagnostics.
  template <typename Fn>
  decltype(auto) with_state(Fn&& fn) const {
    std::shared_lock lock(mu_);
    return std::forward<Fn>(fn)(state_);
  }

  [[nodiscard]] const Clock& clock() const { return clock_; }
  [[nodiscard]] const CoreConfig& config() const { return config_; }

 private:
  [[nodiscard]] RoleSet roles_locked(UserId user, const DirectoryNode& node) const;
  [[nodiscard]] bool right_locked(UserId user, const DirectoryNode& node, Right right) const;
  /// The node if it exists and trash does not hide it from viewer.
  const DirectoryNode& visible_node(DirectoryId dir, UserId viewer) const;
  DirectoryNode& owned_node(DirectoryId dir, UserId actor);
  [[nodiscard]] ArticleSummary summarize(const Article& a) const;
  void rebuild_index_locked();

  const Clock& clock_;
  std::shared_ptr<const PasswordHasher> hasher_;
  CoreConfig config_;
  mutable std::shared_mutex mu_;
  State state_;
  SearchIndex index_;
  SessionStore sessions_;
};

}  // namespace dtree
