#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dtree/authz.hpp"
#include "dtree/groups.hpp"
#include "dtree/ids.hpp"

namespace dtree {

inline constexpr std::string_view kRootName = "ALL";
inline constexpr DirectoryId kRootId{1};
inline constexpr std::size_t kMaxNameLength = 255;

enum class DirState { Active, Trashed };

struct Directory {
  DirectoryId id;
  std::string name;
  DirectoryId parent;  // invalid only for root
  UserId owner;
  DirState state = DirState::Active;
  Visibility visibility = Visibility::Public;
  AuthMatrix matrix;
  Timestamp created_at;

  [[nodiscard]] bool is_root() const { return !parent.valid(); }
  bool operator==(const Directory&) const = default;
};

struct Attachment {
  std::string filename;
  std::string sha256;  // hex digest of content
  std::shared_ptr<const std::string> content;

  [[nodiscard]] std::size_t size() const { return content ? content->size() : 0; }
};

struct Article {
  ArticleId id;
  DirectoryId directory;
  UserId author;
  std::string title;
  std::string abstract;
  std::string body;
  std::vector<Attachment> attachments;
  Timestamp published_at;

  [[nodiscard]] const Attachment* attachment(std::string_view filename) const;
};

/// Root-to-target chain of (id, name).
using NavigatorBar = std::vector<std::pair<DirectoryId, std::string>>;

/// " / "-joined names; this is the text directory search matches against.
std::string render_bar(const NavigatorBar& bar);

/// Everything stored per directory: the node itself, its group and grants,
/// and the structural indexes over its children and articles.
struct DirectoryNode {
  Directory dir;
  GroupState group;
  GrantSet grants;
  std::map<std::string, DirectoryId> children;  // case-folded name -> id
  std::vector<ArticleId> articles;
};

/// ASCII case folding. Non-ASCII bytes compare exactly.
std::string fold_case(std::string_view s);

/// Throws InvalidName unless `name` is a legal directory name.
void validate_name(std::string_view name);

/// The single global tree and all articles. Enforces structural invariants
/// (one root named ALL, unique sibling names, acyclic parent links) but knows
/// nothing about who may do what.
class TreeStore {
 public:
  TreeStore(UserId root_owner, Timestamp created_at);

  [[nodiscard]] const DirectoryNode* find(DirectoryId id) const;
  [[nodiscard]] DirectoryNode* find(DirectoryId id);
  [[nodiscard]] const DirectoryNode& at(DirectoryId id) const;
  [[nodiscard]] DirectoryNode& at(DirectoryId id);

  DirectoryNode& insert_directory(DirectoryId parent, std::string name, UserId owner, Timestamp now,
                                  AuthMatrix matrix);
  /// Removes a leaf with no articles and retires its id.
  void erase_directory(DirectoryId id);

  Article& insert_article(Article article);
  [[nodiscard]] const Article* find_article(ArticleId id) const;

  [[nodiscard]] NavigatorBar navigator_path(DirectoryId id) const;
  /// Trashed nodes on the root-to-id chain, nearest last.
  [[nodiscard]] std::vector<DirectoryId> trashed_on_chain(DirectoryId id) const;
  /// True iff every trashed node on the chain is owned by `viewer`.
  [[nodiscard]] bool visible_through_trash(DirectoryId id, UserId viewer) const;

  [[nodiscard]] const std::unordered_map<DirectoryId, DirectoryNode>& nodes() const { return nodes_; }
  [[nodiscard]] const std::map<ArticleId, Article>& articles() const { return articles_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  [[nodiscard]] std::uint64_t next_directory_id() const { return next_dir_; }
  [[nodiscard]] std::uint64_t next_article_id() const { return next_article_; }

  /// Snapshot loading: rebuild from raw records. Validates every invariant
  /// and throws CorruptSnapshot on violation.
  static TreeStore rebuild(std::vector<DirectoryNode> nodes, std::vector<Article> articles,
                           std::uint64_t next_dir, std::uint64_t next_article);

 private:
  TreeStore() = default;

  std::unordered_map<DirectoryId, DirectoryNode> nodes_;
  std::map<ArticleId, Article> articles_;
  std::uint64_t next_dir_ = 1;
  std::uint64_t next_article_ = 1;
};

}  // namespace dtree
