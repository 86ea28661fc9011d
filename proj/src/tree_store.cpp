#include "dtree/tree_store.hpp"

#include <algorithm>
#include <unordered_set>

#include "dtree/error.hpp"

namespace dtree {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace

const Attachment* Article::attachment(std::string_view filename) const {
  auto it = std::find_if(attachments.begin(), attachments.end(),
                         [&](const Attachment& a) { return a.filename == filename; });
  return it == attachments.end() ? nullptr : &*it;
}

std::string render_bar(const NavigatorBar& bar) {
  std::string out;
  for (const auto& [id, name] : bar) {
    if (!out.empty()) out += " / ";
    out += name;
  }
  return out;
}

std::string fold_case(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

void validate_name(std::string_view name) {
  if (name.empty()) fail(Errc::InvalidName, "empty name");
  if (name.find('/') != std::string_view::npos) fail(Errc::InvalidName, "'/' is reserved");
  if (is_space(name.front()) || is_space(name.back())) fail(Errc::InvalidName, "leading or trailing whitespace");
  if (utf8_length(name) > kMaxNameLength) fail(Errc::InvalidName, "longer than 255 characters");
  if (std::any_of(name.begin(), name.end(), [](char c) { return static_cast<unsigned char>(c) < 0x20; })) {
    fail(Errc::InvalidName, "control character");
  }
}

TreeStore::TreeStore(UserId root_owner, Timestamp created_at) {
  DirectoryNode root;
  root.dir.id = DirectoryId{next_dir_++};
  root.dir.name = std::string(kRootName);
  root.dir.owner = root_owner;
  root.dir.matrix = root_matrix();
  root.dir.created_at = created_at;
  nodes_.emplace(root.dir.id, std::move(root));
}

const DirectoryNode* TreeStore::find(DirectoryId id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

DirectoryNode* TreeStore::find(DirectoryId id) {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const DirectoryNode& TreeStore::at(DirectoryId id) const {
  const auto* n = find(id);
  if (n == nullptr) fail(Errc::NotFound, "directory " + id.str());
  return *n;
}

DirectoryNode& TreeStore::at(DirectoryId id) {
  auto* n = find(id);
  if (n == nullptr) fail(Errc::NotFound, "directory " + id.str());
  return *n;
}

DirectoryNode& TreeStore::insert_directory(DirectoryId parent_id, std::string name, UserId owner, Timestamp now,
                                           AuthMatrix matrix) {
  auto* parent = find(parent_id);
  if (parent == nullptr) fail(Errc::ParentNotFound, "directory " + parent_id.str());
  if (parent->dir.state == DirState::Trashed) fail(Errc::ParentTrashed);
  validate_name(name);
  std::string key = fold_case(name);
  if (parent->children.contains(key)) fail(Errc::DuplicateName, name);

  DirectoryNode node;
  node.dir.id = DirectoryId{next_dir_++};
  node.dir.name = std::move(name);
  node.dir.parent = parent_id;
  node.dir.owner = owner;
  node.dir.matrix = matrix;
  node.dir.created_at = now;
  const DirectoryId id = node.dir.id;
  parent->children.emplace(std::move(key), id);
  return nodes_.emplace(id, std::move(node)).first->second;
}

void TreeStore::erase_directory(DirectoryId id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) fail(Errc::NotFound, "directory " + id.str());
  const DirectoryNode& node = it->second;
  if (node.dir.is_root()) fail(Errc::RootUndeletable);
  if (!node.children.empty()) fail(Errc::NotEmpty, "children");
  if (!node.articles.empty()) fail(Errc::NotEmpty, "articles");
  at(node.dir.parent).children.erase(fold_case(node.dir.name));
  nodes_.erase(it);
}

Article& TreeStore::insert_article(Article article) {
  auto& node = at(article.directory);
  article.id = ArticleId{next_article_++};
  node.articles.push_back(article.id);
  return articles_.emplace(article.id, std::move(article)).first->second;
}

const Article* TreeStore::find_article(ArticleId id) const {
  auto it = articles_.find(id);
  return it == articles_.end() ? nullptr : &it->second;
}

NavigatorBar TreeStore::navigator_path(DirectoryId id) const {
  NavigatorBar bar;
  const DirectoryNode* n = &at(id);
  while (true) {
    bar.emplace_back(n->dir.id, n->dir.name);
    if (n->dir.is_root()) break;
    n = &at(n->dir.parent);
  }
  std::reverse(bar.begin(), bar.end());
  return bar;
}

std::vector<DirectoryId> TreeStore::trashed_on_chain(DirectoryId id) const {
  std::vector<DirectoryId> out;
  const DirectoryNode* n = &at(id);
  while (true) {
    if (n->dir.state == DirState::Trashed) out.push_back(n->dir.id);
    if (n->dir.is_root()) break;
    n = &at(n->dir.parent);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

bool TreeStore::visible_through_trash(DirectoryId id, UserId viewer) const {
  const DirectoryNode* n = &at(id);
  while (true) {
    if (n->dir.state == DirState::Trashed && n->dir.owner != viewer) return false;
    if (n->dir.is_root()) return true;
    n = &at(n->dir.parent);
  }
}

TreeStore TreeStore::rebuild(std::vector<DirectoryNode> nodes, std::vector<Article> articles,
                             std::uint64_t next_dir, std::uint64_t next_article) {
  TreeStore t;
  t.next_dir_ = next_dir;
  t.next_article_ = next_article;
  std::size_t roots = 0;
  for (auto& n : nodes) {
    n.children.clear();
    n.articles.clear();
    if (!n.dir.id.valid() || n.dir.id.value() >= next_dir) fail(Errc::CorruptSnapshot, "directory id out of range");
    if (n.dir.is_root()) {
      ++roots;
      if (n.dir.name != kRootName || n.dir.id != kRootId) fail(Errc::CorruptSnapshot, "bad root");
    } else {
      try {
        validate_name(n.dir.name);
      } catch (const Error&) {
        fail(Errc::CorruptSnapshot, "bad directory name");
      }
    }
    if (!n.group.consistent()) fail(Errc::CorruptSnapshot, "group state inconsistent");
    const DirectoryId id = n.dir.id;
    if (!t.nodes_.emplace(id, std::move(n)).second) fail(Errc::CorruptSnapshot, "duplicate directory id");
  }
  if (roots != 1) fail(Errc::CorruptSnapshot, "expected exactly one root");

  for (auto& [id, n] : t.nodes_) {
    if (n.dir.is_root()) continue;
    auto* parent = t.find(n.dir.parent);
    if (parent == nullptr) fail(Errc::CorruptSnapshot, "dangling parent");
    if (!parent->children.emplace(fold_case(n.dir.name), id).second) {
      fail(Errc::CorruptSnapshot, "duplicate sibling name");
    }
  }
  // Every node must reach the root within |nodes| steps.
  for (const auto& [id, n] : t.nodes_) {
    const DirectoryNode* cur = &n;
    std::size_t steps = 0;
    while (!cur->dir.is_root()) {
      if (++steps > t.nodes_.size()) fail(Errc::CorruptSnapshot, "cycle in parent links");
      cur = &t.nodes_.at(cur->dir.parent);
    }
  }
  for (auto& a : articles) {
    if (!a.id.valid() || a.id.value() >= next_article) fail(Errc::CorruptSnapshot, "article id out of range");
    auto* dir = t.find(a.directory);
    if (dir == nullptr) fail(Errc::CorruptSnapshot, "article in unknown directory");
    dir->articles.push_back(a.id);
    const ArticleId id = a.id;
    if (!t.articles_.emplace(id, std::move(a)).second) fail(Errc::CorruptSnapshot, "duplicate article id");
  }
  return t;
}

}  // namespace dtree
