#include <algorithm>
#include <mutex>
#include <set>

#include "dtree/core.hpp"
#include "dtree/digest.hpp"
#include "dtree/error.hpp"

namespace dtree {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
}

}  // namespace

Directory Core::create_directory(DirectoryId parent, std::string_view name, UserId creator) {
  std::unique_lock lock(mu_);
  const auto* p = state_.tree.find(parent);
  if (p == nullptr || !state_.tree.visible_through_trash(parent, creator)) {
    fail(Errc::ParentNotFound, "directory " + parent.str());
  }
  if (!state_.tree.trashed_on_chain(parent).empty()) fail(Errc::ParentTrashed);
  if (!right_locked(creator, *p, Right::CreateSubDir)) fail(Errc::PermissionDenied, "CreateSubDir");
  auto& node = state_.tree.insert_directory(parent, std::string(name), creator, clock_.now(), default_matrix());
  index_.add_directory(node.dir.id, render_bar(state_.tree.navigator_path(node.dir.id)));
  return node.dir;
}

void Core::delete_directory(DirectoryId dir, UserId actor) {
  std::unique_lock lock(mu_);
  auto& node = state_.tree.at(dir);
  if (node.dir.is_root()) fail(Errc::RootUndeletable);
  if (node.dir.owner != actor) fail(Errc::NotOwner);
  if (!node.group.members().empty()) fail(Errc::NotEmpty, "members");
  if (!node.articles.empty()) fail(Errc::NotEmpty, "articles");
  if (!node.children.empty()) fail(Errc::NotEmpty, "children");
  state_.tree.erase_directory(dir);
  index_.remove_directory(dir);
  for (const auto& [id, n] : state_.tree.nodes()) {
    // granted_groups must only name existing directories
    state_.tree.at(id).grants.groups.erase(dir);
  }
  std::erase_if(state_.bindings, [dir](const auto& kv) { return kv.second.directory == dir; });
}

void Core::trash_directory(DirectoryId dir, UserId actor) {
  std::unique_lock lock(mu_);
  auto& node = state_.tree.at(dir);
  if (node.dir.is_root()) fail(Errc::RootUntrashable);
  if (node.dir.owner != actor) fail(Errc::NotOwner);
  if (node.dir.state == DirState::Trashed) fail(Errc::AlreadyTrashed);
  node.dir.state = DirState::Trashed;
}

void Core::restore_directory(DirectoryId dir, UserId actor) {
  std::unique_lock lock(mu_);
  auto& node = state_.tree.at(dir);
  if (node.dir.owner != actor) fail(Errc::NotOwner);
  if (node.dir.state != DirState::Trashed) fail(Errc::NotTrashed);
  if (state_.tree.at(node.dir.parent).dir.state == DirState::Trashed) fail(Errc::ParentTrashed);
  node.dir.state = DirState::Active;
}

NavigatorBar Core::navigator_path(DirectoryId dir) const {
  std::shared_lock lock(mu_);
  return state_.tree.navigator_path(dir);
}

NavigatorBar Core::navigator_path_for(DirectoryId dir, UserId viewer) const {
  std::shared_lock lock(mu_);
  visible_node(dir, viewer);
  return state_.tree.navigator_path(dir);
}

Directory Core::directory(DirectoryId dir) const {
  std::shared_lock lock(mu_);
  return state_.tree.at(dir).dir;
}

DomainToolView Core::domain_tool_view(DirectoryId dir, UserId viewer) const {
  std::shared_lock lock(mu_);
  const auto& node = visible_node(dir, viewer);
  if (!right_locked(viewer, node, Right::ShowDir)) fail(Errc::PermissionDenied, "ShowDir");
  DomainToolView view;
  view.dir = node.dir;
  view.bar = state_.tree.navigator_path(dir);
  for (const auto& [key, child_id] : node.children) {
    const auto& child = state_.tree.at(child_id);
    if (child.dir.state == DirState::Active && right_locked(viewer, child, Right::ShowDir)) {
      view.children.push_back(child.dir);
    }
  }
  view.viewer_roles = roles_locked(viewer, node);
  view.viewer_is_member = node.group.is_member(viewer);
  view.viewer_is_pending = node.group.is_pending(viewer);
  if (node.dir.owner == viewer) view.owner_panel = OwnerPanel{node.group, node.grants};
  return view;
}

std::vector<Directory> Core::list_children(DirectoryId dir, UserId viewer) const {
  return domain_tool_view(dir, viewer).children;
}

ArticleSummary Core::summarize(const Article& a) const {
  ArticleSummary s{a.id, a.directory, a.author, a.title, a.abstract, article_url(a.id), a.published_at, {}};
  for (const auto& att : a.attachments) s.attachments.emplace_back(att.filename, att.size());
  return s;
}

ArticleSummary Core::publish_article(DirectoryId dir, UserId author, ArticleDraft draft) {
  if (draft.title.empty() || blank(draft.title)) fail(Errc::InvalidTitle);
  Article article;
  article.directory = dir;
  article.author = author;
  article.title = std::move(draft.title);
  article.abstract = std::move(draft.abstract);
  article.body = std::move(draft.body);
  std::set<std::string> names;
  for (auto& [filename, bytes] : draft.attachments) {
    if (filename.empty() || filename.find('/') != std::string::npos || filename == "." || filename == "..") {
      fail(Errc::InvalidArgument, "bad attachment filename");
    }
    if (!names.insert(filename).second) fail(Errc::InvalidArgument, "duplicate attachment " + filename);
    if (bytes.size() > config_.max_attachment_bytes) fail(Errc::AttachmentTooLarge, filename);
    std::string digest = sha256_hex(bytes);
    article.attachments.push_back(
        Attachment{std::move(filename), std::move(digest), std::make_shared<const std::string>(std::move(bytes))});
  }

  std::unique_lock lock(mu_);
  const auto& node = visible_node(dir, author);
  if (!state_.tree.trashed_on_chain(dir).empty()) fail(Errc::TrashedDirectory);
  if (!right_locked(author, node, Right::Publish)) fail(Errc::PermissionDenied, "Publish");
  article.published_at = clock_.now();
  const auto& stored = state_.tree.insert_article(std::move(article));
  index_.add_article(stored.id, stored.title, stored.abstract);
  return summarize(stored);
}

std::vector<ArticleSummary> Core::list_articles(DirectoryId dir, UserId viewer) const {
  std::shared_lock lock(mu_);
  const auto& node = visible_node(dir, viewer);
  if (!right_locked(viewer, node, Right::Read)) fail(Errc::PermissionDenied, "Read");
  std::vector<const Article*> found;
  for (ArticleId id : node.articles) found.push_back(state_.tree.find_article(id));
  std::sort(found.begin(), found.end(), [](const Article* a, const Article* b) {
    if (a->published_at != b->published_at) return a->published_at > b->published_at;
    return a->id > b->id;
  });
  std::vector<ArticleSummary> out;
  out.reserve(found.size());
  for (const auto* a : found) out.push_back(summarize(*a));
  return out;
}

Article Core::get_article(ArticleId id, UserId viewer) const {
  std::shared_lock lock(mu_);
  const auto* a = state_.tree.find_article(id);
  if (a == nullptr) fail(Errc::NotFound, "article " + id.str());
  const auto& node = visible_node(a->directory, viewer);
  if (!right_locked(viewer, node, Right::Read)) fail(Errc::PermissionDenied, "Read");
  return *a;
}

std::shared_ptr<const std::string> Core::get_attachment(ArticleId id, std::string_view filename,
                                                        UserId viewer) const {
  Article a = get_article(id, viewer);
  const auto* att = a.attachment(filename);
  if (att == nullptr) fail(Errc::NotFound, "attachment " + std::string(filename));
  return att->content;
}

// ---------------------------------------------------------------------------
// search

std::vector<SearchHit> Core::execute_search(const Query& q) const {
  if (q.terms.empty() && q.mode != SearchMode::MyAllDir) fail(Errc::EmptyQuery);
  for (const auto& t : q.terms) {
    if (t.empty()) fail(Errc::EmptyTerm);
  }
  std::shared_lock lock(mu_);
  if (!state_.accounts.exists(q.requester)) fail(Errc::Unauthenticated);

  auto live = [&](DirectoryId d) { return state_.tree.trashed_on_chain(d).empty(); };
  std::vector<SearchHit> hits;

  if (!is_article_mode(q.mode)) {
    std::vector<DirectoryId> matched;
    if (q.terms.empty()) {
      for (const auto& [id, n] : state_.tree.nodes()) matched.push_back(id);
    } else {
      matched = index_.match_directories(q.terms);
    }
    const bool mine_only = q.mode != SearchMode::Dir;
    for (DirectoryId d : matched) {
      const auto& node = state_.tree.at(d);
      if (mine_only && node.dir.owner != q.requester) continue;
      if (!live(d) || !right_locked(q.requester, node, Right::ShowDir)) continue;
      hits.push_back(SearchHit{d, state_.tree.navigator_path(d), std::nullopt, std::nullopt, std::nullopt});
    }
    std::vector<std::pair<std::string, std::size_t>> keys;
    keys.reserve(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) keys.emplace_back(render_bar(hits[i].bar), i);
    std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return hits[a.second].directory < hits[b.second].directory;
    });
    std::vector<SearchHit> ordered;
    ordered.reserve(hits.size());
    for (const auto& k : keys) ordered.push_back(std::move(hits[k.second]));
    return ordered;
  }

  std::vector<const Article*> found;
  for (ArticleId id : index_.match_articles(q.terms)) {
    const auto* a = state_.tree.find_article(id);
    if (a == nullptr) continue;
    if (q.mode == SearchMode::MyKey && a->author != q.requester) continue;
    const auto& node = state_.tree.at(a->directory);
    if (!live(a->directory)) continue;
    if (!right_locked(q.requester, node, Right::ShowDir) || !right_locked(q.requester, node, Right::Read)) continue;
    found.push_back(a);
  }
  std::sort(found.begin(), found.end(), [](const Article* a, const Article* b) {
    if (a->published_at != b->published_at) return a->published_at > b->published_at;
    return a->id > b->id;
  });
  for (const auto* a : found) {
    hits.push_back(SearchHit{a->directory, state_.tree.navigator_path(a->directory), a->id, article_url(a->id),
                             a->title});
  }
  return hits;
}

void Core::rebuild_index_locked() {
  index_.clear();
  for (const auto& [id, n] : state_.tree.nodes()) {
    index_.add_directory(id, render_bar(state_.tree.navigator_path(id)));
  }
  for (const auto& [id, a] : state_.tree.articles()) index_.add_article(id, a.title, a.abstract);
}

void Core::reindex_full() {
  std::unique_lock lock(mu_);
  rebuild_index_locked();
}

void Core::reindex_directory(DirectoryId dir) {
  std::unique_lock lock(mu_);
  if (state_.tree.find(dir) == nullptr) {
    index_.remove_directory(dir);
    return;
  }
  index_.add_directory(dir, render_bar(state_.tree.navigator_path(dir)));
}

void Core::reindex_article(ArticleId article) {
  std::unique_lock lock(mu_);
  const auto* a = state_.tree.find_article(article);
  if (a == nullptr) {
    index_.remove_article(article);
    return;
  }
  index_.add_article(article, a->title, a->abstract);
}

}  // namespace dtree
