#include "dtree/json_codec.hpp"

#include "dtree/error.hpp"

namespace dtree {

json matrix_to_json(const AuthMatrix& m) {
  json out = json::object();
  for (Role role : kAllRoles) {
    json row = json::object();
    for (Right right : kAllRights) row[std::string(right_name(right))] = m.get(role, right);
    out[std::string(role_name(role))] = std::move(row);
  }
  return out;
}

AuthMatrix matrix_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::InvalidArgument, "matrix must be an object");
  AuthMatrix m;
  std::size_t cells = 0;
  for (const auto& [role_key, row] : j.items()) {
    auto role = parse_role(role_key);
    if (!role) fail(Errc::InvalidArgument, "unknown role " + role_key);
    if (!row.is_object()) fail(Errc::InvalidArgument, "matrix row must be an object");
    for (const auto& [right_key, cell] : row.items()) {
      auto right = parse_right(right_key);
      if (!right) fail(Errc::InvalidArgument, "unknown right " + right_key);
      if (!cell.is_boolean()) fail(Errc::InvalidArgument, "matrix cells must be booleans");
      m.set(*role, *right, cell.get<bool>());
      ++cells;
    }
  }
  if (cells != AuthMatrix::kCells) fail(Errc::InvalidArgument, "matrix must define all 20 cells");
  return m;
}

json roles_to_json(RoleSet roles) {
  json out = json::array();
  for (Role r : kAllRoles) {
    if (roles.contains(r)) out.push_back(role_name(r));
  }
  return out;
}

std::string_view state_name(DirState s) { return s == DirState::Active ? "Active" : "Trashed"; }
std::string_view visibility_name(Visibility v) { return v == Visibility::Public ? "Public" : "Private"; }

Visibility parse_visibility(std::string_view s) {
  if (s == "Public") return Visibility::Public;
  if (s == "Private") return Visibility::Private;
  fail(Errc::InvalidArgument, "visibility must be Public or Private");
}

json directory_to_json(const Directory& d) {
  return json{{"id", d.id.value()},
              {"name", d.name},
              {"parent", d.parent.valid() ? json(d.parent.value()) : json(nullptr)},
              {"owner", d.owner.value()},
              {"state", state_name(d.state)},
              {"visibility", visibility_name(d.visibility)},
              {"matrix", matrix_to_json(d.matrix)},
              {"created_at", to_micros(d.created_at)}};
}

json bar_to_json(const NavigatorBar& bar) {
  json out = json::array();
  for (const auto& [id, name] : bar) out.push_back(json{{"id", id.value()}, {"name", name}});
  return out;
}

json article_summary_to_json(const ArticleSummary& a) {
  json atts = json::array();
  for (const auto& [name, size] : a.attachments) atts.push_back(json{{"filename", name}, {"size", size}});
  return json{{"id", a.id.value()},       {"directory", a.directory.value()},
              {"author", a.author.value()}, {"title", a.title},
              {"abstract", a.abstract},     {"url", a.url},
              {"published_at", to_micros(a.published_at)}, {"attachments", std::move(atts)}};
}

json article_to_json(const Article& a) {
  json atts = json::array();
  for (const auto& att : a.attachments) {
    atts.push_back(json{{"filename", att.filename}, {"size", att.size()}, {"sha256", att.sha256}});
  }
  return json{{"id", a.id.value()},
              {"directory", a.directory.value()},
              {"author", a.author.value()},
              {"title", a.title},
              {"abstract", a.abstract},
              {"body", a.body},
              {"url", article_url(a.id)},
              {"published_at", to_micros(a.published_at)},
              {"attachments", std::move(atts)}};
}

json hit_to_json(const SearchHit& h) {
  json out{{"directory", h.directory.value()}, {"bar", bar_to_json(h.bar)}, {"bar_text", render_bar(h.bar)}};
  if (h.article) out["article"] = h.article->value();
  if (h.article_url) out["article_url"] = *h.article_url;
  if (h.title) out["title"] = *h.title;
  return out;
}

json binding_to_json(const MountBinding& b) {
  return json{{"id", b.id.value()},           {"directory", b.directory.value()}, {"account", b.account.value()},
              {"agent_id", b.agent_id},       {"share_path", b.share_path},
              {"created_at", to_micros(b.created_at)}};
}

json entry_to_json(const RemoteEntry& e) {
  return json{{"name", e.name},
              {"kind", e.kind == EntryKind::Dir ? "dir" : "file"},
              {"size", e.size},
              {"modified", to_micros(e.modified)},
              {"availability", e.availability == Availability::Live ? "Live" : "Unavailable"},
              {"binding", e.binding.value()},
              {"label", e.label}};
}

json group_to_json(const GroupState& g) {
  json members = json::array();
  for (auto u : g.members()) members.push_back(u.value());
  json pending = json::array();
  for (const auto& p : g.pending()) pending.push_back(json{{"user", p.user.value()}, {"applied_at", to_micros(p.applied_at)}});
  json black = json::array();
  for (auto u : g.blacklisted()) black.push_back(u.value());
  return json{{"members", std::move(members)}, {"pending", std::move(pending)}, {"blacklist", std::move(black)}};
}

json grants_to_json(const GrantSet& g) {
  json users = json::array();
  for (auto u : g.users) users.push_back(u.value());
  json groups = json::array();
  for (auto d : g.groups) groups.push_back(d.value());
  return json{{"users", std::move(users)}, {"groups", std::move(groups)}};
}

}  // namespace dtree
