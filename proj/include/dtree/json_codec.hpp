#pragma once

#include <json.hpp>

#include "dtree/authz.hpp"
#include "dtree/core.hpp"
#include "dtree/groups.hpp"
#include "dtree/mounts.hpp"
#include "dtree/search.hpp"
#include "dtree/tree_store.hpp"

namespace dtree {

using json = nlohmann::json;

/// {"DirCreator": {"Publish": true, ...}, "thisGroup": {...}, ...}
json matrix_to_json(const AuthMatrix& m);
/// Requires all 20 cells; throws InvalidArgument otherwise.
AuthMatrix matrix_from_json(const json& j);

json roles_to_json(RoleSet roles);

std::string_view state_name(DirState s);
std::string_view visibility_name(Visibility v);
Visibility parse_visibility(std::string_view s);

json directory_to_json(const Directory& d);
json bar_to_json(const NavigatorBar& bar);
json article_summary_to_json(const ArticleSummary& a);
json article_to_json(const Article& a);
json hit_to_json(const SearchHit& h);
json binding_to_json(const MountBinding& b);
json entry_to_json(const RemoteEntry& e);
json group_to_json(const GroupState& g);
json grants_to_json(const GrantSet& g);

}  // namespace dtree
