#pragma once

// Structural invariants of a service state, checked from raw state and
// public queries without reusing the store's own validation.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dtree/core.hpp"
#include "dtree/error.hpp"
#include "oracles.hpp"

namespace dtree::testing {

/// Returns one message per violation.
inline std::vector<std::string> check_invariants(const Core& core, const std::vector<UserId>& users) {
  std::vector<std::string> bad;
  std::vector<DirectoryId> ids;
  std::map<DirectoryId, std::vector<DirectoryId>> trashed_chain;  // trashed nodes from root to self
  core.with_state([&](const State& s) {
    const auto& nodes = s.tree.nodes();
    int roots = 0;
    std::map<std::pair<DirectoryId, std::string>, int> sibling_names;
    for (const auto& [id, n] : nodes) {
      ids.push_back(id);
      if (!n.dir.parent.valid()) {
        ++roots;
        if (n.dir.name != "ALL") bad.push_back("root is not named ALL");
      } else {
        if (!nodes.count(n.dir.parent)) bad.push_back("dangling parent of " + id.str());
        ++sibling_names[{n.dir.parent, ascii_lower(n.dir.name)}];
      }
      // Acyclicity: the parent walk reaches a root within |nodes| steps.
      std::vector<DirectoryId> chain;
      DirectoryId cur = id;
      std::size_t steps = 0;
      while (cur.valid() && nodes.count(cur) && steps <= nodes.size()) {
        if (nodes.at(cur).dir.state == DirState::Trashed) chain.insert(chain.begin(), cur);
        cur = nodes.at(cur).dir.parent;
        ++steps;
      }
      if (steps > nodes.size()) bad.push_back("cycle through " + id.str());
      trashed_chain[id] = chain;

      const auto& g = n.group;
      std::set<UserId> pending;
      for (const auto& p : g.pending()) {
        if (!pending.insert(p.user).second) bad.push_back("duplicate application on " + id.str());
      }
      for (auto u : g.members()) {
        if (g.blacklisted().count(u) || pending.count(u)) bad.push_back("group sets overlap on " + id.str());
      }
      for (auto u : pending) {
        if (g.blacklisted().count(u)) bad.push_back("group sets overlap on " + id.str());
      }
      if (g.members().count(n.dir.owner) || pending.count(n.dir.owner) || g.blacklisted().count(n.dir.owner)) {
        bad.push_back("owner inside own group sets on " + id.str());
      }
    }
    if (roots != 1) bad.push_back("root count " + std::to_string(roots));
    for (const auto& [key, count] : sibling_names) {
      if (count > 1) bad.push_back("sibling name clash '" + key.second + "' under " + key.first.str());
    }
  });

  auto hidden_from = [&](DirectoryId d, UserId u) {
    for (auto t : trashed_chain[d]) {
      if (core.directory(t).owner != u) return true;
    }
    return false;
  };
  for (auto u : users) {
    std::set<DirectoryId> hidden;
    for (auto d : ids) {
      if (hidden_from(d, u)) hidden.insert(d);
    }
    for (auto d : hidden) {
      try {
        (void)core.domain_tool_view(d, u);
        bad.push_back("trashed " + d.str() + " viewable by " + u.str());
      } catch (const Error&) {
      }
    }
    for (auto d : ids) {
      try {
        for (const auto& c : core.list_children(d, u)) {
          if (hidden.count(c.id)) bad.push_back("trashed " + c.id.str() + " listed for " + u.str());
        }
      } catch (const Error&) {
      }
    }
    // Every non-root name contains "d", so this matches every directory.
    for (const auto& h : core.execute_search(make_query("d", SearchMode::Dir, u))) {
      if (hidden.count(h.directory)) bad.push_back("trashed " + h.directory.str() + " found by " + u.str());
    }
    for (const auto& h : core.execute_search(make_query("t", SearchMode::Key, u))) {
      if (hidden.count(h.directory)) bad.push_back("article under trash found by " + u.str());
    }
  }
  return bad;
}

}  // namespace dtree::testing
