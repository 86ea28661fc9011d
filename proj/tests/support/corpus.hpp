#pragma once

// Random directory trees and articles over a small vocabulary, so that
// conjunctive queries have a realistic mix of hits and misses.

#include <random>
#include <string>
#include <vector>

#include "dtree/error.hpp"
#include "support.hpp"

namespace dtree::testing {

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> kWords = {
      "protocol", "course", "Operating", "System", "network", "homework", "Exam",    "lecture", "notes",
      "TCP",      "kernel", "android",   "and",    "memory",  "Protocol", "COURSE", "ZSTU",    "class"};
  return kWords;
}

struct Corpus {
  std::vector<UserId> users;
  std::vector<DirectoryId> dirs;
};

inline std::string random_phrase(std::mt19937_64& rng, int max_words) {
  const auto& v = vocabulary();
  int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_words));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out += (rng() % 4 == 0) ? "-" : " ";
    out += v[rng() % v.size()];
  }
  return out;
}

/// Fills `w` with up to `n_dirs` directories and `n_articles` articles owned
/// by a handful of users, with random matrices, grants, memberships,
/// blacklists and trashed subtrees.
inline Corpus build_corpus(World& w, std::mt19937_64& rng, int n_users, int n_dirs, int n_articles) {
  Corpus c;
  for (int i = 0; i < n_users; ++i) c.users.push_back(w.user("user" + std::to_string(i)));
  auto sys = w.core.system_user();
  auto open = default_matrix();
  open.set(Role::AnyUser, Right::CreateSubDir, true);
  open.set(Role::AnyUser, Right::Publish, true);
  c.dirs.push_back(kRootId);
  int attempts = 0;
  while (static_cast<int>(c.dirs.size()) - 1 < n_dirs && attempts < n_dirs * 4) {
    ++attempts;
    auto parent = c.dirs[rng() % c.dirs.size()];
    auto owner = c.users[rng() % c.users.size()];
    try {
      auto parent_owner = w.core.directory(parent).owner;
      if (parent != kRootId) w.core.set_matrix(parent, parent_owner, open);
      auto d = w.core.create_directory(parent, random_phrase(rng, 3) + " " + std::to_string(attempts), owner);
      c.dirs.push_back(d.id);
    } catch (const Error&) {
    }
  }
  for (int i = 0; i < n_articles; ++i) {
    auto d = c.dirs[rng() % c.dirs.size()];
    auto author = c.users[rng() % c.users.size()];
    ArticleDraft a;
    a.title = random_phrase(rng, 3);
    a.abstract = random_phrase(rng, 6);
    try {
      w.core.publish_article(d, author, a);
    } catch (const Error&) {
    }
  }
  // Now scramble permissions and memberships.
  for (auto d : c.dirs) {
    if (d == kRootId) continue;
    auto owner = w.core.directory(d).owner;
    AuthMatrix m;
    for (Role r : kAllRoles) {
      for (Right x : kAllRights) m.set(r, x, rng() % 3 != 0);
    }
    w.core.set_matrix(d, owner, m);
    for (auto u : c.users) {
      if (u == owner) continue;
      try {
        switch (rng() % 8) {
          case 0: w.core.join(d, u); break;
          case 1: w.core.grant_user(d, owner, u); break;
          case 2: w.core.blacklist_user(d, owner, u); break;
          default: break;
        }
      } catch (const Error&) {
      }
    }
    if (rng() % 6 == 0) {
      try {
        w.core.grant_group(d, owner, c.dirs[rng() % c.dirs.size()]);
      } catch (const Error&) {
      }
    }
  }
  for (auto d : c.dirs) {
    if (d != kRootId && rng() % 25 == 0) {
      try {
        w.core.trash_directory(d, w.core.directory(d).owner);
      } catch (const Error&) {
      }
    }
  }
  (void)sys;
  return c;
}

/// A random query: one to three terms joined by the connective.
inline std::string random_query(std::mt19937_64& rng) {
  const auto& v = vocabulary();
  int n = 1 + static_cast<int>(rng() % 3);
  std::string q;
  for (int i = 0; i < n; ++i) {
    if (!q.empty()) q += " and ";
    std::string word = v[rng() % v.size()];
    if (word == "and") word = "android";
    // Sometimes a fragment, sometimes a two-word phrase.
    if (rng() % 4 == 0 && word.size() > 3) word = word.substr(0, 3);
    if (rng() % 5 == 0) word += " " + v[rng() % v.size()];
    if (word == "and" || word.ends_with(" and")) word += "roid";
    q += word;
  }
  return q;
}

}  // namespace dtree::testing
