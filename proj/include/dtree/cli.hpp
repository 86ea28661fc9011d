#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dtree/http_api.hpp"

namespace dtree::cli {

enum ExitCode : int { kOk = 0, kApiError = 1, kUsageError = 2, kConnectionError = 3 };

/// One capability of a verb: an endpoint plus, where several verbs share an
/// endpoint, the request variant that tells them apart (e.g. "decision=permit").
struct VerbRoute {
  std::string verb;  // "dir create", "group permit", ...
  Endpoint endpoint;
  std::string variant;
};

/// The verb table. `agent run` speaks the agent protocol and has no row.
const std::vector<VerbRoute>& verb_table();
/// All verbs, including those without HTTP routes.
const std::vector<std::string>& verbs();

/// $DTREE_CONFIG, else $XDG_CONFIG_HOME/dtree/profile.json, else
/// ~/.config/dtree/profile.json.
std::filesystem::path default_profile_path();

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dtree::cli
