#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "dtree/ids.hpp"

namespace dtree {

/// Association of an account's agent-side share with a directory.
struct MountBinding {
  BindingId id;
  DirectoryId directory;
  UserId account;
  std::string agent_id;
  std::string share_path;  // the label the agent exports the share under
  Timestamp created_at;

  bool operator==(const MountBinding&) const = default;
};

enum class EntryKind { File, Dir };
enum class Availability { Live, Unavailable };

/// One row of a mounted listing. Rows from different bindings are told apart
/// by `binding` and `label` ("<account>:<share_path>").
struct RemoteEntry {
  std::string name;
  EntryKind kind = EntryKind::File;
  std::uint64_t size = 0;
  Timestamp modified{};
  Availability availability = Availability::Live;
  BindingId binding;
  std::string label;

  bool operator==(const RemoteEntry&) const = default;
};

/// Throws InvalidArgument unless the agent id is 1-64 chars of [A-Za-z0-9_.-].
void validate_agent_id(std::string_view agent_id);

/// Rejects relative paths that could leave the share: absolute paths, "..",
/// backslashes, NUL and other control bytes. "" and "." name the share root.
/// Throws RemotePathRejected.
void validate_relative_path(std::string_view rel_path);

}  // namespace dtree
