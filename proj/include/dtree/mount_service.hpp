#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "dtree/core.hpp"
#include "dtree/relay/hub.hpp"

namespace dtree {

/// Listing and fetching of mounted shares: permission checks from Core,
/// transport through the relay hub. No Core lock is held during network I/O.
class MountService {
 public:
  MountService(Core& core, relay::RelayHub& hub) : core_(core), hub_(hub) {}

  /// Merged listing of every binding on dir at sub_path. A binding whose
  /// agent is offline or does not answer in time contributes one
  /// Unavailable placeholder named after the binding label.
  std::vector<RemoteEntry> list_mount_entries(DirectoryId dir, UserId viewer, std::string_view sub_path);

  /// Opens a relayed transfer. Errors that happen before the first byte
  /// (permission, offline agent) are thrown here.
  std::unique_ptr<relay::FetchStream> fetch_mounted_file(BindingId binding, UserId viewer, std::string_view rel_path);

  /// As above, checking that the binding belongs to dir.
  std::unique_ptr<relay::FetchStream> fetch_mounted_file(DirectoryId dir, UserId viewer, BindingId binding,
                                                         std::string_view rel_path);

 private:
  Core& core_;
  relay::RelayHub& hub_;
};

}  // namespace dtree
