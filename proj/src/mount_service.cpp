#include "dtree/mount_service.hpp"

#include <future>

#include "dtree/error.hpp"

namespace dtree {

std::vector<RemoteEntry> MountService::list_mount_entries(DirectoryId dir, UserId viewer, std::string_view sub_path) {
  auto bindings = core_.readable_mounts(dir, viewer);
  validate_relative_path(sub_path);

  struct Pending {
    MountBinding binding;
    std::string label;
    std::future<std::vector<RemoteEntry>> result;
  };
  std::vector<Pending> pending;
  for (auto& b : bindings) {
    std::string label = core_.mount_label(b);
    std::string path(sub_path);
    auto fut = std::async(std::launch::async, [this, b, path] {
      return hub_.list(b.account, b.agent_id, b.share_path, path);
    });
    pending.push_back(Pending{std::move(b), std::move(label), std::move(fut)});
  }

  std::vector<RemoteEntry> out;
  for (auto& p : pending) {
    try {
      for (auto& e : p.result.get()) {
        e.binding = p.binding.id;
        e.label = p.label;
        out.push_back(std::move(e));
      }
    } catch (const Error& e) {
      if (e.code() == Errc::RemotePathRejected) throw;
      if (e.code() == Errc::NotFound && !sub_path.empty()) continue;  // path absent in this share
      RemoteEntry placeholder;
      placeholder.name = p.label;
      placeholder.kind = EntryKind::Dir;
      placeholder.availability = Availability::Unavailable;
      placeholder.binding = p.binding.id;
      placeholder.label = p.label;
      out.push_back(std::move(placeholder));
    }
  }
  return out;
}

std::unique_ptr<relay::FetchStream> MountService::fetch_mounted_file(BindingId binding, UserId viewer,
                                                                     std::string_view rel_path) {
  MountBinding b = core_.readable_mount(binding, viewer);
  validate_relative_path(rel_path);
  return hub_.fetch(b.account, b.agent_id, b.share_path, rel_path);
}

std::unique_ptr<relay::FetchStream> MountService::fetch_mounted_file(DirectoryId dir, UserId viewer,
                                                                     BindingId binding, std::string_view rel_path) {
  MountBinding b = core_.readable_mount(binding, viewer);
  if (b.directory != dir) fail(Errc::NotFound, "binding " + binding.str() + " is not on directory " + dir.str());
  validate_relative_path(rel_path);
  return hub_.fetch(b.account, b.agent_id, b.share_path, rel_path);
}

}  // namespace dtree
