#pragma once

#include <filesystem>
#include <functional>

#include "dtree/core.hpp"

namespace dtree {

inline constexpr int kSnapshotSchemaVersion = 1;
inline constexpr std::string_view kSnapshotFormat = "dtree-snapshot";

struct SaveOptions {
  /// Runs after the temporary file is durable and before it replaces the
  /// previous snapshot. Tests use it to inject crashes.
  std::function<void()> before_rename;
};

/// Writes `state` to `path` atomically (temp file, fsync, rename). Attachment
/// blobs go to `<dir of path>/blobs/<sha256>`, written once each.
void save_state(const State& state, const std::filesystem::path& path, const SaveOptions& opts = {});

/// Reads a snapshot written by save_state. Throws IoError,
/// SchemaVersionMismatch or CorruptSnapshot.
State load_state(const std::filesystem::path& path);

}  // namespace dtree
