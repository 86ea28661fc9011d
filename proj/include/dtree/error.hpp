#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dtree {

/// Every domain failure the service can report. The HTTP layer maps these to
/// status classes; the CLI maps status classes to exit codes.
enum class Errc {
  // lookups
  NotFound,
  ParentNotFound,
  UserNotFound,
  NoSuchApplication,
  // authorization
  PermissionDenied,
  NotOwner,
  AuthFailed,
  Unauthenticated,
  // validation
  InvalidName,
  InvalidTitle,
  InvalidArgument,
  WeakPassword,
  EmptyQuery,
  EmptyTerm,
  InvalidMode,
  AttachmentTooLarge,
  // state conflicts
  DuplicateName,
  ParentTrashed,
  TrashedDirectory,
  AlreadyTrashed,
  NotTrashed,
  NotEmpty,
  RootUndeletable,
  RootUntrashable,
  AlreadyGranted,
  NotGranted,
  AlreadyMember,
  AlreadyPending,
  Blacklisted,
  AlreadyBlacklisted,
  NotBlacklisted,
  NotMember,
  UsernameTaken,
  DuplicateBinding,
  // relay
  AgentOffline,
  RemotePathRejected,
  TransferTimeout,
  ProtocolError,
  // persistence
  IoError,
  SchemaVersionMismatch,
  CorruptSnapshot,
};

std::string_view errc_name(Errc code);
std::optional<Errc> parse_errc(std::string_view name);

/// Domain error carrying a machine-readable code plus human detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail);

  [[nodiscard]] Errc code() const { return code_; }
  [[nodiscard]] const std::string& detail() const { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

[[noreturn]] void fail(Errc code, std::string detail = {});

}  // namespace dtree
