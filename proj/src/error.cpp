#include "dtree/error.hpp"

namespace dtree {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NotFound: return "NotFound";
    case Errc::ParentNotFound: return "ParentNotFound";
    case Errc::UserNotFound: return "UserNotFound";
    case Errc::NoSuchApplication: return "NoSuchApplication";
    case Errc::PermissionDenied: return "PermissionDenied";
    case Errc::NotOwner: return "NotOwner";
    case Errc::AuthFailed: return "AuthFailed";
    case Errc::Unauthenticated: return "Unauthenticated";
    case Errc::InvalidName: return "InvalidName";
    case Errc::InvalidTitle: return "InvalidTitle";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::WeakPassword: return "WeakPassword";
    case Errc::EmptyQuery: return "EmptyQuery";
    case Errc::EmptyTerm: return "EmptyTerm";
    case Errc::InvalidMode: return "InvalidMode";
    case Errc::AttachmentTooLarge: return "AttachmentTooLarge";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::ParentTrashed: return "ParentTrashed";
    case Errc::TrashedDirectory: return "TrashedDirectory";
    case Errc::AlreadyTrashed: return "AlreadyTrashed";
    case Errc::NotTrashed: return "NotTrashed";
    case Errc::NotEmpty: return "NotEmpty";
    case Errc::RootUndeletable: return "RootUndeletable";
    case Errc::RootUntrashable: return "RootUntrashable";
    case Errc::AlreadyGranted: return "AlreadyGranted";
    case Errc::NotGranted: return "NotGranted";
    case Errc::AlreadyMember: return "AlreadyMember";
    case Errc::AlreadyPending: return "AlreadyPending";
    case Errc::Blacklisted: return "Blacklisted";
    case Errc::AlreadyBlacklisted: return "AlreadyBlacklisted";
    case Errc::NotBlacklisted: return "NotBlacklisted";
    case Errc::NotMember: return "NotMember";
    case Errc::UsernameTaken: return "UsernameTaken";
    case Errc::DuplicateBinding: return "DuplicateBinding";
    case Errc::AgentOffline: return "AgentOffline";
    case Errc::RemotePathRejected: return "RemotePathRejected";
    case Errc::TransferTimeout: return "TransferTimeout";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::IoError: return "IoError";
    case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case Errc::CorruptSnapshot: return "CorruptSnapshot";
  }
  return "Unknown";
}

std::optional<Errc> parse_errc(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::CorruptSnapshot); ++i) {
    if (errc_name(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

Error::Error(Errc code, std::string detail)
    : std::runtime_error(detail.empty() ? std::string(errc_name(code))
                                        : std::string(errc_name(code)) + ": " + detail),
      code_(code),
      detail_(std::move(detail)) {}

void fail(Errc code, std::string detail) { throw Error(code, std::move(detail)); }

}  // namespace dtree
