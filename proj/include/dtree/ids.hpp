#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace dtree {

/// Opaque numeric identifier tagged by the entity it names. Ids are handed
/// out by monotonically increasing counters and are never reused.
template <typename Tag>
class Id {
 public:
  constexpr Id() = default;
  constexpr explicit Id(std::uint64_t value) : value_(value) {}

  [[nodiscard]] constexpr std::uint64_t value() const { return value_; }
  [[nodiscard]] constexpr bool valid() const { return value_ != 0; }
  [[nodiscard]] std::string str() const { return std::to_string(value_); }

  constexpr auto operator<=>(const Id&) const = default;

 private:
  std::uint64_t value_ = 0;
};

struct UserTag {};
struct DirectoryTag {};
struct ArticleTag {};
struct BindingTag {};

using UserId = Id<UserTag>;
using DirectoryId = Id<DirectoryTag>;
using ArticleId = Id<ArticleTag>;
using BindingId = Id<BindingTag>;

/// Microsecond-resolution wall-clock time. Stored as an integer count in
/// snapshots and API payloads so round-trips are exact.
using Timestamp = std::chrono::sys_time<std::chrono::microseconds>;

inline std::int64_t to_micros(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_micros(std::int64_t us) { return Timestamp{std::chrono::microseconds{us}}; }

}  // namespace dtree

template <typename Tag>
struct std::hash<dtree::Id<Tag>> {
  std::size_t operator()(const dtree::Id<Tag>& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value());
  }
};
