#include "dtree/mounts.hpp"

#include <algorithm>

#include "dtree/error.hpp"

namespace dtree {

void validate_agent_id(std::string_view agent_id) {
  auto ok = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.' ||
           c == '-';
  };
  if (agent_id.empty() || agent_id.size() > 64 || !std::all_of(agent_id.begin(), agent_id.end(), ok)) {
    fail(Errc::InvalidArgument, "agent id must be 1-64 characters of [A-Za-z0-9_.-]");
  }
}

void validate_relative_path(std::string_view rel_path) {
  if (!rel_path.empty() && rel_path.front() == '/') fail(Errc::RemotePathRejected, "absolute path");
  for (char c : rel_path) {
    if (c == '\\') fail(Errc::RemotePathRejected, "backslash");
    if (static_cast<unsigned char>(c) < 0x20 || c == 0x7F) fail(Errc::RemotePathRejected, "control character");
  }
  std::size_t start = 0;
  while (start <= rel_path.size()) {
    auto end = rel_path.find('/', start);
    if (end == std::string_view::npos) end = rel_path.size();
    if (rel_path.substr(start, end - start) == "..") fail(Errc::RemotePathRejected, "parent traversal");
    start = end + 1;
  }
}

}  // namespace dtree
