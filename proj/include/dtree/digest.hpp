#pragma once

#include <string>
#include <string_view>

namespace dtree {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);
/// Throws ProtocolError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace dtree
