#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dtree/relay/transport.hpp"

namespace dtree::relay {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 16U << 20U;

enum class MsgType {
  Hello,
  HelloOk,
  Ping,
  Pong,
  ListReq,
  ListResp,
  FetchReq,
  FetchChunk,
  FetchEnd,
  FetchAck,     // server -> agent: credit for more chunks
  FetchCancel,  // server -> agent: stop sending this transfer
  Error,
};

std::string_view msg_type_name(MsgType t);
std::optional<MsgType> parse_msg_type(std::string_view name);

/// One protocol message. On the wire: 4-byte big-endian body length, then a
/// UTF-8 JSON object {"type", "correlation_id", "payload"}.
struct Message {
  MsgType type = MsgType::Ping;
  std::uint64_t correlation_id = 0;
  nlohmann::json payload = nlohmann::json::object();
};

std::string encode_frame(const Message& m);
/// Parses a frame body (without the length prefix). Throws ProtocolError.
Message decode_body(std::string_view body);

/// Blocking read of one frame. nullopt on clean end of stream before any
/// byte of a frame; ProtocolError on a truncated or malformed frame.
std::optional<Message> read_message(Stream& s);
void write_message(Stream& s, const Message& m);

Message error_message(std::uint64_t correlation_id, std::string_view code, std::string_view text);

}  // namespace dtree::relay
