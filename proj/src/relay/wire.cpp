#include "dtree/relay/wire.hpp"

#include <array>

#include "dtree/error.hpp"

namespace dtree::relay {

namespace {

constexpr std::array<std::pair<MsgType, std::string_view>, 12> kNames{{
    {MsgType::Hello, "HELLO"},
    {MsgType::HelloOk, "HELLO_OK"},
    {MsgType::Ping, "PING"},
    {MsgType::Pong, "PONG"},
    {MsgType::ListReq, "LIST_REQ"},
    {MsgType::ListResp, "LIST_RESP"},
    {MsgType::FetchReq, "FETCH_REQ"},
    {MsgType::FetchChunk, "FETCH_CHUNK"},
    {MsgType::FetchEnd, "FETCH_END"},
    {MsgType::FetchAck, "FETCH_ACK"},
    {MsgType::FetchCancel, "FETCH_CANCEL"},
    {MsgType::Error, "ERROR"},
}};

/// Reads exactly buf.size() bytes. Returns bytes read before end of stream.
std::size_t read_exact(Stream& s, std::span<char> buf) {
  std::size_t got = 0;
  while (got < buf.size()) {
    std::size_t n = s.read_some(buf.subspan(got));
    if (n == 0) break;
    got += n;
  }
  return got;
}

}  // namespace

std::string_view msg_type_name(MsgType t) {
  for (const auto& [type, name] : kNames) {
    if (type == t) return name;
  }
  return {};
}

std::optional<MsgType> parse_msg_type(std::string_view name) {
  for (const auto& [type, n] : kNames) {
    if (n == name) return type;
  }
  return std::nullopt;
}

std::string encode_frame(const Message& m) {
  nlohmann::json j{{"type", msg_type_name(m.type)}, {"correlation_id", m.correlation_id}, {"payload", m.payload}};
  std::string body = j.dump();
  if (body.size() > kMaxFrameBytes) fail(Errc::ProtocolError, "frame too large");
  const auto len = static_cast<std::uint32_t>(body.size());
  std::string frame;
  frame.reserve(4 + body.size());
  frame.push_back(static_cast<char>((len >> 24) & 0xFF));
  frame.push_back(static_cast<char>((len >> 16) & 0xFF));
  frame.push_back(static_cast<char>((len >> 8) & 0xFF));
  frame.push_back(static_cast<char>(len & 0xFF));
  frame += body;
  return frame;
}

Message decode_body(std::string_view body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(Errc::ProtocolError, "frame body is not a JSON object");
  auto type = j.find("type");
  auto corr = j.find("correlation_id");
  auto payload = j.find("payload");
  if (type == j.end() || !type->is_string() || corr == j.end() || !corr->is_number_unsigned() ||
      payload == j.end() || !payload->is_object()) {
    fail(Errc::ProtocolError, "frame lacks type, correlation_id or payload");
  }
  auto t = parse_msg_type(type->get<std::string>());
  if (!t) fail(Errc::ProtocolError, "unknown message type " + type->get<std::string>());
  return Message{*t, corr->get<std::uint64_t>(), std::move(*payload)};
}

std::optional<Message> read_message(Stream& s) {
  std::array<char, 4> hdr{};
  std::size_t got = read_exact(s, hdr);
  if (got == 0) return std::nullopt;
  if (got < hdr.size()) fail(Errc::ProtocolError, "truncated frame header");
  const std::uint32_t len = (static_cast<std::uint32_t>(static_cast<unsigned char>(hdr[0])) << 24) |
                            (static_cast<std::uint32_t>(static_cast<unsigned char>(hdr[1])) << 16) |
                            (static_cast<std::uint32_t>(static_cast<unsigned char>(hdr[2])) << 8) |
                            static_cast<std::uint32_t>(static_cast<unsigned char>(hdr[3]));
  if (len > kMaxFrameBytes) fail(Errc::ProtocolError, "frame exceeds size limit");
  std::string body(len, '\0');
  if (read_exact(s, body) != len) fail(Errc::ProtocolError, "truncated frame body");
  return decode_body(body);
}

void write_message(Stream& s, const Message& m) { s.write_all(encode_frame(m)); }

Message error_message(std::uint64_t correlation_id, std::string_view code, std::string_view text) {
  return Message{MsgType::Error, correlation_id, nlohmann::json{{"code", code}, {"message", text}}};
}

}  // namespace dtree::relay
