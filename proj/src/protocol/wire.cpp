#include "protocol/wire.hpp"

#include <cstdio>

#include "common/bytes.hpp"
#include "hecrypt/serialize.hpp"

namespace polyscore::proto {

namespace {

constexpr std::size_t kHeaderBytes = 2 + 1 + 16 + 8;

void write_names(ByteWriter& w, const std::vector<std::string>& names) {
  w.u32(static_cast<std::uint32_t>(names.size()));
  for (const auto& n : names) w.str(n);
}

std::vector<std::string> read_names(ByteReader& r) {
  const auto count = r.u32();
  r.check(count <= 1024, "too many names");
  std::vector<std::string> out;
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(r.str(256));
  return out;
}

}  // namespace

const char* to_string(MessageType type) {
  switch (type) {
    case MessageType::Hello: return "HELLO";
    case MessageType::EvalKeys: return "EVAL_KEYS";
    case MessageType::FeatureBatch: return "FEATURE_BATCH";
    case MessageType::PosteriorBatch: return "POSTERIOR_BATCH";
    case MessageType::Error: return "ERROR";
    case MessageType::Bye: return "BYE";
  }
  return "?";
}

std::string to_hex(const SessionId& id) {
  std::string s;
  char buf[3];
  for (auto b : id) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    s += buf;
  }
  return s;
}

std::vector<std::uint8_t> encode_frame(const WireMessage& msg) {
  const std::size_t body = kHeaderBytes + msg.payload.size();
  require(body <= kMaxFrameBytes, ErrorCode::Protocol, "message too large for one frame");
  ByteWriter w;
  w.data().reserve(4 + body);
  w.u32(static_cast<std::uint32_t>(body));
  w.u16(kWireVersion);
  w.u8(static_cast<std::uint8_t>(msg.type));
  w.bytes(msg.session_id);
  w.u64(msg.sequence);
  w.bytes(msg.payload);
  return w.take();
}

WireMessage decode_frame(std::span<const std::uint8_t> frame) {
  ByteReader r(frame, ErrorCode::Protocol, "frame");
  r.check(frame.size() >= 4, "truncated frame");
  const auto body = r.u32();
  r.check(body <= kMaxFrameBytes, "frame length out of range");
  r.check(r.remaining() >= body, "truncated frame");
  r.check(r.remaining() == body, "trailing bytes after frame");
  r.check(body >= kHeaderBytes, "truncated frame header");
  const auto version = r.u16();
  r.check(version == kWireVersion, "unsupported wire version " + std::to_string(version));
  WireMessage m;
  const auto type = r.u8();
  r.check(type >= 1 && type <= 6, "unknown message type " + std::to_string(type));
  m.type = static_cast<MessageType>(type);
  const auto id = r.bytes(16);
  std::copy(id.begin(), id.end(), m.session_id.begin());
  m.sequence = r.u64();
  const auto rest = r.bytes(r.remaining());
  m.payload.assign(rest.begin(), rest.end());
  return m;
}

std::vector<std::uint8_t> encode(const HelloRequest& m) {
  ByteWriter w;
  he::write_params(w, m.params);
  w.u32(m.batch_size);
  return w.take();
}

std::vector<std::uint8_t> encode(const HelloReply& m) {
  ByteWriter w;
  he::write_params(w, m.params);
  w.u32(m.input_dim);
  w.u32(m.output_dim);
  w.i32(m.input_scale_bits);
  w.i32(m.output_scale_bits);
  write_names(w, m.supported);
  return w.take();
}

std::vector<std::uint8_t> encode(const ErrorReply& m) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(m.code));
  w.str(m.message);
  write_names(w, m.supported);
  return w.take();
}

HelloRequest decode_hello_request(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, ErrorCode::Protocol, "HELLO");
  HelloRequest m;
  m.params = he::read_params(r);
  m.batch_size = r.u32();
  r.check(m.batch_size >= 1 && m.batch_size <= 4096, "batch size out of range");
  r.expect_done();
  return m;
}

HelloReply decode_hello_reply(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, ErrorCode::Protocol, "HELLO reply");
  HelloReply m;
  m.params = he::read_params(r);
  m.input_dim = r.u32();
  m.output_dim = r.u32();
  m.input_scale_bits = r.i32();
  m.output_scale_bits = r.i32();
  m.supported = read_names(r);
  r.expect_done();
  return m;
}

ErrorReply decode_error(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, ErrorCode::Protocol, "ERROR");
  ErrorReply m;
  const auto code = r.u16();
  r.check(code <= static_cast<std::uint16_t>(ErrorCode::KeyConfinement), "unknown error code");
  m.code = static_cast<ErrorCode>(code);
  m.message = r.str(4096);
  m.supported = read_names(r);
  r.expect_done();
  return m;
}

}  // namespace polyscore::proto
