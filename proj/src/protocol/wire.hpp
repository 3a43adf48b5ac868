#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "hecrypt/params.hpp"

namespace polyscore::proto {

inline constexpr std::uint16_t kWireVersion = 1;
/// Upper bound on one frame body; a 40-dim batch of 16 frames at 8192 is well below it.
inline constexpr std::uint32_t kMaxFrameBytes = 0x7fffffff;
inline constexpr std::size_t kDefaultBatchSize = 16;

enum class MessageType : std::uint8_t {
  Hello = 1,
  EvalKeys = 2,
  FeatureBatch = 3,
  PosteriorBatch = 4,
  Error = 5,
  Bye = 6,
};

const char* to_string(MessageType type);

using SessionId = std::array<std::uint8_t, 16>;
std::string to_hex(const SessionId& id);

struct WireMessage {
  MessageType type = MessageType::Hello;
  SessionId session_id{};
  std::uint64_t sequence = 0;
  std::vector<std::uint8_t> payload;
};

/// Frame: u32 body length, then body = u16 version, u8 type, 16-byte session
/// id, u64 sequence, payload. Little-endian throughout.
std::vector<std::uint8_t> encode_frame(const WireMessage& msg);
/// Throws Protocol on a truncated frame, unknown type or version mismatch.
WireMessage decode_frame(std::span<const std::uint8_t> frame);

/// Client offer: the parameter set it wants and its batch size.
struct HelloRequest {
  he::HeParams params;
  std::uint32_t batch_size = kDefaultBatchSize;
};

/// Server answer: the accepted parameters plus what the client needs to
/// encode features and decode scores.
struct HelloReply {
  he::HeParams params;
  std::uint32_t input_dim = 0;
  std::uint32_t output_dim = 0;
  std::int32_t input_scale_bits = 0;
  std::int32_t output_scale_bits = 0;
  std::vector<std::string> supported;
};

struct ErrorReply {
  ErrorCode code = ErrorCode::Protocol;
  std::string message;
  std::vector<std::string> supported;
};

std::vector<std::uint8_t> encode(const HelloRequest& m);
std::vector<std::uint8_t> encode(const HelloReply& m);
std::vector<std::uint8_t> encode(const ErrorReply& m);
HelloRequest decode_hello_request(std::span<const std::uint8_t> payload);
HelloReply decode_hello_reply(std::span<const std::uint8_t> payload);
ErrorReply decode_error(std::span<const std::uint8_t> payload);

}  // namespace polyscore::proto
