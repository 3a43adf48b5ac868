#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "decoder/decoder.hpp"
#include "hecrypt/bfv.hpp"
#include "netcore/fixed_point.hpp"
#include "protocol/wire.hpp"

namespace polyscore::proto {

struct ClientConfig {
  he::HeParams params;
  std::size_t batch_size = kDefaultBatchSize;
  /// Normalize decrypted scores into probabilities.
  bool softmax = false;
  /// Drives keygen, encryption randomness and the session id. Entropy when unset.
  std::optional<std::uint64_t> seed;
  /// Existing keys to use instead of generating fresh ones.
  std::optional<he::SessionKeys> keys;
};

/// A decrypted frame. Frames whose decryption failed the noise checks are
/// flagged and carry zero scores rather than corrupted values.
struct ScoredFrame {
  PosteriorFrame frame;
  bool flagged = false;
  std::string reason;
};

/// Fixed-point encoded features, produced before any ciphertext exists so
/// that an out-of-range value fails before anything is sent.
struct EncodedFrames {
  std::size_t first_index = 0;
  std::vector<std::vector<std::uint64_t>> frames;
};

/// Client half of a session: owns pk, sk and ek. Messages are produced and
/// consumed in handshake order HELLO, EVAL_KEYS, then data, then BYE.
class ClientSession {
 public:
  explicit ClientSession(ClientConfig cfg);
  ~ClientSession();
  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;

  const SessionId& id() const { return id_; }
  const he::HeParams& params() const { return cfg_.params; }
  const he::SessionKeys& keys() const { return keys_; }
  std::size_t batch_size() const { return cfg_.batch_size; }
  bool softmax_enabled() const { return cfg_.softmax; }
  /// Model geometry and scales the server advertised; valid after accept_hello.
  const HelloReply& server_info() const;
  bool ready() const { return state_ == State::Ready; }
  std::size_t pending_frames() const { return pending_.size(); }

  WireMessage hello();
  void accept_hello(const WireMessage& reply);
  WireMessage eval_keys();
  void accept_eval_keys(const WireMessage& reply);

  EncodedFrames encode(const std::vector<std::vector<double>>& frames, std::size_t first_index = 0) const;
  /// FEATURE_BATCH for frames [begin, end) of `encoded`.
  WireMessage encrypt_batch(const EncodedFrames& encoded, std::size_t begin, std::size_t end);
  std::vector<ScoredFrame> read_posteriors(const WireMessage& reply);

  WireMessage bye();
  void accept_bye(const WireMessage& reply);

 private:
  enum class State { Start, HelloSent, Negotiated, KeysSent, Ready, ByeSent, Closed };
  WireMessage make(MessageType type, std::vector<std::uint8_t> payload);
  void check_reply(const WireMessage& m, MessageType expected, State state);

  ClientConfig cfg_;
  he::SessionKeys keys_;
  std::unique_ptr<he::Encryptor> encryptor_;
  std::unique_ptr<he::Decryptor> decryptor_;
  SessionId id_{};
  std::uint64_t sent_ = 0, received_ = 0;
  State state_ = State::Start;
  std::optional<HelloReply> server_;
  std::vector<std::size_t> pending_;
};

/// Public key bytes and evaluation key bytes a server may be pinned to.
struct PinnedKeys {
  std::vector<std::uint8_t> public_key;
  std::vector<std::uint8_t> eval_key;
};

struct ServerConfig {
  FixedPointNetwork model;
  /// Accepted parameter sets; a HELLO must offer one of these exactly.
  std::vector<he::HeParams> supported;
  /// Worker threads per batch. Frames are independent, so results do not depend on it.
  std::size_t threads = 1;
  /// When set, only sessions presenting exactly these keys are accepted.
  std::optional<PinnedKeys> pinned;
  /// Receives one CSV line per scored batch: session,sequence,frames,scoring_ms.
  std::ostream* log = nullptr;
};

/// Server half of a session. Holds only public material: there is no field a
/// secret key could be stored in.
struct ServerSession {
  SessionId id{};
  he::HeParams params;
  std::uint32_t batch_size = 0;
  std::shared_ptr<const he::PublicKey> pk;
  std::shared_ptr<const he::EvalKey> ek;
  std::shared_ptr<const FixedPointNetwork> model;
  std::uint64_t received = 0, sent = 0;

  /// Everything the session holds, serialized; used to audit key confinement.
  std::vector<std::uint8_t> serialize() const;
};

class ServerConnection;

/// Shared, immutable model plus the registry of session ids already used.
class Server {
 public:
  explicit Server(ServerConfig cfg);

  std::unique_ptr<ServerConnection> open();
  const ServerConfig& config() const { return cfg_; }
  std::shared_ptr<const FixedPointNetwork> model() const { return model_; }
  std::vector<std::string> supported_names() const;
  std::size_t sessions_started() const;

 private:
  friend class ServerConnection;
  bool claim(const SessionId& id);
  void log_batch(const SessionId& id, std::uint64_t sequence, std::size_t frames, double ms);

  ServerConfig cfg_;
  std::shared_ptr<const FixedPointNetwork> model_;
  mutable std::mutex mutex_;
  std::set<SessionId> seen_;
};

/// One connection's state machine. Not thread-safe; each connection is
/// served by one worker.
class ServerConnection {
 public:
  explicit ServerConnection(Server& server) : server_(server) {}

  /// Processes one incoming frame and returns the frames to send back. After
  /// an ERROR or BYE the connection is closed and further input is ignored.
  std::vector<std::vector<std::uint8_t>> handle(std::span<const std::uint8_t> frame);
  bool closed() const { return state_ == State::Closed; }
  const ServerSession& session() const { return session_; }

 private:
  enum class State { AwaitHello, AwaitKeys, Ready, Closed };
  WireMessage reply(MessageType type, std::vector<std::uint8_t> payload);
  WireMessage on_hello(const WireMessage& m);
  WireMessage on_eval_keys(const WireMessage& m);
  WireMessage on_features(const WireMessage& m);

  Server& server_;
  ServerSession session_;
  std::unique_ptr<he::Evaluator> evaluator_;
  State state_ = State::AwaitHello;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> scores);

}  // namespace polyscore::proto
