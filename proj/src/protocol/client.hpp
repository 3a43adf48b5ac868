#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decoder/decoder.hpp"
#include "protocol/session.hpp"
#include "protocol/transport.hpp"

namespace polyscore::proto {

/// Per-utterance wall time by stage, in milliseconds.
struct LatencyBreakdown {
  double encryption_ms = 0.0;
  double am_scoring_ms = 0.0;
  double decryption_ms = 0.0;
  double decoding_ms = 0.0;
  double overall_ms = 0.0;

  double component_sum() const { return encryption_ms + am_scoring_ms + decryption_ms + decoding_ms; }
};

struct UtteranceTiming {
  std::string session;
  std::size_t utterance = 0;
  std::size_t frames = 0;
  LatencyBreakdown ms;
};

class LatencyReport {
 public:
  void add(UtteranceTiming t) { rows_.push_back(std::move(t)); }
  const std::vector<UtteranceTiming>& rows() const { return rows_; }
  LatencyBreakdown mean() const;
  LatencyBreakdown median() const;
  /// session,utterance,frames,encryption_ms,am_scoring_ms,decryption_ms,decoding_ms,overall_ms
  std::string csv() const;
  /// Human-readable table with mean and median rows.
  std::string table() const;

 private:
  std::vector<UtteranceTiming> rows_;
};

struct UtteranceResult {
  std::vector<ScoredFrame> frames;
  std::vector<std::size_t> path;
  std::string transcript;
  LatencyBreakdown latency;
  std::size_t flagged = 0;
};

/// Frames exchanged in one session, in the order they crossed the channel.
struct Transcript {
  std::vector<std::vector<std::uint8_t>> frames;
};

/// Runs the client role over a channel: handshake, utterances, close.
class Client {
 public:
  Client(ClientSession& session, Channel& channel, Transcript* transcript = nullptr)
      : session_(session), channel_(channel), transcript_(transcript) {}

  void handshake();
  /// Encrypts, scores remotely, decrypts and decodes one utterance. Without a
  /// graph the decode is a framewise argmax.
  UtteranceResult run_utterance(const std::vector<std::vector<double>>& frames, const DecodeGraph* graph = nullptr);
  void close();

 private:
  WireMessage exchange(const WireMessage& out);

  ClientSession& session_;
  Channel& channel_;
  Transcript* transcript_;
  std::size_t next_frame_ = 0;
};

}  // namespace polyscore::proto
