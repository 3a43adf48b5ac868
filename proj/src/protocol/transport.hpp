#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "protocol/session.hpp"

namespace polyscore::proto {

/// Bidirectional stream of length-prefixed frames.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(std::span<const std::uint8_t> frame) = 0;
  /// Next complete frame (prefix included). Throws Protocol on a truncated
  /// frame or a closed peer.
  virtual std::vector<std::uint8_t> receive() = 0;
};

/// Client end wired straight into a server connection in the same process.
class InProcessChannel : public Channel {
 public:
  explicit InProcessChannel(Server& server) : connection_(server.open()) {}
  void send(std::span<const std::uint8_t> frame) override;
  std::vector<std::uint8_t> receive() override;
  const ServerConnection& connection() const { return *connection_; }

 private:
  std::unique_ptr<ServerConnection> connection_;
  std::deque<std::vector<std::uint8_t>> inbox_;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port"; throws Config on malformed input.
Endpoint parse_endpoint(const std::string& text);

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  static std::unique_ptr<TcpChannel> connect(const Endpoint& endpoint);

  void send(std::span<const std::uint8_t> frame) override;
  std::vector<std::uint8_t> receive() override;
  /// Half-closes the write side so the peer sees end of stream.
  void shutdown_write();

 private:
  int fd_;
};

class TcpListener {
 public:
  /// Port 0 binds an ephemeral port; see port().
  explicit TcpListener(const Endpoint& endpoint);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks for the next connection; returns null once close() was called.
  std::unique_ptr<TcpChannel> accept();
  void close();

 private:
  std::atomic<int> fd_{-1};
  std::uint16_t port_ = 0;
};

/// Runs one connection until BYE, ERROR or end of stream.
void serve_connection(Server& server, Channel& channel);

/// Accepts connections and serves each on its own thread. Returns after
/// `max_connections` connections have finished (0 = until the listener closes).
void serve_tcp(Server& server, TcpListener& listener, std::size_t max_connections = 0);

}  // namespace polyscore::proto
