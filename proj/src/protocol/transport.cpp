#include "protocol/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include "common/bytes.hpp"

namespace polyscore::proto {

namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

/// Reads exactly n bytes; returns the count read before end of stream.
std::size_t read_full(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) break;
    if (r < 0) {
      if (errno == EINTR) continue;
      raise(ErrorCode::Protocol, sys_error("receive failed"));
    }
    got += static_cast<std::size_t>(r);
  }
  return got;
}

}  // namespace

void InProcessChannel::send(std::span<const std::uint8_t> frame) {
  for (auto& reply : connection_->handle(frame)) inbox_.push_back(std::move(reply));
}

std::vector<std::uint8_t> InProcessChannel::receive() {
  require(!inbox_.empty(), ErrorCode::Protocol, "connection closed by peer");
  auto f = std::move(inbox_.front());
  inbox_.pop_front();
  return f;
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  require(colon != std::string::npos && colon > 0 && colon + 1 < text.size(), ErrorCode::Config,
          "endpoint must look like host:port, got '" + text + "'");
  Endpoint e;
  e.host = text.substr(0, colon);
  if (e.host.size() >= 2 && e.host.front() == '[' && e.host.back() == ']') e.host = e.host.substr(1, e.host.size() - 2);
  const std::string port = text.substr(colon + 1);
  require(port.find_first_not_of("0123456789") == std::string::npos && port.size() <= 5, ErrorCode::Config,
          "bad port '" + port + "'");
  const unsigned long v = std::stoul(port);
  require(v <= 65535, ErrorCode::Config, "port out of range: " + port);
  e.port = static_cast<std::uint16_t>(v);
  return e;
}

TcpChannel::~TcpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpChannel> TcpChannel::connect(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(endpoint.host.c_str(), std::to_string(endpoint.port).c_str(), &hints, &res);
  require(rc == 0, ErrorCode::Protocol, "cannot resolve " + endpoint.host + ": " + ::gai_strerror(rc));
  int fd = -1;
  std::string last = "no address";
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    last = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  require(fd >= 0, ErrorCode::Protocol,
          "cannot connect to " + endpoint.host + ":" + std::to_string(endpoint.port) + ": " + last);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<TcpChannel>(fd);
}

void TcpChannel::send(std::span<const std::uint8_t> frame) {
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t r = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      raise(ErrorCode::Protocol, sys_error("send failed"));
    }
    sent += static_cast<std::size_t>(r);
  }
}

std::vector<std::uint8_t> TcpChannel::receive() {
  std::vector<std::uint8_t> frame(4);
  const auto head = read_full(fd_, frame.data(), 4);
  require(head != 0, ErrorCode::Protocol, "connection closed by peer");
  require(head == 4, ErrorCode::Protocol, "frame: truncated frame");
  ByteReader r(frame, ErrorCode::Protocol, "frame");
  const auto body = r.u32();
  require(body <= kMaxFrameBytes, ErrorCode::Protocol, "frame: length out of range");
  frame.resize(4 + static_cast<std::size_t>(body));
  const auto got = read_full(fd_, frame.data() + 4, body);
  if (got < body) {
    // Hand the short frame on so the receiver rejects it like any other truncation.
    frame.resize(4 + got);
  }
  return frame;
}

void TcpChannel::shutdown_write() { ::shutdown(fd_, SHUT_WR); }

TcpListener::TcpListener(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(endpoint.host.empty() ? nullptr : endpoint.host.c_str(),
                               std::to_string(endpoint.port).c_str(), &hints, &res);
  require(rc == 0, ErrorCode::Config, "cannot resolve " + endpoint.host + ": " + ::gai_strerror(rc));
  int fd = -1;
  std::string last = "no address";
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 16) == 0) break;
    last = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  require(fd >= 0, ErrorCode::Config,
          "cannot listen on " + endpoint.host + ":" + std::to_string(endpoint.port) + ": " + last);
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  fd_ = fd;
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  const int fd = fd_.exchange(-1);
  if (fd >= 0) {
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
}

std::unique_ptr<TcpChannel> TcpListener::accept() {
  for (;;) {
    const int lfd = fd_.load();
    if (lfd < 0) return nullptr;
    const int fd = ::accept(lfd, nullptr, nullptr);
    if (fd >= 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<TcpChannel>(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    if (fd_.load() < 0) return nullptr;
    raise(ErrorCode::Protocol, sys_error("accept failed"));
  }
}

void serve_connection(Server& server, Channel& channel) {
  auto conn = server.open();
  while (!conn->closed()) {
    std::vector<std::uint8_t> frame;
    try {
      frame = channel.receive();
    } catch (const Error&) {
      return;  // peer went away
    }
    for (const auto& reply : conn->handle(frame)) channel.send(reply);
  }
}

void serve_tcp(Server& server, TcpListener& listener, std::size_t max_connections) {
  std::vector<std::thread> workers;
  std::size_t accepted = 0;
  while (max_connections == 0 || accepted < max_connections) {
    auto channel = listener.accept();
    if (!channel) break;
    ++accepted;
    workers.emplace_back([&server, ch = std::move(channel)]() mutable {
      try {
        serve_connection(server, *ch);
      } catch (const Error&) {
        // The peer vanished mid-reply; the session is simply dropped.
      }
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace polyscore::proto
