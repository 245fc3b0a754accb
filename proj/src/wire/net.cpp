#include "pesao/wire/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>

#include "pesao/wire/message.hpp"

namespace pesao::wire {
namespace {

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

sockaddr_in resolve(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  const std::string h = host.empty() ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw NetworkError("cannot resolve host " + h);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

bool wait_fd(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  while (true) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw NetworkError(errno_text("poll"));
    return rc > 0;
  }
}

}  // namespace

void Fd::reset() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

LineConnection::LineConnection(Fd fd) : fd_(std::move(fd)) {
  int one = 1;
  ::setsockopt(fd_.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

LineConnection LineConnection::connect(const std::string& host, int port,
                                       std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(host, port);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!fd.valid()) throw NetworkError(errno_text("socket"));

  int rc = ::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (rc < 0 && errno != EINPROGRESS) {
    throw NetworkError("connect to " + host + ":" + std::to_string(port) + " failed: " +
                       std::strerror(errno));
  }
  if (rc < 0) {
    if (!wait_fd(fd.get(), POLLOUT, timeout)) {
      throw NetworkError("connect to " + host + ":" + std::to_string(port) + " timed out");
    }
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw NetworkError("connect to " + host + ":" + std::to_string(port) + " failed: " +
                         std::strerror(err));
    }
  }
  const int flags = ::fcntl(fd.get(), F_GETFL);
  ::fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
  return LineConnection(std::move(fd));
}

void LineConnection::write_line(std::string_view line) {
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(fd_.get(), line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetworkError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineConnection::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto nl = buffer_.find('\n', scan_from_);
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      scan_from_ = 0;
      return line;
    }
    scan_from_ = buffer_.size();
    if (buffer_.size() > kMaxLineBytes) throw NetworkError("incoming line exceeds 64 KiB");

    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (!wait_fd(fd_.get(), POLLIN, std::max(remaining, std::chrono::milliseconds(0)))) {
      return std::nullopt;
    }
    std::array<char, 16384> buf{};
    const ssize_t n = ::recv(fd_.get(), buf.data(), buf.size(), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetworkError(errno_text("recv"));
    }
    if (n == 0) throw NetworkError("connection closed by peer");
    buffer_.append(buf.data(), static_cast<std::size_t>(n));
  }
}

void LineConnection::shutdown() {
  if (fd_.valid()) ::shutdown(fd_.get(), SHUT_RDWR);
}

TcpListener::TcpListener(int port) {
  fd_ = Fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd_.valid()) throw NetworkError(errno_text("socket"));
  int one = 1;
  ::setsockopt(fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    throw NetworkError("port " + std::to_string(port) + " in use: " + std::strerror(errno));
  }
  if (::listen(fd_.get(), 16) < 0) throw NetworkError(errno_text("listen"));
  socklen_t len = sizeof addr;
  ::getsockname(fd_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

std::optional<LineConnection> TcpListener::accept(std::chrono::milliseconds timeout) {
  if (!fd_.valid()) throw NetworkError("listener closed");
  if (!wait_fd(fd_.get(), POLLIN, timeout)) return std::nullopt;
  Fd conn(::accept4(fd_.get(), nullptr, nullptr, SOCK_CLOEXEC));
  if (!conn.valid()) throw NetworkError(errno_text("accept"));
  return LineConnection(std::move(conn));
}

UdpSocket UdpSocket::bind(int port, bool broadcast) {
  UdpSocket s;
  s.fd_ = Fd(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!s.fd_.valid()) throw NetworkError(errno_text("socket"));
  int one = 1;
  ::setsockopt(s.fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  ::setsockopt(s.fd_.get(), SOL_SOCKET, SO_REUSEPORT, &one, sizeof one);
  if (broadcast) ::setsockopt(s.fd_.get(), SOL_SOCKET, SO_BROADCAST, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(s.fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    throw NetworkError("udp port " + std::to_string(port) + ": " + std::strerror(errno));
  }
  return s;
}

void UdpSocket::send_to(const std::string& host, int port, std::string_view payload) const {
  if (!try_send_to(host, port, payload)) {
    throw NetworkError("sendto " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  }
}

bool UdpSocket::try_send_to(const std::string& host, int port, std::string_view payload) const {
  const sockaddr_in addr = resolve(host, port);
  const ssize_t n = ::sendto(fd_.get(), payload.data(), payload.size(), 0,
                             reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  return n == static_cast<ssize_t>(payload.size());
}

std::optional<Datagram> UdpSocket::receive(std::chrono::milliseconds timeout) const {
  if (!wait_fd(fd_.get(), POLLIN, timeout)) return std::nullopt;
  std::array<char, 65536> buf{};
  sockaddr_in from{};
  socklen_t len = sizeof from;
  const ssize_t n = ::recvfrom(fd_.get(), buf.data(), buf.size(), 0,
                               reinterpret_cast<sockaddr*>(&from), &len);
  if (n < 0) throw NetworkError(errno_text("recvfrom"));
  std::array<char, INET_ADDRSTRLEN> host{};
  ::inet_ntop(AF_INET, &from.sin_addr, host.data(), host.size());
  return Datagram{std::string(buf.data(), static_cast<std::size_t>(n)), host.data(),
                  ntohs(from.sin_port)};
}

int UdpSocket::port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

}  // namespace pesao::wire
