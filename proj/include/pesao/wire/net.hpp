#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pesao::wire {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owning POSIX file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = o.release();
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  [[nodiscard]] int get() const { return fd_; }
  [[nodiscard]] bool valid() const { return fd_ >= 0; }
  int release() {
    const int f = fd_;
    fd_ = -1;
    return f;
  }
  void reset();

 private:
  int fd_ = -1;
};

/// Newline-delimited TCP connection. Reads are buffered; writes are whole lines.
class LineConnection {
 public:
  LineConnection() = default;
  explicit LineConnection(Fd fd);

  static LineConnection connect(const std::string& host, int port,
                                std::chrono::milliseconds timeout = std::chrono::seconds(2));

  /// Blocks until the full buffer is written. Throws NetworkError on failure.
  void write_line(std::string_view line_with_newline);

  /// Next line (without newline); nullopt on timeout. Throws NetworkError when
  /// the peer closed the connection or on a line longer than 64 KiB.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);

  /// Unblocks a concurrent reader: both directions are shut down.
  void shutdown();
  [[nodiscard]] bool valid() const { return fd_.valid(); }
  [[nodiscard]] int fd() const { return fd_.get(); }

 private:
  Fd fd_;
  std::string buffer_;
  std::size_t scan_from_ = 0;
};

class TcpListener {
 public:
  /// Binds 0.0.0.0:port; port 0 picks an ephemeral port.
  explicit TcpListener(int port);

  [[nodiscard]] int port() const { return port_; }
  /// Accepts one connection, or nullopt on timeout.
  std::optional<LineConnection> accept(std::chrono::milliseconds timeout);
  void close() { fd_.reset(); }

 private:
  Fd fd_;
  int port_ = 0;
};

struct Datagram {
  std::string payload;
  std::string from_host;
  int from_port = 0;
};

class UdpSocket {
 public:
  /// Binds 0.0.0.0:port with address/port reuse so several devices on one
  /// host can share the discovery port. Port 0 picks an ephemeral port.
  static UdpSocket bind(int port, bool broadcast = false);

  void send_to(const std::string& host, int port, std::string_view payload) const;
  /// Best effort: returns false instead of throwing when the send fails.
  bool try_send_to(const std::string& host, int port, std::string_view payload) const;
  std::optional<Datagram> receive(std::chrono::milliseconds timeout) const;
  [[nodiscard]] int port() const;
  void close() { fd_.reset(); }

 private:
  Fd fd_;
};

}  // namespace pesao::wire
