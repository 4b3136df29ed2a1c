#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

/// Minimal RFC 6455 web-socket transport: text messages only, no
/// extensions, no TLS.
namespace blindtrack::ws {

class WsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Opcode : std::uint8_t {
  kContinuation = 0x0,
  kText = 0x1,
  kBinary = 0x2,
  kClose = 0x8,
  kPing = 0x9,
  kPong = 0xA,
};

/// Sec-WebSocket-Accept for a client key.
std::string accept_key(std::string_view client_key);

std::string base64_encode(std::string_view bytes);

/// One complete frame. Clients must mask; servers must not.
std::string encode_frame(Opcode op, std::string_view payload,
                         std::optional<std::uint32_t> mask = std::nullopt, bool fin = true);

/// Largest accepted message, in bytes.
inline constexpr std::size_t kMaxMessage = 1 << 20;

/// An upgraded connection. Not thread-safe; one reader, one writer.
class Connection {
 public:
  Connection(int fd, bool client);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Next text message, or nullopt once the peer closed. Answers pings and
  /// close frames itself. Throws WsError on protocol violations.
  std::optional<std::string> read_text();
  void send_text(std::string_view text);
  void close(std::uint16_t code = 1000, std::string_view reason = {});
  bool open() const { return fd_ >= 0 && !closed_; }

 private:
  struct Frame {
    bool fin = true;
    Opcode op = Opcode::kText;
    std::string payload;
  };
  Frame read_frame();
  void read_exact(char* out, std::size_t n);
  void write_all(std::string_view bytes);
  void send(Opcode op, std::string_view payload);

  int fd_;
  bool client_;
  bool closed_ = false;
  std::string pending_;
  std::uint32_t mask_state_;
};

/// Server side of the opening handshake on an accepted socket. Answers
/// 400 and throws WsError for anything but a web-socket upgrade.
std::unique_ptr<Connection> accept_upgrade(int fd);

/// Connects and performs the client handshake.
std::unique_ptr<Connection> connect(const std::string& host, std::uint16_t port,
                                    const std::string& path = "/");

/// Accept loop; one thread per connection.
class Server {
 public:
  using Handler = std::function<void(Connection&)>;

  /// Binds immediately; port 0 picks a free port.
  Server(const std::string& host, std::uint16_t port);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks until stop().
  void run(const Handler& handler);
  void stop();

 private:
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> live_;
};

}  // namespace blindtrack::ws
