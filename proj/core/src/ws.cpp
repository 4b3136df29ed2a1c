#include "blindtrack/ws.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <openssl/rand.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <map>
#include <random>

namespace blindtrack::ws {
namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

// Reads up to the blank line that ends an HTTP head.
std::string read_head(int fd) {
  std::string head;
  char c;
  while (head.size() < 8192) {
    const ssize_t n = ::recv(fd, &c, 1, 0);
    if (n <= 0) throw WsError("connection closed during handshake");
    head.push_back(c);
    if (head.size() >= 4 && head.compare(head.size() - 4, 4, "\r\n\r\n") == 0) return head;
  }
  throw WsError("handshake header too large");
}

struct Head {
  std::string start_line;
  std::map<std::string, std::string> fields;
};

Head parse_head(const std::string& text) {
  Head h;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    const std::size_t eol = text.find("\r\n", pos);
    if (eol == std::string::npos || eol == pos) break;
    const std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 2;
    if (first) {
      h.start_line = std::string(line);
      first = false;
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    h.fields[lower(std::string(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  return h;
}

bool has_token(const std::string& value, std::string_view token) {
  const std::string v = lower(value);
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const std::size_t comma = std::min(v.find(',', pos), v.size());
    if (trim(std::string_view(v).substr(pos, comma - pos)) == token) return true;
    pos = comma + 1;
  }
  return false;
}

void send_raw(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw WsError(std::string("send failed: ") + std::strerror(errno));
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::uint32_t random_u32() {
  std::uint32_t v = 0;
  if (RAND_bytes(reinterpret_cast<unsigned char*>(&v), sizeof v) != 1) {
    v = static_cast<std::uint32_t>(std::random_device{}());
  }
  return v;
}

}  // namespace

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string accept_key(std::string_view client_key) {
  const std::string input = std::string(client_key) + std::string(kGuid);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw WsError("sha1 failed");
  }
  return base64_encode(std::string_view(reinterpret_cast<const char*>(digest), len));
}

std::string encode_frame(Opcode op, std::string_view payload, std::optional<std::uint32_t> mask,
                         bool fin) {
  std::string out;
  out.push_back(static_cast<char>((fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::size_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xFF));
  }
  if (!mask) {
    out.append(payload);
    return out;
  }
  const unsigned char key[4] = {static_cast<unsigned char>(*mask >> 24),
                                static_cast<unsigned char>(*mask >> 16),
                                static_cast<unsigned char>(*mask >> 8),
                                static_cast<unsigned char>(*mask)};
  out.append(reinterpret_cast<const char*>(key), 4);
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
  return out;
}

Connection::Connection(int fd, bool client) : fd_(fd), client_(client), mask_state_(random_u32() | 1u) {}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

void Connection::read_exact(char* out, std::size_t n) {
  while (n > 0) {
    const ssize_t got = ::recv(fd_, out, n, 0);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) throw WsError("connection lost");
    out += got;
    n -= static_cast<std::size_t>(got);
  }
}

void Connection::write_all(std::string_view bytes) { send_raw(fd_, bytes); }

Connection::Frame Connection::read_frame() {
  unsigned char hdr[2];
  read_exact(reinterpret_cast<char*>(hdr), 2);
  Frame f;
  f.fin = (hdr[0] & 0x80) != 0;
  if (hdr[0] & 0x70) throw WsError("reserved bits set");
  f.op = static_cast<Opcode>(hdr[0] & 0x0F);
  const bool masked = (hdr[1] & 0x80) != 0;
  if (masked == client_) throw WsError(client_ ? "server frame is masked" : "client frame is not masked");
  std::uint64_t len = hdr[1] & 0x7F;
  if (len == 126) {
    unsigned char b[2];
    read_exact(reinterpret_cast<char*>(b), 2);
    len = (std::uint64_t{b[0]} << 8) | b[1];
  } else if (len == 127) {
    unsigned char b[8];
    read_exact(reinterpret_cast<char*>(b), 8);
    len = 0;
    for (unsigned char x : b) len = (len << 8) | x;
  }
  if (len > kMaxMessage) throw WsError("frame too large");
  unsigned char key[4] = {0, 0, 0, 0};
  if (masked) read_exact(reinterpret_cast<char*>(key), 4);
  f.payload.resize(static_cast<std::size_t>(len));
  if (len > 0) read_exact(f.payload.data(), f.payload.size());
  if (masked) {
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = static_cast<char>(f.payload[i] ^ key[i % 4]);
  }
  return f;
}

void Connection::send(Opcode op, std::string_view payload) {
  std::optional<std::uint32_t> mask;
  if (client_) {
    // xorshift keeps masks varying without a syscall per frame.
    mask_state_ ^= mask_state_ << 13;
    mask_state_ ^= mask_state_ >> 17;
    mask_state_ ^= mask_state_ << 5;
    mask = mask_state_;
  }
  write_all(encode_frame(op, payload, mask));
}

std::optional<std::string> Connection::read_text() {
  if (closed_) return std::nullopt;
  std::string message;
  bool in_message = false;
  for (;;) {
    Frame f = read_frame();
    switch (f.op) {
      case Opcode::kPing:
        send(Opcode::kPong, f.payload);
        continue;
      case Opcode::kPong:
        continue;
      case Opcode::kClose:
        if (!closed_) {
          closed_ = true;
          try {
            send(Opcode::kClose, f.payload.substr(0, 2));
          } catch (const WsError&) {
          }
        }
        return std::nullopt;
      case Opcode::kText:
      case Opcode::kBinary:
        if (in_message) throw WsError("new message inside a fragmented one");
        in_message = true;
        message = std::move(f.payload);
        break;
      case Opcode::kContinuation:
        if (!in_message) throw WsError("continuation without a message");
        message += f.payload;
        break;
      default:
        throw WsError("unknown opcode");
    }
    if (message.size() > kMaxMessage) throw WsError("message too large");
    if (f.fin) return message;
  }
}

void Connection::send_text(std::string_view text) {
  if (closed_) throw WsError("connection closed");
  send(Opcode::kText, text);
}

void Connection::close(std::uint16_t code, std::string_view reason) {
  if (closed_ || fd_ < 0) return;
  std::string payload;
  payload.push_back(static_cast<char>(code >> 8));
  payload.push_back(static_cast<char>(code & 0xFF));
  payload.append(reason.substr(0, 120));
  closed_ = true;
  try {
    send(Opcode::kClose, payload);
    // Wait briefly for the peer's close frame.
    for (int i = 0; i < 16; ++i) {
      if (read_frame().op == Opcode::kClose) break;
    }
  } catch (const WsError&) {
  }
  ::shutdown(fd_, SHUT_RDWR);
}

std::unique_ptr<Connection> accept_upgrade(int fd) {
  const Head h = parse_head(read_head(fd));
  auto field = [&](const char* name) {
    const auto it = h.fields.find(name);
    return it == h.fields.end() ? std::string() : it->second;
  };
  const std::string key = field("sec-websocket-key");
  if (h.start_line.rfind("GET ", 0) != 0 || !has_token(field("upgrade"), "websocket") ||
      !has_token(field("connection"), "upgrade") || key.empty() ||
      field("sec-websocket-version") != "13") {
    const std::string body = "web-socket upgrade required\n";
    send_raw(fd, "HTTP/1.1 400 Bad Request\r\nContent-Type: text/plain\r\nContent-Length: " +
                     std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n" + body);
    throw WsError("not a web-socket upgrade request");
  }
  send_raw(fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
               "Sec-WebSocket-Accept: " + accept_key(key) + "\r\n\r\n");
  return std::make_unique<Connection>(fd, false);
}

std::unique_ptr<Connection> connect(const std::string& host, std::uint16_t port,
                                    const std::string& path) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw WsError("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw WsError("cannot connect to " + host + ":" + std::to_string(port));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

  std::string nonce(16, '\0');
  for (std::size_t i = 0; i < nonce.size(); i += 4) {
    const std::uint32_t r = random_u32();
    std::memcpy(nonce.data() + i, &r, 4);
  }
  const std::string key = base64_encode(nonce);
  try {
    send_raw(fd, "GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                     "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                     "\r\nSec-WebSocket-Version: 13\r\n\r\n");
    const Head h = parse_head(read_head(fd));
    const auto it = h.fields.find("sec-websocket-accept");
    if (h.start_line.find(" 101") == std::string::npos || it == h.fields.end() ||
        it->second != accept_key(key)) {
      throw WsError("handshake rejected: " + h.start_line);
    }
  } catch (...) {
    ::close(fd);
    throw;
  }
  return std::make_unique<Connection>(fd, true);
}

Server::Server(const std::string& host, std::uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw WsError("socket failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw WsError("bad listen address '" + host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw WsError("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Server::~Server() {
  stop();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::run(const Handler& handler) {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (stopping_) break;
      throw WsError(std::string("accept failed: ") + std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    live_.push_back(fd);
    workers_.emplace_back([this, fd, handler] {
      std::unique_ptr<Connection> conn;
      try {
        conn = accept_upgrade(fd);
        handler(*conn);
      } catch (const std::exception&) {
      }
      {
        std::lock_guard l(mu_);
        live_.erase(std::remove(live_.begin(), live_.end(), fd), live_.end());
      }
      if (!conn) ::close(fd);
    });
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  std::lock_guard lock(mu_);
  for (int fd : live_) ::shutdown(fd, SHUT_RDWR);
}

}  // namespace blindtrack::ws
