#include "usf/websocket.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <map>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/evp.h>

#include "usf/error.hpp"

namespace usf::ws {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::size_t kMaxHandshake = 16 * 1024;
constexpr std::uint64_t kMaxMessage = 256ull << 20;

std::string base64(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), int(data.size()));
  out.resize(std::size_t(n));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// Reads byte by byte up to the blank line so no frame bytes are consumed.
std::optional<std::string> read_http_head(int fd) {
  std::string head;
  char c;
  while (head.size() < kMaxHandshake) {
    const ssize_t r = ::recv(fd, &c, 1, 0);
    if (r <= 0) return std::nullopt;
    head.push_back(c);
    if (head.size() >= 4 && head.compare(head.size() - 4, 4, "\r\n\r\n") == 0) return head;
  }
  return std::nullopt;
}

struct HttpHead {
  std::string start_line;
  std::map<std::string, std::string> headers;  // lower-case names
};

HttpHead parse_head(const std::string& head) {
  HttpHead h;
  std::size_t pos = head.find("\r\n");
  h.start_line = head.substr(0, pos);
  while (pos != std::string::npos && pos + 2 < head.size()) {
    const std::size_t next = head.find("\r\n", pos + 2);
    const std::string line = head.substr(pos + 2, next - pos - 2);
    const auto colon = line.find(':');
    if (colon != std::string::npos) h.headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
    pos = next;
  }
  return h;
}

bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w <= 0) return false;
    data += w;
    n -= std::size_t(w);
  }
  return true;
}

bool write_all(int fd, std::string_view s) {
  return write_all(fd, reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

}  // namespace

std::string accept_key(std::string_view client_key) {
  const std::string material = std::string(client_key) + std::string(kGuid);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-1 failed");
  }
  return base64({digest, len});
}

std::vector<std::uint8_t> encode_frame(Opcode op, std::span<const std::uint8_t> payload, bool fin,
                                       const std::optional<std::array<std::uint8_t, 4>>& mask) {
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 14);
  out.push_back(std::uint8_t((fin ? 0x80 : 0x00) | std::uint8_t(op)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(std::uint8_t(mask_bit | n));
  } else if (n <= 0xffff) {
    out.push_back(mask_bit | 126);
    out.push_back(std::uint8_t(n >> 8));
    out.push_back(std::uint8_t(n));
  } else {
    out.push_back(mask_bit | 127);
    for (int i = 7; i >= 0; --i) out.push_back(std::uint8_t(n >> (8 * i)));
  }
  if (mask) {
    out.insert(out.end(), mask->begin(), mask->end());
    for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(payload[i] ^ (*mask)[i & 3]);
  } else {
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  const std::string host = colon == std::string::npos ? "" : address.substr(0, colon);
  const std::string port = colon == std::string::npos ? address : address.substr(colon + 1);
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::out_of_range("port");
    return {host == "*" ? "" : host, std::uint16_t(p)};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::ConfigInvalid, "listen address '" + address + "' is not host:port");
  }
}

Connection::Connection(int fd, bool is_client, std::string path) : fd_(fd), is_client_(is_client), path_(std::move(path)) {
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Connection::~Connection() {
  close();
  ::close(fd_);
}

bool Connection::read_exact(std::uint8_t* dst, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd_, dst, n, 0);
    if (r <= 0) return false;
    dst += r;
    n -= std::size_t(r);
  }
  return true;
}

std::optional<Message> Connection::receive() {
  std::optional<Message> partial;
  while (!closed_) {
    std::uint8_t hdr[2];
    if (!read_exact(hdr, 2)) break;
    const bool fin = hdr[0] & 0x80;
    const auto op = Opcode(hdr[0] & 0x0f);
    const bool masked = hdr[1] & 0x80;
    std::uint64_t len = hdr[1] & 0x7f;
    if (len == 126) {
      std::uint8_t b[2];
      if (!read_exact(b, 2)) break;
      len = (std::uint64_t(b[0]) << 8) | b[1];
    } else if (len == 127) {
      std::uint8_t b[8];
      if (!read_exact(b, 8)) break;
      len = 0;
      for (std::uint8_t x : b) len = (len << 8) | x;
    }
    // Clients mask, servers do not.
    if (masked == is_client_ || len > kMaxMessage) {
      close(1002);
      break;
    }
    std::array<std::uint8_t, 4> key{};
    if (masked && !read_exact(key.data(), 4)) break;
    std::vector<std::uint8_t> payload(len);
    if (len && !read_exact(payload.data(), len)) break;
    if (masked) {
      for (std::size_t i = 0; i < payload.size(); ++i) payload[i] ^= key[i & 3];
    }

    switch (op) {
      case Opcode::Ping:
        send(Opcode::Pong, payload);
        continue;
      case Opcode::Pong:
        continue;
      case Opcode::Close:
        close(1000);
        closed_ = true;
        return std::nullopt;
      case Opcode::Text:
      case Opcode::Binary:
        if (partial) {
          close(1002);
          return std::nullopt;
        }
        partial = Message{op, std::move(payload)};
        break;
      case Opcode::Continuation:
        if (!partial) {
          close(1002);
          return std::nullopt;
        }
        partial->data.insert(partial->data.end(), payload.begin(), payload.end());
        break;
      default:
        close(1002);
        return std::nullopt;
    }
    if (fin) return partial;
  }
  closed_ = true;
  return std::nullopt;
}

bool Connection::send(Opcode op, std::span<const std::uint8_t> data) {
  std::lock_guard lock(write_mutex_);
  if (closed_ || close_sent_) return false;
  std::optional<std::array<std::uint8_t, 4>> mask;
  if (is_client_) {
    const std::uint32_t r = mask_rng_();
    mask = std::array<std::uint8_t, 4>{std::uint8_t(r), std::uint8_t(r >> 8), std::uint8_t(r >> 16), std::uint8_t(r >> 24)};
  }
  const auto frame = encode_frame(op, data, true, mask);
  if (!write_all(fd_, frame.data(), frame.size())) {
    closed_ = true;
    return false;
  }
  return true;
}

bool Connection::send_text(std::string_view text) {
  return send(Opcode::Text, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

bool Connection::send_binary(std::span<const std::uint8_t> data) { return send(Opcode::Binary, data); }

void Connection::close(std::uint16_t code) {
  {
    std::lock_guard lock(write_mutex_);
    if (!close_sent_ && !closed_) {
      const std::uint8_t body[2] = {std::uint8_t(code >> 8), std::uint8_t(code)};
      std::optional<std::array<std::uint8_t, 4>> mask;
      if (is_client_) mask = std::array<std::uint8_t, 4>{1, 2, 3, 4};
      const auto frame = encode_frame(Opcode::Close, body, true, mask);
      write_all(fd_, frame.data(), frame.size());
    }
    close_sent_ = true;
  }
  closed_ = true;
  ::shutdown(fd_, SHUT_RDWR);
}

Server::Server(const std::string& host, std::uint16_t port, Handler handler) : handler_(std::move(handler)) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::IoError, "cannot resolve listen host '" + host + "'");
  }
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const bool ok = listen_fd_ >= 0 && ::bind(listen_fd_, res->ai_addr, res->ai_addrlen) == 0 && ::listen(listen_fd_, 16) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    const std::string why = std::strerror(errno);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + port_str + ": " + why);
  }
  sockaddr_in bound{};
  socklen_t blen = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
  port_ = ntohs(bound.sin_port);
  accept_thread_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
  if (stop_.exchange(true)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  ::close(listen_fd_);
  std::list<std::thread> threads;
  {
    std::lock_guard lock(conn_mutex_);
    for (auto& w : connections_) {
      if (auto c = w.lock()) c->close(1001);
    }
    threads.swap(conn_threads_);
  }
  for (auto& t : threads) t.join();
}

void Server::accept_loop() {
  while (!stop_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(conn_mutex_);
    conn_threads_.emplace_back([this, fd] { serve(fd); });
  }
}

void Server::serve(int fd) {
  const auto head = read_http_head(fd);
  if (!head) {
    ::close(fd);
    return;
  }
  const HttpHead h = parse_head(*head);
  const auto key = h.headers.find("sec-websocket-key");
  const auto upgrade = h.headers.find("upgrade");
  const bool is_get = h.start_line.rfind("GET ", 0) == 0;
  if (!is_get || key == h.headers.end() || upgrade == h.headers.end() || lower(upgrade->second) != "websocket") {
    write_all(fd, "HTTP/1.1 426 Upgrade Required\r\nSec-WebSocket-Version: 13\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
    ::close(fd);
    return;
  }
  const auto sp1 = h.start_line.find(' ');
  const auto sp2 = h.start_line.find(' ', sp1 + 1);
  const std::string path = h.start_line.substr(sp1 + 1, sp2 - sp1 - 1);
  const std::string response = "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                               "Sec-WebSocket-Accept: " + accept_key(key->second) + "\r\n\r\n";
  if (!write_all(fd, response)) {
    ::close(fd);
    return;
  }
  auto conn = std::make_shared<Connection>(fd, false, path);
  {
    std::lock_guard lock(conn_mutex_);
    connections_.remove_if([](const std::weak_ptr<Connection>& w) { return w.expired(); });
    connections_.push_back(conn);
    if (stop_) conn->close(1001);
  }
  try {
    handler_(conn);
  } catch (...) {
  }
  conn->close();
}

std::shared_ptr<Connection> connect(const std::string& host, std::uint16_t port, const std::string& path) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string h = host.empty() ? "127.0.0.1" : host;
  if (::getaddrinfo(h.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::IoError, "cannot resolve " + h);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd >= 0) ::close(fd);
    throw Error(ErrorCode::IoError, "cannot connect to " + h + ":" + std::to_string(port));
  }
  std::random_device rd;
  std::array<std::uint8_t, 16> nonce{};
  for (auto& b : nonce) b = std::uint8_t(rd());
  const std::string key = base64(nonce);
  const std::string request = "GET " + path + " HTTP/1.1\r\nHost: " + h + ":" + std::to_string(port) +
                              "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                              "\r\nSec-WebSocket-Version: 13\r\n\r\n";
  if (!write_all(fd, request)) {
    ::close(fd);
    throw Error(ErrorCode::IoError, "handshake write failed");
  }
  const auto head = read_http_head(fd);
  if (!head) {
    ::close(fd);
    throw Error(ErrorCode::ProtocolError, "no handshake response");
  }
  const HttpHead resp = parse_head(*head);
  const auto accept = resp.headers.find("sec-websocket-accept");
  if (resp.start_line.find(" 101 ") == std::string::npos || accept == resp.headers.end() ||
      accept->second != accept_key(key)) {
    ::close(fd);
    throw Error(ErrorCode::ProtocolError, "server refused the upgrade: " + resp.start_line);
  }
  return std::make_shared<Connection>(fd, true, path);
}

}  // namespace usf::ws
