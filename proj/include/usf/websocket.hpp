#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace usf::ws {

enum class Opcode : std::uint8_t { Continuation = 0, Text = 1, Binary = 2, Close = 8, Ping = 9, Pong = 10 };

struct Message {
  Opcode opcode = Opcode::Text;
  std::vector<std::uint8_t> data;

  std::string text() const { return {data.begin(), data.end()}; }
};

/// Sec-WebSocket-Accept for a client key: base64(SHA-1(key + GUID)).
std::string accept_key(std::string_view client_key);

/// One frame; clients must pass a masking key, servers must not.
std::vector<std::uint8_t> encode_frame(Opcode op, std::span<const std::uint8_t> payload, bool fin = true,
                                       const std::optional<std::array<std::uint8_t, 4>>& mask = std::nullopt);

/// Splits "host:port" (host may be empty or "*" for all interfaces).
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

/// An upgraded connection. Reads happen on one thread; writes are
/// serialised and may come from any thread.
class Connection {
 public:
  Connection(int fd, bool is_client, std::string path);
  ~Connection();

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Next complete data message. Answers pings and close frames itself and
  /// returns nullopt once the peer has gone.
  std::optional<Message> receive();
  bool send_text(std::string_view text);
  bool send_binary(std::span<const std::uint8_t> data);
  void close(std::uint16_t code = 1000);
  bool open() const { return !closed_; }
  /// Request target of the handshake, for instance "/?streams=COMPOSITE".
  const std::string& path() const { return path_; }

 private:
  bool send(Opcode op, std::span<const std::uint8_t> data);
  bool read_exact(std::uint8_t* dst, std::size_t n);

  int fd_;
  bool is_client_;
  std::string path_;
  std::mutex write_mutex_;
  std::mt19937 mask_rng_{0x5eed};
  std::atomic<bool> closed_{false};
  std::atomic<bool> close_sent_{false};
};

/// Accepts connections, performs the upgrade and runs `handler` on a thread
/// per connection.
class Server {
 public:
  using Handler = std::function<void(std::shared_ptr<Connection>)>;

  /// Port 0 picks an ephemeral port. Throws IoError when binding fails.
  Server(const std::string& host, std::uint16_t port, Handler handler);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve(int fd);

  Handler handler_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread accept_thread_;
  std::mutex conn_mutex_;
  std::list<std::thread> conn_threads_;
  std::list<std::weak_ptr<Connection>> connections_;
};

/// Client side of the handshake. Throws IoError / ProtocolError.
std::shared_ptr<Connection> connect(const std::string& host, std::uint16_t port, const std::string& path = "/");

}  // namespace usf::ws
