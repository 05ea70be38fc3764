#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>

#include "usf/pipeline.hpp"
#include "usf/websocket.hpp"

namespace usf {

/// Streams that a client receives unless it asks for a subset with
/// `?streams=COMPOSITE,US` on the request path.
std::set<StreamId> default_client_streams();
std::set<StreamId> parse_stream_query(const std::string& path);

/// Exposes a pipeline over WebSocket: binary frame messages and a JSON
/// bundle event per published bundle go out; JSON control messages and
/// binary frames for stub sources come in.
class Service {
 public:
  Service(Pipeline& pipeline, const std::string& host, std::uint16_t port);
  ~Service();

  std::uint16_t port() const { return server_->port(); }
  void stop();

 private:
  void serve(const std::shared_ptr<ws::Connection>& conn);
  std::string ingest(const ImageFrame& frame);

  Pipeline& pipeline_;
  std::unique_ptr<ws::Server> server_;
};

}  // namespace usf
