#include "usf/service.hpp"

#include <sstream>
#include <thread>

#include "usf/error.hpp"
#include "usf/wire.hpp"

namespace usf {

std::set<StreamId> default_client_streams() {
  return {StreamId::Rgb, StreamId::Us, StreamId::Pred, StreamId::Composite, StreamId::Ref};
}

std::set<StreamId> parse_stream_query(const std::string& path) {
  const auto q = path.find("streams=");
  if (q == std::string::npos) return default_client_streams();
  std::string list = path.substr(q + 8);
  list = list.substr(0, list.find('&'));
  std::set<StreamId> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (auto id = parse_stream_id(item)) out.insert(*id);
  }
  return out;
}

Service::Service(Pipeline& pipeline, const std::string& host, std::uint16_t port) : pipeline_(pipeline) {
  server_ = std::make_unique<ws::Server>(host, port, [this](std::shared_ptr<ws::Connection> c) { serve(c); });
}

Service::~Service() { stop(); }

void Service::stop() {
  if (server_) server_->stop();
}

std::string Service::ingest(const ImageFrame& frame) {
  const auto& cfg = pipeline_.config();
  const std::string& spec = frame.stream_id == StreamId::Rgb ? cfg.rgb_source : cfg.us_source;
  if (frame.stream_id != StreamId::Rgb && frame.stream_id != StreamId::Us) {
    return "only RGB and US frames can be pushed";
  }
  const SourceSpec parsed = SourceSpec::parse(spec);
  if (parsed.kind != SourceKind::Stub) return std::string(to_string(frame.stream_id)) + " source is not a stub";
  pipeline_.stubs()->frames(parsed.argument)->push(frame);
  return {};
}

void Service::serve(const std::shared_ptr<ws::Connection>& conn) {
  const std::set<StreamId> wanted = parse_stream_query(conn->path());
  auto sub = pipeline_.subscribe();

  std::thread writer([&] {
    while (conn->open()) {
      auto ev = sub->next(std::chrono::milliseconds(100));
      if (!ev) {
        if (sub->closed()) break;
        continue;
      }
      if (!ev->bundle) {
        conn->send_text(ev->status.dump());
        continue;
      }
      const PublishedBundle& b = *ev->bundle;
      auto send_frame = [&](StreamId id, const ImageFrame& f) {
        if (!wanted.count(id) || !f.valid()) return;
        ImageFrame tagged = f;
        tagged.stream_id = id;
        conn->send_binary(encode_frame_message(tagged));
      };
      send_frame(StreamId::Composite, b.composite);
      send_frame(StreamId::Rgb, b.rgb);
      send_frame(StreamId::Us, b.us);
      send_frame(StreamId::Pred, b.pred);
      if (b.ref) send_frame(StreamId::Ref, *b.ref);
      conn->send_text(bundle_event(b).dump());
    }
  });

  while (auto msg = conn->receive()) {
    if (msg->opcode == ws::Opcode::Text) {
      nlohmann::json reply;
      try {
        reply = pipeline_.control(nlohmann::json::parse(msg->text()));
      } catch (const nlohmann::json::exception& e) {
        reply = {{"re", nullptr}, {"ok", false}, {"error", to_string(ErrorCode::ProtocolError)}, {"message", e.what()}};
      }
      conn->send_text(reply.dump());
    } else {
      std::string problem;
      try {
        problem = ingest(decode_frame_message(msg->data));
      } catch (const Error& e) {
        problem = e.what();
      }
      if (!problem.empty()) {
        conn->send_text(nlohmann::json{{"event", "error"}, {"error", to_string(ErrorCode::ProtocolError)}, {"message", problem}}.dump());
      }
    }
  }
  conn->close();
  writer.join();
  pipeline_.unsubscribe(sub);
}

}  // namespace usf
