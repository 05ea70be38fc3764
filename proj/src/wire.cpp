#include "usf/wire.hpp"

#include "usf/error.hpp"
#include "usf/json_io.hpp"
#include "usf/pipeline.hpp"

namespace usf {

namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | in[at + i];
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_frame_message(const ImageFrame& frame) {
  if (!frame.valid()) throw Error(ErrorCode::InvalidArgument, "cannot encode an invalid frame");
  if (frame.width > 0xffff || frame.height > 0xffff) throw Error(ErrorCode::InvalidArgument, "frame too large for the wire");
  std::vector<std::uint8_t> out;
  out.reserve(kWireHeaderSize + frame.payload.size());
  out.push_back(kWireMagic[0]);
  out.push_back(kWireMagic[1]);
  out.push_back(kWireVersion);
  out.push_back(std::uint8_t(frame.stream_id));
  put_be(out, std::uint64_t(frame.timestamp_us), 8);
  put_be(out, std::uint64_t(frame.width), 2);
  put_be(out, std::uint64_t(frame.height), 2);
  out.push_back(std::uint8_t(frame.pixel_format));
  put_be(out, frame.payload.size(), 4);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

ImageFrame decode_frame_message(std::span<const std::uint8_t> m) {
  if (m.size() < kWireHeaderSize) throw Error(ErrorCode::ProtocolError, "frame message shorter than its header");
  if (m[0] != kWireMagic[0] || m[1] != kWireMagic[1]) throw Error(ErrorCode::ProtocolError, "bad frame magic");
  if (m[2] != kWireVersion) throw Error(ErrorCode::ProtocolError, "unsupported frame version " + std::to_string(m[2]));
  if (m[3] > std::uint8_t(StreamId::Ref)) throw Error(ErrorCode::ProtocolError, "unknown stream id " + std::to_string(m[3]));
  if (m[16] > std::uint8_t(PixelFormat::Rgb8)) throw Error(ErrorCode::ProtocolError, "unknown pixel format " + std::to_string(m[16]));
  const auto stream = StreamId(m[3]);
  const auto ts = std::int64_t(get_be(m, 4, 8));
  const int w = int(get_be(m, 12, 2)), h = int(get_be(m, 14, 2));
  const auto fmt = PixelFormat(m[16]);
  const std::uint64_t len = get_be(m, 17, 4);
  if (len != m.size() - kWireHeaderSize) throw Error(ErrorCode::ProtocolError, "payload length disagrees with message size");
  if (len != std::uint64_t(w) * std::uint64_t(h) * std::uint64_t(channels(fmt))) {
    throw Error(ErrorCode::ProtocolError, "payload length disagrees with width x height x channels");
  }
  ImageFrame f(stream, ts, w, h, fmt);
  std::copy(m.begin() + kWireHeaderSize, m.end(), f.payload.begin());
  return f;
}

nlohmann::json bundle_event(const PublishedBundle& b) {
  nlohmann::json j;
  j["event"] = "bundle";
  j["index"] = b.index;
  j["ts"] = b.timestamp_us;
  j["us_skew_us"] = b.us_skew_us;
  j["audio_skew_us"] = b.audio_skew_us;
  j["us_held"] = b.us_held;
  j["frozen"] = b.frozen;
  j["audio_rms"] = b.audio_rms ? nlohmann::json(*b.audio_rms) : nlohmann::json();
  j["markers"] = b.markers ? nlohmann::json{{"m1", point_json(b.markers->m1)}, {"m2", point_json(b.markers->m2)}}
                           : nlohmann::json();
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : b.contour.points) pts.push_back(point_json(p));
  j["contour"] = pts;
  if (b.reference_selected) {
    j["metrics"] = b.metrics ? nlohmann::json{{"msd", b.metrics->msd}, {"hausdorff", b.metrics->hausdorff}}
                             : nlohmann::json{{"msd", nullptr}, {"hausdorff", nullptr}};
  } else {
    j["metrics"] = nullptr;
  }
  return j;
}

}  // namespace usf
