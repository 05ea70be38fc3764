#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "usf/image.hpp"

namespace usf {

struct PublishedBundle;

inline constexpr std::uint8_t kWireMagic[2] = {0x55, 0x46};  // "UF"
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderSize = 21;

/// Binary frame message, big-endian:
///   magic[2] version:u8 stream_id:u8 timestamp_us:u64 width:u16 height:u16
///   pixel_format:u8 payload_length:u32 payload
std::vector<std::uint8_t> encode_frame_message(const ImageFrame& frame);

/// Throws ProtocolError on bad magic, version, stream id, pixel format or a
/// payload length that disagrees with the header or the message size.
ImageFrame decode_frame_message(std::span<const std::uint8_t> message);

/// Text event accompanying each published bundle: timestamps, skews,
/// markers, contour and reference metrics.
nlohmann::json bundle_event(const PublishedBundle& bundle);

}  // namespace usf
