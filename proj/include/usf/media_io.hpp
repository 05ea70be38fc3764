#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "usf/image.hpp"
#include "usf/sync.hpp"

namespace usf {

/// Lossless PNG encode of a GRAY8/RGB8 frame. compression_level 0..9; the
/// output is deterministic for a given level.
std::vector<std::uint8_t> encode_png(const ImageFrame& frame, int compression_level = 1);

/// Decodes 8-bit gray or RGB PNG data. Stream id and timestamp are left at
/// their defaults. Throws IoError on malformed or truncated data.
ImageFrame decode_png(std::span<const std::uint8_t> data);

ImageFrame read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageFrame& frame, int compression_level = 1);

/// Canonical 44-byte-header PCM16 mono WAV.
std::vector<std::uint8_t> encode_wav(std::span<const std::int16_t> samples, int sample_rate);

struct WavData {
  int sample_rate = 0;
  std::vector<std::int16_t> samples;
};
WavData decode_wav(std::span<const std::uint8_t> data);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Throws DiskFull when the write comes up short and IoError otherwise.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

std::uint32_t crc32_of(std::span<const std::uint8_t> data);

}  // namespace usf
