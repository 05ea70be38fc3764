#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace usf {

struct FrameDims {
  int width = 0;
  int height = 0;

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x < width && y < height;
  }
  std::size_t area() const { return static_cast<std::size_t>(width) * height; }
  friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

enum class PixelFormat : std::uint8_t { Gray8 = 0, Rgb8 = 1 };

// Wire values match the binary frame protocol; COMPOSITE is only produced by
// the pipeline and never by a source.
enum class StreamId : std::uint8_t { Rgb = 0, Us = 1, Pred = 2, Composite = 3, Ref = 4 };

constexpr int channels(PixelFormat f) { return f == PixelFormat::Rgb8 ? 3 : 1; }

std::string_view to_string(StreamId id);
std::string_view to_string(PixelFormat f);
std::optional<StreamId> parse_stream_id(std::string_view name);
std::optional<PixelFormat> parse_pixel_format(std::string_view name);

using Rgb = std::array<std::uint8_t, 3>;

struct ImageFrame {
  StreamId stream_id = StreamId::Rgb;
  std::int64_t timestamp_us = 0;
  int width = 0;
  int height = 0;
  PixelFormat pixel_format = PixelFormat::Rgb8;
  std::vector<std::uint8_t> payload;

  ImageFrame() = default;
  ImageFrame(StreamId id, std::int64_t ts, int w, int h, PixelFormat fmt, std::uint8_t fill = 0)
      : stream_id(id), timestamp_us(ts), width(w), height(h), pixel_format(fmt),
        payload(static_cast<std::size_t>(w) * h * usf::channels(fmt), fill) {}

  FrameDims dims() const { return {width, height}; }
  int channels() const { return usf::channels(pixel_format); }
  std::size_t stride() const { return static_cast<std::size_t>(width) * channels(); }
  bool valid() const { return payload.size() == static_cast<std::size_t>(width) * height * channels(); }

  std::uint8_t* row(int y) { return payload.data() + y * stride(); }
  const std::uint8_t* row(int y) const { return payload.data() + y * stride(); }
  std::uint8_t* at(int x, int y) { return row(y) + static_cast<std::size_t>(x) * channels(); }
  const std::uint8_t* at(int x, int y) const { return row(y) + static_cast<std::size_t>(x) * channels(); }

  friend bool operator==(const ImageFrame&, const ImageFrame&) = default;
};

/// Bilinear sample of channel `c` at continuous pixel-center coordinates.
/// Returns nullopt when (x, y) falls outside [0, w-1] x [0, h-1].
std::optional<double> sample_bilinear(const ImageFrame& img, double x, double y, int c);

/// Nearest-neighbour counterpart of sample_bilinear.
std::optional<double> sample_nearest(const ImageFrame& img, double x, double y, int c);

/// Copies the rectangle [x, x+w) x [y, y+h); the rectangle must lie inside img.
ImageFrame crop(const ImageFrame& img, int x, int y, int w, int h);

/// Luma conversion (BT.601 integer weights); GRAY8 input is returned as-is.
ImageFrame to_gray(const ImageFrame& img);

void fill_rect(ImageFrame& img, int x, int y, int w, int h, const Rgb& color);

}  // namespace usf
