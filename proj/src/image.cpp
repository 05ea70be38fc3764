#include "usf/image.hpp"

#include <algorithm>
#include <cmath>

#include "usf/error.hpp"

namespace usf {

std::string_view to_string(StreamId id) {
  switch (id) {
    case StreamId::Rgb: return "RGB";
    case StreamId::Us: return "US";
    case StreamId::Pred: return "PRED";
    case StreamId::Composite: return "COMPOSITE";
    case StreamId::Ref: return "REF";
  }
  return "?";
}

std::string_view to_string(PixelFormat f) { return f == PixelFormat::Rgb8 ? "RGB8" : "GRAY8"; }

std::optional<StreamId> parse_stream_id(std::string_view name) {
  for (auto id : {StreamId::Rgb, StreamId::Us, StreamId::Pred, StreamId::Composite, StreamId::Ref}) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

std::optional<PixelFormat> parse_pixel_format(std::string_view name) {
  if (name == "RGB8") return PixelFormat::Rgb8;
  if (name == "GRAY8") return PixelFormat::Gray8;
  return std::nullopt;
}

std::optional<double> sample_bilinear(const ImageFrame& img, double x, double y, int c) {
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width - 1 && y <= img.height - 1)) return std::nullopt;
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0)[c] * (1.0 - fx) + img.at(x1, y0)[c] * fx;
  const double bottom = img.at(x0, y1)[c] * (1.0 - fx) + img.at(x1, y1)[c] * fx;
  return top * (1.0 - fy) + bottom * fy;
}

std::optional<double> sample_nearest(const ImageFrame& img, double x, double y, int c) {
  const long xi = std::lround(x);
  const long yi = std::lround(y);
  if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return std::nullopt;
  return img.at(static_cast<int>(xi), static_cast<int>(yi))[c];
}

ImageFrame crop(const ImageFrame& img, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > img.width || y + h > img.height) {
    throw Error(ErrorCode::InvalidArgument, "crop rectangle outside source");
  }
  ImageFrame out(img.stream_id, img.timestamp_us, w, h, img.pixel_format);
  const std::size_t bytes = static_cast<std::size_t>(w) * img.channels();
  for (int r = 0; r < h; ++r) {
    std::copy_n(img.at(x, y + r), bytes, out.row(r));
  }
  return out;
}

ImageFrame to_gray(const ImageFrame& img) {
  if (img.pixel_format == PixelFormat::Gray8) return img;
  ImageFrame out(img.stream_id, img.timestamp_us, img.width, img.height, PixelFormat::Gray8);
  const std::size_t n = img.dims().area();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = img.payload.data() + 3 * i;
    out.payload[i] = static_cast<std::uint8_t>((77 * p[0] + 150 * p[1] + 29 * p[2] + 128) >> 8);
  }
  return out;
}

void fill_rect(ImageFrame& img, int x, int y, int w, int h, const Rgb& color) {
  const int x0 = std::max(x, 0), y0 = std::max(y, 0);
  const int x1 = std::min(x + w, img.width), y1 = std::min(y + h, img.height);
  for (int r = y0; r < y1; ++r) {
    for (int c = x0; c < x1; ++c) {
      std::uint8_t* p = img.at(c, r);
      if (img.pixel_format == PixelFormat::Rgb8) {
        p[0] = color[0];
        p[1] = color[1];
        p[2] = color[2];
      } else {
        p[0] = color[0];
      }
    }
  }
}

}  // namespace usf
