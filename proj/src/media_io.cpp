#include "usf/media_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <png.h>
#include <zlib.h>

#include "usf/error.hpp"

namespace usf {

namespace {

struct PngWriteBuffer {
  std::vector<std::uint8_t>* out;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
  buf->out->insert(buf->out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + length > cur->data.size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cur->data.data() + cur->pos, length);
  cur->pos += length;
}

[[noreturn]] void png_error_throw(png_structp png, png_const_charp msg) {
  // libpng requires error handlers not to return; longjmp back to the caller.
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageFrame& frame, int compression_level) {
  if (!frame.valid() || frame.width <= 0 || frame.height <= 0) throw Error(ErrorCode::InvalidArgument, "cannot encode an empty or inconsistent frame");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_throw, png_warning_ignore);
  if (!png) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  PngWriteBuffer buf{&out};
  std::vector<png_bytep> rows(frame.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encode failed: " + message);
  }
  png_set_write_fn(png, &buf, png_write_to_vector, png_flush_noop);
  png_set_compression_level(png, compression_level);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, compression_level <= 1 ? PNG_FILTER_SUB : PNG_ALL_FILTERS);
  png_set_IHDR(png, info, png_uint_32(frame.width), png_uint_32(frame.height), 8,
               frame.pixel_format == PixelFormat::Rgb8 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
  for (int y = 0; y < frame.height; ++y) rows[y] = const_cast<png_bytep>(frame.row(y));
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

ImageFrame decode_png(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw Error(ErrorCode::IoError, "not a PNG stream");
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_throw, png_warning_ignore);
  if (!png) throw Error(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadCursor cursor{data, 0};
  ImageFrame frame;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "PNG decode failed: " + message);
  }
  png_set_read_fn(png, &cursor, png_read_from_span);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) png_error(png, "unsupported channel count");
  frame = ImageFrame(StreamId::Rgb, 0, int(w), int(h), channels == 3 ? PixelFormat::Rgb8 : PixelFormat::Gray8);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = frame.row(int(y));
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return frame;
}

ImageFrame read_png(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return decode_png(bytes);
}

void write_png(const std::filesystem::path& path, const ImageFrame& frame, int compression_level) {
  write_file(path, encode_png(frame, compression_level));
}

namespace {

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(std::uint8_t(x >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(std::uint8_t(x));
  v.push_back(std::uint8_t(x >> 8));
}
std::uint32_t get_u32(std::span<const std::uint8_t> d, std::size_t at) {
  return std::uint32_t(d[at]) | std::uint32_t(d[at + 1]) << 8 | std::uint32_t(d[at + 2]) << 16 | std::uint32_t(d[at + 3]) << 24;
}
std::uint16_t get_u16(std::span<const std::uint8_t> d, std::size_t at) { return std::uint16_t(d[at] | d[at + 1] << 8); }

}  // namespace

std::vector<std::uint8_t> encode_wav(std::span<const std::int16_t> samples, int sample_rate) {
  const std::uint32_t data_bytes = std::uint32_t(samples.size() * 2);
  std::vector<std::uint8_t> v;
  v.reserve(44 + data_bytes);
  v.insert(v.end(), {'R', 'I', 'F', 'F'});
  put_u32(v, 36 + data_bytes);
  v.insert(v.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(v, 16);
  put_u16(v, 1);  // PCM
  put_u16(v, 1);  // mono
  put_u32(v, std::uint32_t(sample_rate));
  put_u32(v, std::uint32_t(sample_rate) * 2);
  put_u16(v, 2);
  put_u16(v, 16);
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  put_u32(v, data_bytes);
  for (std::int16_t s : samples) put_u16(v, std::uint16_t(s));
  return v;
}

WavData decode_wav(std::span<const std::uint8_t> d) {
  if (d.size() < 12 || std::memcmp(d.data(), "RIFF", 4) != 0 || std::memcmp(d.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::IoError, "not a RIFF/WAVE stream");
  }
  WavData out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= d.size()) {
    const std::uint32_t size = get_u32(d, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > d.size()) throw Error(ErrorCode::IoError, "truncated WAV chunk");
    if (std::memcmp(d.data() + pos, "fmt ", 4) == 0) {
      if (size < 16 || get_u16(d, body) != 1 || get_u16(d, body + 2) != 1 || get_u16(d, body + 14) != 16) {
        throw Error(ErrorCode::IoError, "only mono PCM16 WAV is supported");
      }
      out.sample_rate = int(get_u32(d, body + 4));
      have_fmt = true;
    } else if (std::memcmp(d.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorCode::IoError, "WAV data before fmt");
      out.samples.resize(size / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = std::int16_t(get_u16(d, body + 2 * i));
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw Error(ErrorCode::IoError, "WAV has no data chunk");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"), std::fclose);
  if (!f) throw Error(ErrorCode::IoError, "cannot create " + path.string() + ": " + std::strerror(errno));
  const std::size_t n = std::fwrite(data.data(), 1, data.size(), f.get());
  if (n != data.size() || std::fflush(f.get()) != 0) {
    const int err = errno;
    if (err == ENOSPC || err == EDQUOT) throw Error(ErrorCode::DiskFull, "no space left writing " + path.string());
    throw Error(ErrorCode::IoError, "short write to " + path.string());
  }
}

std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  std::size_t off = 0;
  while (off < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - off, 1u << 30);
    crc = crc32(crc, data.data() + off, uInt(n));
    off += n;
  }
  return std::uint32_t(crc);
}

}  // namespace usf
