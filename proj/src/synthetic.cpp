#include "usf/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "usf/error.hpp"

namespace usf {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash4(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return mix(mix(mix(mix(a) ^ b) ^ c) ^ d);
}

double phase_of(std::uint64_t seed, int k) { return double(mix(seed * 31 + k) % 6283) / 1000.0; }

std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

SyntheticSpec SyntheticSpec::parse(const std::string& text) {
  SyntheticSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "synthetic spec item '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    try {
      if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "fps") spec.fps = std::stoi(value);
      else if (key == "frames") spec.frames = std::stoll(value);
      else if (key == "width") spec.width = std::stoi(value);
      else if (key == "height") spec.height = std::stoi(value);
      else if (key == "offset_us") spec.offset_us = std::stoll(value);
      else if (key == "noise") spec.noise = std::stod(value);
      else if (key == "shift_y") spec.shift_y = std::stod(value);
      else if (key == "motion") spec.motion = std::stod(value);
      else if (key == "curve") spec.curve = std::stod(value);
      else if (key == "sample_rate") spec.sample_rate = std::stoi(value);
      else if (key == "pace") spec.pace = value == "1" || value == "true";
      else throw Error(ErrorCode::ConfigInvalid, "unknown synthetic spec key '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ConfigInvalid, "bad value for synthetic spec key '" + key + "'");
    }
  }
  if (spec.fps <= 0 || spec.frames < 0 || spec.width < 0 || spec.height < 0 || spec.sample_rate <= 0) {
    throw Error(ErrorCode::ConfigInvalid, "synthetic spec values out of range");
  }
  return spec;
}

ImageFrame render_marker_frame(const FrameDims& dims, const std::vector<Point2d>& corners, int size, Rgb marker,
                               Rgb background) {
  ImageFrame img(StreamId::Rgb, 0, dims.width, dims.height, PixelFormat::Rgb8);
  fill_rect(img, 0, 0, dims.width, dims.height, background);
  for (const Point2d& c : corners) {
    fill_rect(img, int(std::lround(c.x())), int(std::lround(c.y())), size, size, marker);
  }
  return img;
}

ImageFrame render_marker_frame_subpixel(const FrameDims& dims, const std::vector<Point2d>& corners, double size,
                                        Rgb marker, Rgb background) {
  ImageFrame img(StreamId::Rgb, 0, dims.width, dims.height, PixelFormat::Rgb8);
  fill_rect(img, 0, 0, dims.width, dims.height, background);
  // Pixel (i, j) covers [i - 0.5, i + 0.5]; a corner at integer c makes pixel c
  // the first fully covered one.
  auto overlap = [](double lo, double hi, int i) {
    return std::max(0.0, std::min(hi, i + 0.5) - std::max(lo, i - 0.5));
  };
  for (const Point2d& c : corners) {
    const double lx = c.x() - 0.5, ly = c.y() - 0.5, hx = lx + size, hy = ly + size;
    for (int y = std::max(0, int(std::floor(ly))); y <= std::min(dims.height - 1, int(std::ceil(hy))); ++y) {
      for (int x = std::max(0, int(std::floor(lx))); x <= std::min(dims.width - 1, int(std::ceil(hx))); ++x) {
        const double a = overlap(lx, hx, x) * overlap(ly, hy, y);
        if (a <= 0.0) continue;
        std::uint8_t* p = img.at(x, y);
        for (int k = 0; k < 3; ++k) p[k] = std::uint8_t(std::lround(a * marker[k] + (1.0 - a) * p[k]));
      }
    }
  }
  return img;
}

RgbScene::RgbScene(const SyntheticSpec& spec)
    : spec_(spec), dims_{spec.width ? spec.width : 640, spec.height ? spec.height : 480} {
  background_ = ImageFrame(StreamId::Rgb, 0, dims_.width, dims_.height, PixelFormat::Rgb8);
  const double cx = dims_.width * 0.45, cy = dims_.height * 0.4;
  const double rx = dims_.width * 0.3, ry = dims_.height * 0.35;
  for (int y = 0; y < dims_.height; ++y) {
    for (int x = 0; x < dims_.width; ++x) {
      const int noise = int(hash4(spec_.seed, x, y, 0) % 13) - 6;
      const int g = 90 + 80 * y / std::max(1, dims_.height - 1) + noise;
      std::uint8_t* p = background_.at(x, y);
      const double ex = (x - cx) / rx, ey = (y - cy) / ry;
      if (ex * ex + ey * ey <= 1.0) {
        // Low-saturation skin tone: hue sits in the marker band but
        // saturation stays well below the detector threshold.
        p[0] = std::uint8_t(std::clamp(175 + noise, 0, 255));
        p[1] = std::uint8_t(std::clamp(150 + noise, 0, 255));
        p[2] = std::uint8_t(std::clamp(135 + noise, 0, 255));
      } else {
        p[0] = p[1] = p[2] = std::uint8_t(std::clamp(g, 0, 255));
      }
    }
  }
}

RgbSceneFrame RgbScene::render(std::int64_t index) const {
  const double t = spec_.motion * double(frame_timestamp_us(index, spec_.fps)) / 1e6;
  const double w = dims_.width, h = dims_.height;
  const double sep = 0.19 * w;
  const Point2d m1(0.39 * w + 0.03 * w * std::sin(2.1 * t + phase_of(spec_.seed, 0)),
                   0.62 * h + 0.025 * h * std::sin(1.3 * t + phase_of(spec_.seed, 1)));
  const double tilt = 0.12 * std::sin(0.9 * t + phase_of(spec_.seed, 2));
  const Point2d m2 = m1 + sep * Point2d(std::cos(tilt), std::sin(tilt));

  RgbSceneFrame out;
  out.frame = background_;
  out.frame.timestamp_us = frame_timestamp_us(index, spec_.fps) + spec_.offset_us;
  const Point2d c1(std::round(m1.x()), std::round(m1.y())), c2(std::round(m2.x()), std::round(m2.y()));
  const int size = std::max(4, int(std::lround(w / 32.0)));
  fill_rect(out.frame, int(c1.x()), int(c1.y()), size, size, kMarkerOrange);
  fill_rect(out.frame, int(c2.x()), int(c2.y()), size, size, kMarkerOrange);
  out.truth = KeypointPair{c1, c2, 1.0}.canonical();
  return out;
}

UsScene::UsScene(const SyntheticSpec& spec) : spec_(spec), dims_{spec.width ? spec.width : 256, spec.height ? spec.height : 256} {}

TongueBandSpec UsScene::band_spec(std::int64_t index) const {
  const double t = spec_.motion * double(frame_timestamp_us(index, spec_.fps)) / 1e6;
  const double w = dims_.width, h = dims_.height;
  constexpr double base[5] = {0.55, 0.41, 0.37, 0.43, 0.58};
  constexpr double mid = 0.468;
  TongueBandSpec band;
  band.dims = dims_;
  for (int k = 0; k < 5; ++k) {
    const double x = (0.12 + 0.19 * k) * (w - 1);
    const double wobble = 0.06 * h * std::sin(5.2 * t + 0.9 * k + phase_of(spec_.seed, 10));
    const double y = mid * h + spec_.curve * ((base[k] - mid) * h + wobble) + spec_.shift_y;
    band.control_points.emplace_back(std::round(x), y);
  }
  band.band_thickness = std::max(3.0, 0.04 * h);
  band.brightness = 0.92;
  band.noise_level = spec_.noise;
  band.speckle_seed = hash4(spec_.seed, std::uint64_t(index), 0x75, 0);
  return band;
}

UsSceneFrame UsScene::render(std::int64_t index) const {
  const TongueBandSpec band = band_spec(index);
  auto [map, truth] = generate_segmentation(band);
  UsSceneFrame out;
  out.frame = ImageFrame(StreamId::Us, frame_timestamp_us(index, spec_.fps) + spec_.offset_us, dims_.width,
                         dims_.height, PixelFormat::Gray8);
  for (int y = 0; y < dims_.height; ++y) {
    std::uint8_t* row = out.frame.row(y);
    const int depth_fade = 40 - 25 * y / std::max(1, dims_.height - 1);
    for (int x = 0; x < dims_.width; ++x) {
      const int bg = int(hash4(spec_.seed, x, y, std::uint64_t(index) + 1) % std::uint64_t(depth_fade + 1));
      const int band_value = int(std::lround(255.0 * map(y, x)));
      row[x] = std::uint8_t(std::max(bg, band_value));
    }
  }
  out.truth = std::move(truth);
  return out;
}

AudioChunk synthetic_audio_chunk(const SyntheticSpec& spec, std::int64_t index) {
  const std::int64_t rate = spec.sample_rate;
  const std::int64_t s0 = index * rate / spec.fps, s1 = (index + 1) * rate / spec.fps;
  AudioChunk chunk;
  chunk.sample_rate_hz = spec.sample_rate;
  chunk.timestamp_us = s0 * 1'000'000 / rate + spec.offset_us;
  chunk.samples.reserve(std::size_t(s1 - s0));
  for (std::int64_t s = s0; s < s1; ++s) {
    const double t = double(s) / double(rate);
    const double envelope = 0.5 + 0.5 * std::sin(2.0 * EIGEN_PI * 0.5 * t);
    const double v = 8000.0 * envelope * std::sin(2.0 * EIGEN_PI * 220.0 * t);
    const int dither = int(hash4(spec.seed, std::uint64_t(s), 0xa0, 0) % 65) - 32;
    chunk.samples.push_back(std::int16_t(std::lround(v) + dither));
  }
  return chunk;
}

SyntheticFrameSource::SyntheticFrameSource(StreamId stream, const SyntheticSpec& spec) : stream_(stream), spec_(spec) {
  if (stream == StreamId::Rgb) {
    rgb_ = std::make_unique<RgbScene>(spec);
  } else if (stream == StreamId::Us || stream == StreamId::Ref) {
    us_ = std::make_unique<UsScene>(spec);
  } else {
    throw Error(ErrorCode::ConfigInvalid, "synthetic sources exist only for RGB, US and REF");
  }
}

std::optional<ImageFrame> SyntheticFrameSource::next() {
  if (spec_.frames > 0 && index_ >= spec_.frames) return std::nullopt;
  ImageFrame f = rgb_ ? rgb_->render(index_).frame : us_->render(index_).frame;
  f.stream_id = stream_;
  if (spec_.pace) {
    if (started_ns_ < 0) started_ns_ = steady_now_ns();
    const std::int64_t due = started_ns_ + (f.timestamp_us - spec_.offset_us) * 1000;
    const std::int64_t now = steady_now_ns();
    if (due > now) std::this_thread::sleep_for(std::chrono::nanoseconds(due - now));
  }
  ++index_;
  return f;
}

std::string SyntheticFrameSource::describe() const { return "synthetic " + std::string(to_string(stream_)); }

std::optional<AudioChunk> SyntheticAudioSource::next() {
  if (spec_.frames > 0 && index_ >= spec_.frames) return std::nullopt;
  return synthetic_audio_chunk(spec_, index_++);
}

}  // namespace usf
