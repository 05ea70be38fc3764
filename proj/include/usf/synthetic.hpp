#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>

#include "usf/contour.hpp"
#include "usf/markers.hpp"
#include "usf/sync.hpp"

namespace usf {

inline constexpr Rgb kMarkerOrange{255, 140, 0};
inline constexpr Rgb kBackgroundGray{128, 128, 128};

/// `key=value,key=value` parameters of a synthetic source. Unknown keys are
/// rejected with ConfigInvalid.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  int fps = 30;
  std::int64_t frames = 90;  // 0 = unbounded
  int width = 0;             // 0 = per-stream default
  int height = 0;
  std::int64_t offset_us = 0;  // added to every timestamp
  double noise = 0.1;          // tongue speckle level
  double shift_y = 0.0;        // vertical offset of the tongue band
  double motion = 1.0;         // 0 freezes the scene
  double curve = 1.0;          // tongue shape amplitude; 0 gives a flat band
  int sample_rate = 16000;
  bool pace = false;  // sleep so frames appear at their timestamps

  static SyntheticSpec parse(const std::string& text);
};

/// Solid squares of `size` px whose upper-left pixels sit at the given
/// (integer) positions, on a flat background.
ImageFrame render_marker_frame(const FrameDims& dims, const std::vector<Point2d>& corners, int size = 20,
                               Rgb marker = kMarkerOrange, Rgb background = kBackgroundGray);

/// Same, but with a continuous corner position rendered with area coverage
/// (anti-aliased edges).
ImageFrame render_marker_frame_subpixel(const FrameDims& dims, const std::vector<Point2d>& corners, double size = 20.0,
                                        Rgb marker = kMarkerOrange, Rgb background = kBackgroundGray);

struct RgbSceneFrame {
  ImageFrame frame;
  KeypointPair truth;
};

/// Face-side camera scene: textured low-saturation background with the two
/// orange markers drifting and tilting over time.
class RgbScene {
 public:
  explicit RgbScene(const SyntheticSpec& spec);
  RgbSceneFrame render(std::int64_t index) const;
  FrameDims dims() const { return dims_; }

 private:
  SyntheticSpec spec_;
  FrameDims dims_;
  ImageFrame background_;
};

struct UsSceneFrame {
  ImageFrame frame;
  TongueContour truth;
};

/// Ultrasound scene: speckle background with a bright tongue band whose
/// shape oscillates over time.
class UsScene {
 public:
  explicit UsScene(const SyntheticSpec& spec);
  UsSceneFrame render(std::int64_t index) const;
  TongueBandSpec band_spec(std::int64_t index) const;
  FrameDims dims() const { return dims_; }

 private:
  SyntheticSpec spec_;
  FrameDims dims_;
};

AudioChunk synthetic_audio_chunk(const SyntheticSpec& spec, std::int64_t index);

class SyntheticFrameSource final : public FrameSource {
 public:
  SyntheticFrameSource(StreamId stream, const SyntheticSpec& spec);
  std::optional<ImageFrame> next() override;
  std::string describe() const override;

 private:
  StreamId stream_;
  SyntheticSpec spec_;
  std::unique_ptr<RgbScene> rgb_;
  std::unique_ptr<UsScene> us_;
  std::int64_t index_ = 0;
  std::int64_t started_ns_ = -1;
};

class SyntheticAudioSource final : public AudioSource {
 public:
  explicit SyntheticAudioSource(const SyntheticSpec& spec) : spec_(spec) {}
  std::optional<AudioChunk> next() override;
  std::string describe() const override { return "synthetic audio"; }

 private:
  SyntheticSpec spec_;
  std::int64_t index_ = 0;
};

}  // namespace usf
