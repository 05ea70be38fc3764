#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "usf/geometry.hpp"
#include "usf/image.hpp"

namespace usf {

/// The two marker keypoints (upper-left corners of the marker faces), in
/// RGB-frame pixel coordinates. m1 always has the smaller x (ties: smaller y).
struct KeypointPair {
  Point2d m1 = Point2d::Zero();
  Point2d m2 = Point2d::Zero();
  double confidence = 1.0;

  /// Returns the pair with m1/m2 swapped into canonical order.
  KeypointPair canonical() const;
  bool is_canonical() const;
  bool within(const FrameDims& dims) const;
};

/// HSV band (hue in degrees, saturation/value in [0,1]) that marks a pixel
/// as marker-colored, plus blob size filters.
struct ColorBlobConfig {
  double hue_min_deg = 10.0;
  double hue_max_deg = 40.0;
  double sat_min = 0.5;
  double val_min = 0.4;
  int min_blob_area = 30;
  double expected_blob_area = 400.0;
  double ambiguity_ratio = 0.8;
};

struct Hsv {
  double h;  // degrees, [0, 360)
  double s;
  double v;
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Pluggable keypoint detector. Implementations must be deterministic for a
/// fixed frame and configuration.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::string name() const = 0;
  virtual KeypointPair detect(const ImageFrame& frame) const = 0;
};

class ColorBlobDetector final : public DetectorBackend {
 public:
  explicit ColorBlobDetector(ColorBlobConfig config = {}) : config_(config) {}
  std::string name() const override { return "color_blob"; }
  KeypointPair detect(const ImageFrame& frame) const override;
  const ColorBlobConfig& config() const { return config_; }

 private:
  ColorBlobConfig config_;
};

/// Finds the two largest marker-colored blobs and returns their refined
/// upper-left corners. Throws FewerThanTwoBlobs or AmbiguousBlobs.
KeypointPair detect_markers(const ImageFrame& frame, const ColorBlobConfig& config);

std::unique_ptr<DetectorBackend> make_detector(const std::string& backend, const ColorBlobConfig& config);

struct KeypointSample {
  ImageFrame image;
  KeypointPair truth;
};

/// Rotation and scale act about the frame center; translation is applied last.
struct AugmentSpec {
  double rotation_deg = 0.0;
  double scale = 1.0;
  Point2d translation = Point2d::Zero();
  std::array<int, 3> channel_shift{0, 0, 0};

  bool has_channel_shift() const { return channel_shift != std::array<int, 3>{0, 0, 0}; }
};

/// The forward map applied to keypoints for `spec` on a frame of `dims`.
SimilarityTransformd augment_transform(const AugmentSpec& spec, const FrameDims& dims);

/// Warps the image (bilinear, black fill) and maps the truth keypoints by the
/// same transform. Throws KeypointOutOfBounds when a mapped keypoint leaves the frame.
KeypointSample augment(const KeypointSample& sample, const AugmentSpec& spec);

struct MaeReport {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_pair;
};

/// Mean absolute error over the four coordinates of each pair, with x
/// normalised by width and y by height. stddev is the population deviation
/// of the per-pair errors.
MaeReport evaluate_mae(std::span<const KeypointPair> pred, std::span<const KeypointPair> truth,
                       const FrameDims& norm);

}  // namespace usf
