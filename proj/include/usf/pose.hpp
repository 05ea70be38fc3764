#pragma once

#include <vector>

#include "usf/geometry.hpp"
#include "usf/image.hpp"
#include "usf/markers.hpp"

namespace usf {

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool empty() const { return width <= 0 || height <= 0; }
  bool inside(const FrameDims& d) const { return x >= 0 && y >= 0 && x + width <= d.width && y + height <= d.height; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Marker geometry captured at calibration time.
///
/// anchor_offset is expressed in the marker frame: origin at m1, x-axis
/// pointing at m2, one unit equal to the marker separation. us_anchor is a
/// pixel of the *cropped* ultrasound image (by default its top-center, where
/// the probe head touches the chin).
struct CalibrationProfile {
  double ref_marker_distance_px = 100.0;
  Point2d anchor_offset = Point2d::Zero();
  double base_rotation_offset_rad = 0.0;
  PixelRect us_crop;
  Point2d us_anchor = Point2d::Zero();

  /// Throws ConfigInvalid unless ref distance > 0 and the crop is non-empty
  /// (and inside `us_source` when given).
  void validate(const FrameDims* us_source = nullptr) const;
};

struct Pose2D {
  double angle_rad = 0.0;
  double scale = 1.0;
  Point2d anchor_px = Point2d::Zero();
};

using OverlayTransform = SimilarityTransformd;

constexpr double kMinMarkerSeparationPx = 2.0;

Pose2D pose_from_markers(const KeypointPair& kp, const CalibrationProfile& cal);

/// T(p) = anchor + scale * R(angle) * (p - us_anchor)
OverlayTransform overlay_transform(const Pose2D& pose, const CalibrationProfile& cal);

/// One-shot calibration: the current marker geometry becomes the scale-1,
/// angle-0 reference.
CalibrationProfile calibrate_from_markers(const KeypointPair& kp, const FrameDims& us_source,
                                          const Point2d& anchor_offset = Point2d(0.5, 0.25),
                                          std::optional<PixelRect> us_crop = std::nullopt);

enum class Resample { Bilinear, Nearest };

/// A raster warped onto a canvas. alpha is 255 where the canvas pixel maps
/// inside the source extent and 0 elsewhere.
struct Layer {
  ImageFrame image;
  std::vector<std::uint8_t> alpha;

  bool opaque(std::size_t i) const { return alpha[i] != 0; }
};

/// Resamples img onto a canvas through t: every canvas pixel q takes the
/// source value at t^-1(q).
Layer apply_transform(const OverlayTransform& t, const ImageFrame& img, const FrameDims& canvas,
                      Resample mode = Resample::Bilinear);

}  // namespace usf
