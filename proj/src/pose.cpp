#include "usf/pose.hpp"

#include <algorithm>
#include <cmath>

#include "usf/error.hpp"

namespace usf {

void CalibrationProfile::validate(const FrameDims* us_source) const {
  if (!(ref_marker_distance_px > 0.0)) throw Error(ErrorCode::ConfigInvalid, "ref_marker_distance_px must be > 0");
  if (us_crop.empty()) throw Error(ErrorCode::ConfigInvalid, "us_crop must be non-empty");
  if (us_crop.x < 0 || us_crop.y < 0) throw Error(ErrorCode::ConfigInvalid, "us_crop origin must be non-negative");
  if (us_source && !us_crop.inside(*us_source)) {
    throw Error(ErrorCode::ConfigInvalid, "us_crop exceeds the ultrasound source frame");
  }
}

Pose2D pose_from_markers(const KeypointPair& kp, const CalibrationProfile& cal) {
  const Point2d d = kp.m2 - kp.m1;
  const double separation = d.norm();
  if (separation < kMinMarkerSeparationPx) {
    throw Error(ErrorCode::DegenerateMarkers, "marker separation " + std::to_string(separation) + " px");
  }
  Pose2D pose;
  pose.scale = separation / cal.ref_marker_distance_px;
  pose.angle_rad = std::atan2(d.y(), d.x()) + cal.base_rotation_offset_rad;
  pose.anchor_px = kp.m1 + pose.scale * rotation2(pose.angle_rad) * (cal.anchor_offset * cal.ref_marker_distance_px);
  return pose;
}

OverlayTransform overlay_transform(const Pose2D& pose, const CalibrationProfile& cal) {
  return OverlayTransform::anchored(pose.angle_rad, pose.scale, cal.us_anchor, pose.anchor_px);
}

CalibrationProfile calibrate_from_markers(const KeypointPair& kp, const FrameDims& us_source,
                                          const Point2d& anchor_offset, std::optional<PixelRect> us_crop) {
  const KeypointPair c = kp.canonical();
  const Point2d d = c.m2 - c.m1;
  if (d.norm() < kMinMarkerSeparationPx) throw Error(ErrorCode::DegenerateMarkers, "markers too close to calibrate");

  CalibrationProfile cal;
  cal.ref_marker_distance_px = d.norm();
  cal.anchor_offset = anchor_offset;
  // The live pose adds atan2 of the marker axis; cancelling it here makes the
  // calibration frame render the ultrasound upright.
  cal.base_rotation_offset_rad = -std::atan2(d.y(), d.x());
  if (us_crop) {
    cal.us_crop = *us_crop;
  } else {
    // Centered square crop, the format ultrasound frames are usually shown in.
    const int side = std::min(us_source.width, us_source.height);
    cal.us_crop = {(us_source.width - side) / 2, (us_source.height - side) / 2, side, side};
  }
  cal.us_anchor = Point2d((cal.us_crop.width - 1) / 2.0, 0.0);
  cal.validate(&us_source);
  return cal;
}

Layer apply_transform(const OverlayTransform& t, const ImageFrame& img, const FrameDims& canvas, Resample mode) {
  Layer layer;
  layer.image = ImageFrame(img.stream_id, img.timestamp_us, canvas.width, canvas.height, img.pixel_format, 0);
  layer.alpha.assign(canvas.area(), 0);
  if (img.width <= 0 || img.height <= 0) return layer;

  // Only canvas pixels inside the image of the source extent can be opaque.
  const double xmax = img.width - 1.0, ymax = img.height - 1.0;
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const Point2d& corner : {Point2d(0, 0), Point2d(xmax, 0), Point2d(0, ymax), Point2d(xmax, ymax)}) {
    const Point2d q = t(corner);
    lo_x = std::min(lo_x, q.x());
    lo_y = std::min(lo_y, q.y());
    hi_x = std::max(hi_x, q.x());
    hi_y = std::max(hi_y, q.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(lo_x)) - 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(lo_y)) - 1);
  const int x1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(hi_x)) + 1);
  const int y1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(hi_y)) + 1);
  if (x0 > x1 || y0 > y1) return layer;

  const OverlayTransform inv = t.inverse();
  const Eigen::Matrix2d a = inv.linear();
  const Point2d b = inv.translation();
  const int ch = img.channels();
  constexpr double eps = 1e-7;

  for (int y = y0; y <= y1; ++y) {
    double sx = a(0, 0) * x0 + a(0, 1) * y + b.x();
    double sy = a(1, 0) * x0 + a(1, 1) * y + b.y();
    std::uint8_t* out = layer.image.at(std::max(x0, 0), y);
    for (int x = x0; x <= x1; ++x, sx += a(0, 0), sy += a(1, 0), out += ch) {
      if (sx < -eps || sy < -eps || sx > xmax + eps || sy > ymax + eps) continue;
      const double cx = std::clamp(sx, 0.0, xmax);
      const double cy = std::clamp(sy, 0.0, ymax);
      if (mode == Resample::Nearest) {
        const std::uint8_t* p = img.at(static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy)));
        std::copy_n(p, ch, out);
      } else {
        int ix = static_cast<int>(cx), iy = static_cast<int>(cy);
        double fx = cx - ix, fy = cy - iy;
        // Snap sub-epsilon fractions so exact grid hits stay exact.
        if (fx < eps) fx = 0.0;
        if (fy < eps) fy = 0.0;
        if (fx > 1.0 - eps) { fx = 0.0; ++ix; }
        if (fy > 1.0 - eps) { fy = 0.0; ++iy; }
        ix = std::min(ix, img.width - 1);
        iy = std::min(iy, img.height - 1);
        const int jx = std::min(ix + 1, img.width - 1);
        const int jy = std::min(iy + 1, img.height - 1);
        const std::uint8_t* p00 = img.at(ix, iy);
        const std::uint8_t* p10 = img.at(jx, iy);
        const std::uint8_t* p01 = img.at(ix, jy);
        const std::uint8_t* p11 = img.at(jx, jy);
        for (int c = 0; c < ch; ++c) {
          const double top = p00[c] + (p10[c] - p00[c]) * fx;
          const double bot = p01[c] + (p11[c] - p01[c]) * fx;
          out[c] = static_cast<std::uint8_t>(std::lround(top + (bot - top) * fy));
        }
      }
      layer.alpha[static_cast<std::size_t>(y) * canvas.width + x] = 255;
    }
  }
  return layer;
}

}  // namespace usf
