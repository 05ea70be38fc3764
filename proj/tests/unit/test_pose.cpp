#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "usf/error.hpp"
#include "usf/pose.hpp"

using namespace usf;

namespace {

CalibrationProfile plain_cal(double ref) {
  CalibrationProfile c;
  c.ref_marker_distance_px = ref;
  c.us_crop = {0, 0, 64, 64};
  return c;
}

KeypointPair pair(double x1, double y1, double x2, double y2) { return {Point2d(x1, y1), Point2d(x2, y2), 1.0}; }

}  // namespace

TEST_CASE("pose_from_markers axis-aligned identity") {
  const Pose2D p = pose_from_markers(pair(100, 100, 200, 100), plain_cal(100));
  CHECK(p.scale == doctest::Approx(1.0));
  CHECK(p.angle_rad == doctest::Approx(0.0));
  CHECK(p.anchor_px.x() == doctest::Approx(100));
  CHECK(p.anchor_px.y() == doctest::Approx(100));
}

TEST_CASE("pose_from_markers on a 3-4-5 triangle") {
  const Pose2D p = pose_from_markers(pair(0, 0, 60, 80), plain_cal(50));
  CHECK(p.scale == doctest::Approx(2.0));
  CHECK(p.angle_rad == doctest::Approx(0.927295218).epsilon(1e-9));
}

TEST_CASE("pose_from_markers rejects markers closer than 2 px") {
  try {
    pose_from_markers(pair(100, 100, 100, 101), plain_cal(100));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateMarkers);
  }
}

TEST_CASE("anchor offset is expressed in marker units") {
  CalibrationProfile c = plain_cal(100);
  c.anchor_offset = Point2d(0.5, 0.25);
  // Rotated 90 degrees, scale 2: the offset (50, 25) px at scale 1 becomes (-50, 100).
  const Pose2D p = pose_from_markers(pair(100, 100, 100, 300), c);
  CHECK(p.scale == doctest::Approx(2.0));
  CHECK(p.anchor_px.x() == doctest::Approx(50));
  CHECK(p.anchor_px.y() == doctest::Approx(200));
}

TEST_CASE("overlay_transform maps us_anchor onto the pose anchor") {
  CalibrationProfile c = plain_cal(100);
  c.us_anchor = Point2d(0, 0);
  const OverlayTransform t = overlay_transform(Pose2D{0.0, 2.0, Point2d(10, 10)}, c);
  const Point2d q = t(Point2d(5, 0));
  CHECK(q.x() == doctest::Approx(20));
  CHECK(q.y() == doctest::Approx(10));

  c.us_anchor = Point2d(32, 0);
  const OverlayTransform i = overlay_transform(Pose2D{0.0, 1.0, Point2d(32, 0)}, c);
  CHECK((i(Point2d(7, 9)) - Point2d(7, 9)).norm() < 1e-12);
}

TEST_CASE("similarity inverse round trip") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 100; ++k) {
    const SimilarityTransformd t(u(rng), std::exp(u(rng) / 3), Point2d(u(rng) * 100, u(rng) * 100));
    const Point2d p(u(rng) * 50, u(rng) * 50);
    CHECK(((t * t.inverse())(p) - p).norm() < 1e-9);
    CHECK((t.inverse()(t(p)) - p).norm() < 1e-9);
  }
}

TEST_CASE("pose is equivariant under rotation, scale and translation of the markers") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  CalibrationProfile c = plain_cal(80);
  c.anchor_offset = Point2d(0.4, 0.3);
  c.base_rotation_offset_rad = 0.1;
  for (int k = 0; k < 100; ++k) {
    const KeypointPair kp = pair(200 + 50 * u(rng), 200 + 50 * u(rng), 320 + 50 * u(rng), 210 + 50 * u(rng));
    const double a = u(rng), s = 1.0 + 0.5 * u(rng);
    const oracle::P d{30 * u(rng), 30 * u(rng)};
    auto move = [&](const Point2d& p) {
      const oracle::P q = oracle::rotate_about({p.x(), p.y()}, {0, 0}, a * 180 / EIGEN_PI, s, d);
      return Point2d(q.x, q.y);
    };
    const Pose2D p0 = pose_from_markers(kp, c);
    const Pose2D p1 = pose_from_markers({move(kp.m1), move(kp.m2), 1}, c);
    CHECK(p1.scale == doctest::Approx(p0.scale * s).epsilon(1e-9));
    CHECK(std::abs(wrap_angle(p1.angle_rad - p0.angle_rad - a)) < 1e-9);
    CHECK((p1.anchor_px - move(p0.anchor_px)).norm() < 1e-9);
  }
}

TEST_CASE("apply_transform identity is byte-equal") {
  ImageFrame img(StreamId::Us, 0, 7, 5, PixelFormat::Gray8);
  for (std::size_t i = 0; i < img.payload.size(); ++i) img.payload[i] = std::uint8_t(i * 13);
  for (Resample m : {Resample::Bilinear, Resample::Nearest}) {
    const Layer l = apply_transform(OverlayTransform::identity(), img, img.dims(), m);
    CHECK(l.image.payload == img.payload);
    for (auto a : l.alpha) CHECK(a == 255);
  }
}

TEST_CASE("apply_transform scale 2 keeps checkerboard corners") {
  ImageFrame img(StreamId::Us, 0, 2, 2, PixelFormat::Gray8);
  img.payload = {0, 255, 255, 0};
  // Pixel centres (0,0) and (1,1) land on (0,0) and (2,2) at scale 2.
  const Layer l = apply_transform(SimilarityTransformd(0, 2, Point2d::Zero()), img, {4, 4});
  CHECK(l.image.at(0, 0)[0] == 0);
  CHECK(l.image.at(2, 0)[0] == 255);
  CHECK(l.image.at(0, 2)[0] == 255);
  CHECK(l.image.at(2, 2)[0] == 0);
  CHECK(l.alpha[3] == 0);
}

TEST_CASE("apply_transform rotates a 3x3 pattern by 90 degrees") {
  ImageFrame img(StreamId::Us, 0, 3, 3, PixelFormat::Gray8);
  for (int i = 0; i < 9; ++i) img.payload[i] = std::uint8_t(10 * (i + 1));
  const auto t = SimilarityTransformd::anchored(EIGEN_PI / 2, 1.0, Point2d(1, 1), Point2d(1, 1));
  const Layer l = apply_transform(t, img, {3, 3});
  // Source (x, y) goes to (2 - y, x) about the centre pixel.
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) CHECK(l.image.at(2 - y, x)[0] == img.at(x, y)[0]);
  }
}

TEST_CASE("calibrate_from_markers yields scale 1 and angle 0 for the same markers") {
  const KeypointPair kp = pair(100, 200, 220, 230);
  const CalibrationProfile c = calibrate_from_markers(kp, {256, 256});
  c.validate();
  const Pose2D p = pose_from_markers(kp, c);
  CHECK(p.scale == doctest::Approx(1.0));
  CHECK(std::abs(p.angle_rad) < 1e-12);
}

TEST_CASE("CalibrationProfile validation") {
  CalibrationProfile c = plain_cal(0);
  CHECK_THROWS_AS(c.validate(), Error);
  c = plain_cal(10);
  c.us_crop = {200, 0, 100, 100};
  const FrameDims src{256, 256};
  CHECK_THROWS_AS(c.validate(&src), Error);
}
