#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace usf {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

using Point2d = Point2<double>;

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> rotation2(Scalar angle) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(angle), s = sin(angle);
  Eigen::Matrix<Scalar, 2, 2> r;
  r << c, -s, s, c;
  return r;
}

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  const Scalar two_pi = Scalar(2) * Scalar(EIGEN_PI);
  a = std::fmod(a, two_pi);
  if (a <= -Scalar(EIGEN_PI)) a += two_pi;
  if (a > Scalar(EIGEN_PI)) a -= two_pi;
  return a;
}

/// 2D similarity p -> s * R(theta) * p + t. Scale is kept strictly positive so
/// the transform never reflects or shears.
template <typename Scalar>
class SimilarityTransform {
 public:
  using Point = Point2<Scalar>;
  using Matrix = Eigen::Matrix<Scalar, 2, 2>;

  SimilarityTransform() : rotation_(0), scale_(1), translation_(Point::Zero()) {}
  SimilarityTransform(Scalar rotation, Scalar scale, const Point& translation)
      : rotation_(rotation), scale_(scale), translation_(translation) {}

  static SimilarityTransform identity() { return {}; }

  /// The unique transform with the given rotation and scale that sends `from` onto `to`.
  static SimilarityTransform anchored(Scalar rotation, Scalar scale, const Point& from, const Point& to) {
    return {rotation, scale, to - scale * rotation2(rotation) * from};
  }

  Scalar rotation() const { return rotation_; }
  Scalar scale() const { return scale_; }
  const Point& translation() const { return translation_; }

  Matrix linear() const { return scale_ * rotation2(rotation_); }

  Eigen::Matrix<Scalar, 3, 3> matrix() const {
    Eigen::Matrix<Scalar, 3, 3> m = Eigen::Matrix<Scalar, 3, 3>::Identity();
    m.template topLeftCorner<2, 2>() = linear();
    m.template topRightCorner<2, 1>() = translation_;
    return m;
  }

  Point operator()(const Point& p) const { return linear() * p + translation_; }

  SimilarityTransform inverse() const {
    const Scalar inv_scale = Scalar(1) / scale_;
    return {-rotation_, inv_scale, -(inv_scale * rotation2(-rotation_) * translation_)};
  }

  /// (*this * other)(p) == (*this)(other(p))
  SimilarityTransform operator*(const SimilarityTransform& other) const {
    return {rotation_ + other.rotation_, scale_ * other.scale_, (*this)(other.translation_)};
  }

  template <typename NewScalar>
  SimilarityTransform<NewScalar> cast() const {
    return {static_cast<NewScalar>(rotation_), static_cast<NewScalar>(scale_),
            translation_.template cast<NewScalar>()};
  }

 private:
  Scalar rotation_;
  Scalar scale_;
  Point translation_;
};

using SimilarityTransformd = SimilarityTransform<double>;

}  // namespace usf
