#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "usf/geometry.hpp"
#include "usf/image.hpp"

namespace usf {

/// Row-major (rows = image height) raster of per-pixel tongue probabilities.
template <typename Scalar>
using ProbabilityMap = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using SegmentationMap = ProbabilityMap<double>;
using BinaryMask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline FrameDims dims_of(const SegmentationMap& m) { return {int(m.cols()), int(m.rows())}; }
inline FrameDims dims_of(const BinaryMask& m) { return {int(m.cols()), int(m.rows())}; }

struct TongueContour {
  std::vector<Point2d> points;
  FrameDims source_dims;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

/// Pixel set iff prob >= threshold (inclusive).
template <typename Scalar>
BinaryMask binarize(const ProbabilityMap<Scalar>& map, Scalar threshold) {
  return (map >= threshold).template cast<std::uint8_t>();
}

constexpr int kDefaultMaxGap = 10;

/// Topmost set row of every non-empty column. Runs of columns separated by
/// more than max_gap empty columns are split and only the longest run is kept.
TongueContour extract_top_pixels(const BinaryMask& mask, int max_gap = kDefaultMaxGap);

/// Zhang-Suen two-subiteration thinning, iterated to a fixpoint.
BinaryMask skeletonize(const BinaryMask& mask);

/// Orders the largest 8-connected component of a skeleton along its longest
/// path, starting from the leftmost end.
TongueContour skeleton_contour(const BinaryMask& skeleton);

enum class ContourMetric { Msd, Hausdorff };

/// Symmetric nearest-neighbour distance between the two point sets.
/// Throws EmptyContour when either side is empty.
double contour_distance(const TongueContour& a, const TongueContour& b, ContourMetric metric);

struct ContourStats {
  double msd = 0.0;
  double hausdorff = 0.0;
};
ContourStats contour_stats(const TongueContour& a, const TongueContour& b);

/// Natural cubic spline through x-monotone control points.
class NaturalSpline {
 public:
  explicit NaturalSpline(std::vector<Point2d> knots);
  double operator()(double x) const;
  double x_min() const { return knots_.front().x(); }
  double x_max() const { return knots_.back().x(); }

 private:
  std::vector<Point2d> knots_;
  Eigen::VectorXd second_;  // second derivatives at the knots
};

/// Synthetic tongue band: a bright band whose top edge follows a spline.
struct TongueBandSpec {
  FrameDims dims{128, 128};
  std::vector<Point2d> control_points;
  double band_thickness = 8.0;
  double brightness = 1.0;
  std::uint64_t speckle_seed = 0;
  double noise_level = 0.0;
};

/// Returns the probability map and the analytic top-edge contour. Band pixels
/// are brightness * (1 - noise_level * u) with u ~ U[0, 1) from the seed;
/// everything else is exactly 0.
std::pair<SegmentationMap, TongueContour> generate_segmentation(const TongueBandSpec& spec);

/// Turns a GRAY8 ultrasound crop into a probability map of the same size.
class SegmentationProvider {
 public:
  virtual ~SegmentationProvider() = default;
  virtual std::string name() const = 0;
  virtual SegmentationMap segment(const ImageFrame& crop) const = 0;
};

/// Reference provider: probability = normalised intensity.
class IntensityProvider final : public SegmentationProvider {
 public:
  std::string name() const override { return "intensity"; }
  SegmentationMap segment(const ImageFrame& crop) const override;
};

std::unique_ptr<SegmentationProvider> make_segmentation_provider(const std::string& name);

enum class ExtractionMethod { TopPixels, Skeleton };

TongueContour extract_contour(const BinaryMask& mask, ExtractionMethod method, int max_gap = kDefaultMaxGap);

/// GRAY8 raster with 255 where the mask is set.
ImageFrame mask_to_frame(const BinaryMask& mask, StreamId id, std::int64_t ts);
SegmentationMap frame_to_probability(const ImageFrame& gray);

}  // namespace usf
