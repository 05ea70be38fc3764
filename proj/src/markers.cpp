#include "usf/markers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "usf/error.hpp"

namespace usf {

KeypointPair KeypointPair::canonical() const {
  const bool swap = m2.x() < m1.x() || (m2.x() == m1.x() && m2.y() < m1.y());
  return swap ? KeypointPair{m2, m1, confidence} : *this;
}

bool KeypointPair::is_canonical() const {
  return m1.x() < m2.x() || (m1.x() == m2.x() && m1.y() <= m2.y());
}

bool KeypointPair::within(const FrameDims& dims) const {
  return dims.contains(m1.x(), m1.y()) && dims.contains(m2.x(), m2.y());
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / d + 2.0);
    } else {
      h = 60.0 * ((r - g) / d + 4.0);
    }
    if (h < 0.0) h += 360.0;
  }
  return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

namespace {

bool hue_in_band(double h, const ColorBlobConfig& c) {
  if (c.hue_min_deg <= c.hue_max_deg) return h >= c.hue_min_deg && h <= c.hue_max_deg;
  return h >= c.hue_min_deg || h <= c.hue_max_deg;  // band wraps through 0 degrees
}

struct Blob {
  int area = 0;
  int min_x = 0;
  int min_y = 0;
  int max_x = 0;
  int max_y = 0;
};

int chroma(const std::uint8_t* p) { return std::max({p[0], p[1], p[2]}) - std::min({p[0], p[1], p[2]}); }

// Fraction of a pixel covered by the marker. Over an achromatic background
// chroma mixes linearly with coverage, unlike saturation.
double coverage(const ImageFrame& frame, int x, int y, double ref_chroma, const ColorBlobConfig& c) {
  const std::uint8_t* p = frame.at(x, y);
  if (!hue_in_band(rgb_to_hsv(p[0], p[1], p[2]).h, c)) return 0.0;
  return std::clamp(chroma(p) / ref_chroma, 0.0, 1.0);
}

// Position of the blob's leading edge along one axis, averaged over the
// interior lines of the other axis. `at(line, k)` reads coverage at offset k
// along the edge axis. A window of pixels [a, b] straddling the edge holds
// b + 1 - corner of marker area.
template <typename At>
double leading_edge(int edge_min, int extent, int line_lo, int line_hi, At at) {
  const int a = std::max(0, edge_min - 2), b = std::min(extent - 1, edge_min + 2);
  double sum = 0.0;
  int lines = 0;
  for (int line = line_lo; line <= line_hi; ++line, ++lines) {
    double cov = 0.0;
    for (int k = a; k <= b; ++k) cov += at(line, k);
    sum += b + 1 - cov;
  }
  return lines ? sum / lines : double(edge_min);
}

Point2d refine_corner(const ImageFrame& frame, const Blob& blob, const ColorBlobConfig& c) {
  // Interior lines avoid the partially covered first and last row/column.
  const int y_lo = blob.min_y + 1, y_hi = blob.max_y - 1;
  const int x_lo = blob.min_x + 1, x_hi = blob.max_x - 1;
  if (y_lo > y_hi || x_lo > x_hi) return {double(blob.min_x), double(blob.min_y)};
  double ref = 0.0;
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) ref = std::max(ref, double(chroma(frame.at(x, y))));
  }
  if (ref <= 0.0) return {double(blob.min_x), double(blob.min_y)};
  Point2d corner(
      leading_edge(blob.min_x, frame.width, y_lo, y_hi, [&](int y, int x) { return coverage(frame, x, y, ref, c); }),
      leading_edge(blob.min_y, frame.height, x_lo, x_hi, [&](int x, int y) { return coverage(frame, x, y, ref, c); }));
  corner.x() = std::clamp(corner.x(), 0.0, frame.width - 1.0);
  corner.y() = std::clamp(corner.y(), 0.0, frame.height - 1.0);
  return corner;
}

std::vector<Blob> label_blobs(const ImageFrame& frame, const ColorBlobConfig& c) {
  const int w = frame.width, h = frame.height;
  std::vector<std::uint8_t> mask(frame.dims().area(), 0);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = frame.row(y);
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* p = row + 3 * x;
      if (p[0] <= p[2]) continue;  // orange-family hues need red above blue
      const Hsv hsv = rgb_to_hsv(p[0], p[1], p[2]);
      if (hsv.s >= c.sat_min && hsv.v >= c.val_min && hue_in_band(hsv.h, c)) {
        mask[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }

  std::vector<Blob> blobs;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t seed = static_cast<std::size_t>(y) * w + x;
      if (!mask[seed]) continue;
      Blob blob{0, x, y, x, y};
      mask[seed] = 0;
      stack.assign(1, static_cast<int>(seed));
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int px = idx % w, py = idx / w;
        ++blob.area;
        blob.min_x = std::min(blob.min_x, px);
        blob.min_y = std::min(blob.min_y, py);
        blob.max_x = std::max(blob.max_x, px);
        blob.max_y = std::max(blob.max_y, py);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = px + dx, ny = py + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
            if (mask[n]) {
              mask[n] = 0;
              stack.push_back(static_cast<int>(n));
            }
          }
        }
      }
      if (blob.area >= c.min_blob_area) blobs.push_back(blob);
    }
  }
  // Stable on ties so the result depends only on the frame.
  std::stable_sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) { return a.area > b.area; });
  return blobs;
}

}  // namespace

KeypointPair detect_markers(const ImageFrame& frame, const ColorBlobConfig& config) {
  if (frame.pixel_format != PixelFormat::Rgb8 || !frame.valid()) {
    throw Error(ErrorCode::InvalidArgument, "marker detection needs a valid RGB8 frame");
  }
  const std::vector<Blob> blobs = label_blobs(frame, config);
  if (blobs.size() < 2) {
    throw Error(ErrorCode::FewerThanTwoBlobs, "found " + std::to_string(blobs.size()) + " marker blob(s)");
  }
  if (blobs.size() > 2 && blobs[2].area >= config.ambiguity_ratio * blobs[1].area) {
    throw Error(ErrorCode::AmbiguousBlobs, "third blob area " + std::to_string(blobs[2].area) +
                                               " too close to second " + std::to_string(blobs[1].area));
  }
  KeypointPair kp;
  kp.m1 = refine_corner(frame, blobs[0], config);
  kp.m2 = refine_corner(frame, blobs[1], config);
  const double smaller = std::min(blobs[0].area, blobs[1].area);
  kp.confidence = config.expected_blob_area > 0.0 ? std::min(smaller / config.expected_blob_area, 1.0) : 1.0;
  return kp.canonical();
}

KeypointPair ColorBlobDetector::detect(const ImageFrame& frame) const { return detect_markers(frame, config_); }

std::unique_ptr<DetectorBackend> make_detector(const std::string& backend, const ColorBlobConfig& config) {
  if (backend == "color_blob") return std::make_unique<ColorBlobDetector>(config);
  throw Error(ErrorCode::ConfigInvalid, "unknown detector backend '" + backend + "'");
}

SimilarityTransformd augment_transform(const AugmentSpec& spec, const FrameDims& dims) {
  const Point2d center((dims.width - 1) / 2.0, (dims.height - 1) / 2.0);
  return SimilarityTransformd::anchored(spec.rotation_deg * EIGEN_PI / 180.0, spec.scale, center,
                                        center + spec.translation);
}

KeypointSample augment(const KeypointSample& sample, const AugmentSpec& spec) {
  if (!(spec.scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "augment scale must be positive");
  const ImageFrame& src = sample.image;
  const FrameDims dims = src.dims();
  const SimilarityTransformd fwd = augment_transform(spec, dims);

  KeypointSample out;
  out.truth = sample.truth;
  out.truth.m1 = fwd(sample.truth.m1);
  out.truth.m2 = fwd(sample.truth.m2);
  if (!out.truth.within(dims)) {
    throw Error(ErrorCode::KeypointOutOfBounds, "augmentation moves a keypoint off-frame");
  }
  out.truth = out.truth.canonical();

  const SimilarityTransformd inv = fwd.inverse();
  const Eigen::Matrix2d a = inv.linear();
  const Point2d t = inv.translation();
  const int ch = src.channels();
  out.image = ImageFrame(src.stream_id, src.timestamp_us, src.width, src.height, src.pixel_format, 0);
  const double xmax = src.width - 1, ymax = src.height - 1;
  for (int y = 0; y < src.height; ++y) {
    std::uint8_t* dst = out.image.row(y);
    for (int x = 0; x < src.width; ++x, dst += ch) {
      const double sx = a(0, 0) * x + a(0, 1) * y + t.x();
      const double sy = a(1, 0) * x + a(1, 1) * y + t.y();
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= xmax && sy <= ymax)) continue;
      // Same arithmetic as sample_bilinear, with the weights shared by all channels.
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      const std::uint8_t *p00 = src.at(x0, y0), *p10 = src.at(x1, y0), *p01 = src.at(x0, y1), *p11 = src.at(x1, y1);
      for (int c = 0; c < ch; ++c) {
        const double top = p00[c] * (1.0 - fx) + p10[c] * fx;
        const double bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
        const double v = top * (1.0 - fy) + bottom * fy;
        const int shift = c < 3 ? spec.channel_shift[c] : 0;
        dst[c] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v) + shift, 0, 255));
      }
    }
  }
  return out;
}

MaeReport evaluate_mae(std::span<const KeypointPair> pred, std::span<const KeypointPair> truth,
                       const FrameDims& norm) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(pred.size()) + " predictions vs " +
                                               std::to_string(truth.size()) + " truths");
  }
  if (norm.width <= 0 || norm.height <= 0) throw Error(ErrorCode::InvalidArgument, "normalisation dims must be positive");
  MaeReport report;
  report.per_pair.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = std::abs(pred[i].m1.x() - truth[i].m1.x()) / norm.width +
                     std::abs(pred[i].m1.y() - truth[i].m1.y()) / norm.height +
                     std::abs(pred[i].m2.x() - truth[i].m2.x()) / norm.width +
                     std::abs(pred[i].m2.y() - truth[i].m2.y()) / norm.height;
    report.per_pair.push_back(e / 4.0);
  }
  if (report.per_pair.empty()) return report;
  const double n = static_cast<double>(report.per_pair.size());
  report.mean = std::accumulate(report.per_pair.begin(), report.per_pair.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : report.per_pair) ss += (e - report.mean) * (e - report.mean);
  report.stddev = std::sqrt(ss / n);
  return report;
}

}  // namespace usf
