#include "usf/contour.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

#include "usf/error.hpp"

namespace usf {

TongueContour extract_top_pixels(const BinaryMask& mask, int max_gap) {
  TongueContour all;
  all.source_dims = dims_of(mask);
  for (Eigen::Index x = 0; x < mask.cols(); ++x) {
    for (Eigen::Index y = 0; y < mask.rows(); ++y) {
      if (mask(y, x)) {
        all.points.emplace_back(double(x), double(y));
        break;
      }
    }
  }
  if (all.points.empty()) return all;

  std::size_t best_begin = 0, best_len = 0, begin = 0;
  for (std::size_t i = 1; i <= all.points.size(); ++i) {
    const bool split = i == all.points.size() || all.points[i].x() - all.points[i - 1].x() - 1.0 > max_gap;
    if (!split) continue;
    if (i - begin > best_len) {
      best_begin = begin;
      best_len = i - begin;
    }
    begin = i;
  }
  TongueContour out;
  out.source_dims = all.source_dims;
  out.points.assign(all.points.begin() + best_begin, all.points.begin() + best_begin + best_len);
  return out;
}

namespace {

// Neighbour order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

}  // namespace

BinaryMask skeletonize(const BinaryMask& mask) {
  const int h = int(mask.rows()), w = int(mask.cols());
  // One pixel of zero padding keeps the neighbourhood reads branch-free.
  BinaryMask img = BinaryMask::Zero(h + 2, w + 2);
  img.block(1, 1, h, w) = (mask != 0).cast<std::uint8_t>();

  std::vector<std::pair<int, int>> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      marked.clear();
      for (int y = 1; y <= h; ++y) {
        for (int x = 1; x <= w; ++x) {
          if (!img(y, x)) continue;
          int p[8];
          int b = 0;
          for (int k = 0; k < 8; ++k) {
            p[k] = img(y + kDy[k], x + kDx[k]);
            b += p[k];
          }
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int k = 0; k < 8; ++k) a += (p[k] == 0 && p[(k + 1) % 8] == 1);
          if (a != 1) continue;
          // p[0]=P2 p[2]=P4 p[4]=P6 p[6]=P8
          if (pass == 0) {
            if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
          } else {
            if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
          }
          marked.emplace_back(y, x);
        }
      }
      for (auto [y, x] : marked) img(y, x) = 0;
      changed = changed || !marked.empty();
    }
  }
  return img.block(1, 1, h, w);
}

TongueContour skeleton_contour(const BinaryMask& skeleton) {
  const int h = int(skeleton.rows()), w = int(skeleton.cols());
  TongueContour out;
  out.source_dims = dims_of(skeleton);

  auto idx = [w](int x, int y) { return y * w + x; };
  std::vector<int> component(std::size_t(w) * h, -1);
  std::vector<int> best_members;
  int label = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!skeleton(y, x) || component[idx(x, y)] >= 0) continue;
      std::vector<int> members{idx(x, y)};
      component[idx(x, y)] = label;
      for (std::size_t i = 0; i < members.size(); ++i) {
        const int cx = members[i] % w, cy = members[i] / w;
        for (int k = 0; k < 8; ++k) {
          const int nx = cx + kDx[k], ny = cy + kDy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || !skeleton(ny, nx) || component[idx(nx, ny)] >= 0) continue;
          component[idx(nx, ny)] = label;
          members.push_back(idx(nx, ny));
        }
      }
      if (members.size() > best_members.size()) best_members = std::move(members);
      ++label;
    }
  }
  if (best_members.empty()) return out;

  const int target = component[best_members.front()];
  auto bfs = [&](int start, std::vector<int>& parent) {
    parent.assign(std::size_t(w) * h, -2);
    std::deque<int> queue{start};
    parent[start] = -1;
    int last = start;
    while (!queue.empty()) {
      const int cur = queue.front();
      queue.pop_front();
      last = cur;
      const int cx = cur % w, cy = cur / w;
      for (int k = 0; k < 8; ++k) {
        const int nx = cx + kDx[k], ny = cy + kDy[k];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int n = idx(nx, ny);
        if (component[n] != target || parent[n] != -2) continue;
        parent[n] = cur;
        queue.push_back(n);
      }
    }
    return last;
  };

  std::vector<int> parent;
  const int end_a = bfs(best_members.front(), parent);
  const int end_b = bfs(end_a, parent);
  for (int cur = end_b; cur != -1; cur = parent[cur]) {
    out.points.emplace_back(double(cur % w), double(cur / w));
  }
  if (out.points.size() >= 2 && out.points.front().x() > out.points.back().x()) {
    std::reverse(out.points.begin(), out.points.end());
  }
  return out;
}

namespace {

// Squared distance from p to its nearest neighbour in `sorted` (ordered by x).
double nearest_sq(const Point2d& p, const std::vector<Point2d>& sorted) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), p.x(),
                             [](const Point2d& q, double x) { return q.x() < x; });
  double best = std::numeric_limits<double>::infinity();
  for (auto r = it; r != sorted.end(); ++r) {
    const double dx = r->x() - p.x();
    if (dx * dx >= best) break;
    best = std::min(best, (*r - p).squaredNorm());
  }
  for (auto l = it; l != sorted.begin();) {
    --l;
    const double dx = p.x() - l->x();
    if (dx * dx >= best) break;
    best = std::min(best, (*l - p).squaredNorm());
  }
  return best;
}

std::vector<Point2d> sorted_by_x(const std::vector<Point2d>& pts) {
  std::vector<Point2d> s = pts;
  std::sort(s.begin(), s.end(), [](const Point2d& a, const Point2d& b) { return a.x() < b.x(); });
  return s;
}

}  // namespace

ContourStats contour_stats(const TongueContour& a, const TongueContour& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyContour, "contour distance needs two non-empty contours");
  const std::vector<Point2d> sa = sorted_by_x(a.points), sb = sorted_by_x(b.points);
  double sum = 0.0, hd = 0.0;
  for (const Point2d& p : a.points) {
    const double d = std::sqrt(nearest_sq(p, sb));
    sum += d;
    hd = std::max(hd, d);
  }
  for (const Point2d& p : b.points) {
    const double d = std::sqrt(nearest_sq(p, sa));
    sum += d;
    hd = std::max(hd, d);
  }
  return {sum / double(a.size() + b.size()), hd};
}

double contour_distance(const TongueContour& a, const TongueContour& b, ContourMetric metric) {
  const ContourStats s = contour_stats(a, b);
  return metric == ContourMetric::Msd ? s.msd : s.hausdorff;
}

NaturalSpline::NaturalSpline(std::vector<Point2d> knots) : knots_(std::move(knots)) {
  const int n = int(knots_.size());
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "spline needs at least two knots");
  for (int i = 1; i < n; ++i) {
    if (!(knots_[i].x() > knots_[i - 1].x())) throw Error(ErrorCode::InvalidArgument, "spline knots must be x-monotone");
  }
  second_ = Eigen::VectorXd::Zero(n);
  if (n < 3) return;
  const int m = n - 2;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs(m);
  for (int i = 1; i <= m; ++i) {
    const double h0 = knots_[i].x() - knots_[i - 1].x();
    const double h1 = knots_[i + 1].x() - knots_[i].x();
    a(i - 1, i - 1) = 2.0 * (h0 + h1);
    if (i > 1) a(i - 1, i - 2) = h0;
    if (i < m) a(i - 1, i) = h1;
    rhs(i - 1) = 6.0 * ((knots_[i + 1].y() - knots_[i].y()) / h1 - (knots_[i].y() - knots_[i - 1].y()) / h0);
  }
  second_.segment(1, m) = a.partialPivLu().solve(rhs);
}

double NaturalSpline::operator()(double x) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x, [](double v, const Point2d& k) { return v < k.x(); });
  std::size_t i = it == knots_.begin() ? 0 : std::size_t(it - knots_.begin()) - 1;
  i = std::min(i, knots_.size() - 2);
  const double x0 = knots_[i].x(), x1 = knots_[i + 1].x();
  const double h = x1 - x0;
  const double t0 = (x1 - x) / h, t1 = (x - x0) / h;
  return t0 * knots_[i].y() + t1 * knots_[i + 1].y() +
         ((t0 * t0 * t0 - t0) * second_(i) + (t1 * t1 * t1 - t1) * second_(i + 1)) * h * h / 6.0;
}

std::pair<SegmentationMap, TongueContour> generate_segmentation(const TongueBandSpec& spec) {
  if (spec.control_points.size() < 3) throw Error(ErrorCode::InvalidArgument, "band needs at least three control points");
  if (!(spec.band_thickness > 0.0)) throw Error(ErrorCode::InvalidArgument, "band thickness must be positive");
  if (!(spec.brightness > 0.0 && spec.brightness <= 1.0)) throw Error(ErrorCode::InvalidArgument, "brightness must be in (0, 1]");
  if (!(spec.noise_level >= 0.0 && spec.noise_level <= 1.0)) throw Error(ErrorCode::InvalidArgument, "noise level must be in [0, 1]");
  if (spec.dims.width <= 0 || spec.dims.height <= 0) throw Error(ErrorCode::InvalidArgument, "frame dims must be positive");

  const NaturalSpline top(spec.control_points);
  if (top.x_min() < 0.0 || top.x_max() > spec.dims.width - 1.0) {
    throw Error(ErrorCode::SpecOutOfBounds, "control points leave the frame horizontally");
  }
  const int x_begin = int(std::ceil(top.x_min()));
  const int x_end = int(std::floor(top.x_max()));

  TongueContour truth;
  truth.source_dims = spec.dims;
  for (int x = x_begin; x <= x_end; ++x) {
    const double y = top(x);
    if (y < 0.0 || y + spec.band_thickness > spec.dims.height) {
      throw Error(ErrorCode::SpecOutOfBounds, "band leaves the frame at column " + std::to_string(x));
    }
    truth.points.emplace_back(double(x), y);
  }

  SegmentationMap map = SegmentationMap::Zero(spec.dims.height, spec.dims.width);
  std::mt19937_64 rng(spec.speckle_seed);
  for (const Point2d& p : truth.points) {
    const int x = int(p.x());
    const int y0 = int(std::ceil(p.y()));
    for (int y = y0; y < p.y() + spec.band_thickness; ++y) {
      const double u = double(rng() >> 11) * 0x1.0p-53;
      map(y, x) = spec.brightness * (1.0 - spec.noise_level * u);
    }
  }
  return {std::move(map), std::move(truth)};
}

SegmentationMap frame_to_probability(const ImageFrame& gray) {
  const ImageFrame g = to_gray(gray);
  SegmentationMap map(g.height, g.width);
  for (int y = 0; y < g.height; ++y) {
    const std::uint8_t* row = g.row(y);
    for (int x = 0; x < g.width; ++x) map(y, x) = row[x] / 255.0;
  }
  return map;
}

SegmentationMap IntensityProvider::segment(const ImageFrame& crop) const { return frame_to_probability(crop); }

std::unique_ptr<SegmentationProvider> make_segmentation_provider(const std::string& name) {
  if (name == "intensity") return std::make_unique<IntensityProvider>();
  throw Error(ErrorCode::ConfigInvalid, "unknown segmentation provider '" + name + "'");
}

TongueContour extract_contour(const BinaryMask& mask, ExtractionMethod method, int max_gap) {
  if (method == ExtractionMethod::TopPixels) return extract_top_pixels(mask, max_gap);
  return skeleton_contour(skeletonize(mask));
}

ImageFrame mask_to_frame(const BinaryMask& mask, StreamId id, std::int64_t ts) {
  ImageFrame out(id, ts, int(mask.cols()), int(mask.rows()), PixelFormat::Gray8, 0);
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    std::uint8_t* row = out.row(int(y));
    for (Eigen::Index x = 0; x < mask.cols(); ++x) row[x] = mask(y, x) ? 255 : 0;
  }
  return out;
}

}  // namespace usf
