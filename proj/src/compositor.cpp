#include "usf/compositor.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "usf/error.hpp"

namespace usf {

bool BlendWeights::valid() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return in_unit(rgb) && in_unit(us) && in_unit(pred);
}

namespace {

void check_layer(const ImageFrame& rgb, const Layer& layer, const char* name) {
  if (layer.image.width != rgb.width || layer.image.height != rgb.height || layer.alpha.size() != rgb.dims().area()) {
    throw Error(ErrorCode::DimsMismatch, std::string(name) + " layer is not on the RGB canvas");
  }
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

ImageFrame composite(const ImageFrame& rgb, const Layer& us, const Layer& pred, const BlendWeights& w,
                     const std::optional<KeypointPair>& guideline, const CompositeOptions& options) {
  if (rgb.pixel_format != PixelFormat::Rgb8 || !rgb.valid()) {
    throw Error(ErrorCode::InvalidArgument, "composite base must be a valid RGB8 frame");
  }
  if (!w.valid()) throw Error(ErrorCode::InvalidArgument, "blend weights must lie in [0, 1]");
  check_layer(rgb, us, "ultrasound");
  check_layer(rgb, pred, "prediction");

  ImageFrame out(StreamId::Composite, rgb.timestamp_us, rgb.width, rgb.height, PixelFormat::Rgb8);
  const std::size_t n = rgb.dims().area();
  const int us_ch = us.image.channels();
  const int pred_ch = pred.image.channels();
  const std::uint8_t* src = rgb.payload.data();
  std::uint8_t* dst = out.payload.data();

  if (options.mode == BlendMode::Additive) {
    // Per-term tables built with the same expressions as the general path,
    // so the sums (and therefore the rounded bytes) are identical.
    std::array<double, 256> rgb_term, us_term;
    std::array<std::array<double, 256>, 3> pred_term;
    std::array<std::uint8_t, 256> rgb_only;
    for (int v = 0; v < 256; ++v) {
      rgb_term[v] = w.rgb * v;
      us_term[v] = w.us * double(v);
      rgb_only[v] = to_byte(rgb_term[v]);
      for (int c = 0; c < 3; ++c) pred_term[c][v] = w.pred * (v / 255.0) * options.pred_color[c];
    }
    for (std::size_t i = 0; i < n; ++i, src += 3, dst += 3) {
      const bool has_us = us.alpha[i] != 0;
      const bool has_pred = pred.alpha[i] != 0;
      if (!has_us && !has_pred) {
        dst[0] = rgb_only[src[0]];
        dst[1] = rgb_only[src[1]];
        dst[2] = rgb_only[src[2]];
        continue;
      }
      const std::uint8_t* u = us.image.payload.data() + i * us_ch;
      const std::uint8_t* pp = pred.image.payload.data() + i * pred_ch;
      const std::uint8_t pv = has_pred ? (pred_ch == 1 ? pp[0] : *std::max_element(pp, pp + pred_ch)) : 0;
      for (int c = 0; c < 3; ++c) {
        double v = rgb_term[src[c]];
        if (has_us) v += us_term[u[us_ch == 3 ? c : 0]];
        if (has_pred) v += pred_term[c][pv];
        dst[c] = to_byte(v);
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i, src += 3, dst += 3) {
      const bool has_us = us.alpha[i] != 0;
      const bool has_pred = pred.alpha[i] != 0;
      const std::uint8_t* u = us.image.payload.data() + i * us_ch;
      const std::uint8_t* pp = pred.image.payload.data() + i * pred_ch;
      // Probability-valued prediction maps take the brightest channel as coverage.
      const double pv = has_pred ? (pred_ch == 1 ? pp[0] : *std::max_element(pp, pp + pred_ch)) / 255.0 : 0.0;
      for (int c = 0; c < 3; ++c) {
        double v = w.rgb * src[c];
        if (has_us) v = w.us * u[us_ch == 3 ? c : 0] + v * (1.0 - w.us);
        if (has_pred) {
          const double a = w.pred * pv;
          v = a * options.pred_color[c] + v * (1.0 - a);
        }
        dst[c] = to_byte(v);
      }
    }
  }

  if (guideline) {
    draw_segment(out, guideline->m1, guideline->m2, options.guideline_width_px, options.guideline_color);
  }
  return out;
}

void draw_segment(ImageFrame& img, const Point2d& a, const Point2d& b, double width, const Rgb& color) {
  const double r = width / 2.0;
  const int x0 = std::max(0, int(std::floor(std::min(a.x(), b.x()) - r)));
  const int y0 = std::max(0, int(std::floor(std::min(a.y(), b.y()) - r)));
  const int x1 = std::min(img.width - 1, int(std::ceil(std::max(a.x(), b.x()) + r)));
  const int y1 = std::min(img.height - 1, int(std::ceil(std::max(a.y(), b.y()) + r)));
  const Point2d d = b - a;
  const double len2 = d.squaredNorm();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Point2d p(x, y);
      const double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
      if ((p - (a + t * d)).norm() > r) continue;
      std::uint8_t* px = img.at(x, y);
      if (img.pixel_format == PixelFormat::Rgb8) {
        px[0] = color[0];
        px[1] = color[1];
        px[2] = color[2];
      } else {
        px[0] = color[0];
      }
    }
  }
}

}  // namespace usf
