#pragma once

#include <optional>

#include "usf/image.hpp"
#include "usf/markers.hpp"
#include "usf/pose.hpp"

namespace usf {

/// Per-layer transparency weights; the defaults are the values used for the
/// live feedback view (RGB 0.9, ultrasound 0.4, prediction 1.0).
struct BlendWeights {
  double rgb = 0.9;
  double us = 0.4;
  double pred = 1.0;

  bool valid() const;
  friend bool operator==(const BlendWeights&, const BlendWeights&) = default;
};

enum class BlendMode {
  Additive,    // out = clamp(w_rgb*rgb + w_us*us + w_pred*pred)
  SourceOver,  // premultiplied "over" stacking, prediction on top
};

struct CompositeOptions {
  BlendMode mode = BlendMode::Additive;
  Rgb pred_color{255, 255, 255};
  Rgb guideline_color{255, 0, 0};
  double guideline_width_px = 2.0;
};

/// Blends the RGB frame with the warped ultrasound and prediction layers.
/// Layers only contribute where their alpha is non-zero; a prediction pixel
/// of value v contributes v/255 of pred_color. When `guideline` holds the
/// marker pair, a segment is drawn between the markers on top.
/// Throws DimsMismatch when the layers are not on the RGB canvas.
ImageFrame composite(const ImageFrame& rgb, const Layer& us, const Layer& pred, const BlendWeights& w,
                     const std::optional<KeypointPair>& guideline, const CompositeOptions& options = {});

void draw_segment(ImageFrame& img, const Point2d& a, const Point2d& b, double width, const Rgb& color);

}  // namespace usf
