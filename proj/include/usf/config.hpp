#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "usf/compositor.hpp"
#include "usf/contour.hpp"
#include "usf/markers.hpp"
#include "usf/pose.hpp"
#include "usf/session.hpp"
#include "usf/sources.hpp"
#include "usf/sync.hpp"

namespace usf {

struct SegmentationConfig {
  std::string provider = "intensity";
  double threshold = 0.5;
  ExtractionMethod method = ExtractionMethod::TopPixels;
  int max_gap = kDefaultMaxGap;
};

struct PipelineConfig {
  std::string rgb_source = "synthetic:seed=1,frames=90";
  std::string us_source = "synthetic:seed=1,frames=90";
  std::optional<std::string> audio_source = "synthetic:seed=1,frames=90";

  /// Either loaded from calibration_path or given inline; when both are
  /// absent the first detected marker pair calibrates the session.
  std::optional<std::filesystem::path> calibration_path;
  std::optional<CalibrationProfile> calibration;

  BlendWeights weights;
  BlendMode blend_mode = BlendMode::Additive;
  bool guideline = true;
  Resample resample = Resample::Bilinear;

  std::string detector_backend = "color_blob";
  ColorBlobConfig color_blob;
  SegmentationConfig segmentation;

  std::int64_t tolerance_us = 16'667;
  std::int64_t stall_timeout_us = 500'000;
  std::size_t source_queue_capacity = 8;
  std::size_t subscriber_queue_capacity = 16;

  std::optional<std::filesystem::path> record_dir;
  RecordOutputs record_outputs = all_record_outputs();
  int png_compression = 1;

  /// Throws ConfigInvalid (bad values, unreadable calibration file).
  void validate() const;

  /// Loads calibration_path into calibration when set.
  void resolve_calibration();

  nlohmann::json to_json() const;
  /// Relative paths inside the file resolve against `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
};

std::string to_string(ExtractionMethod m);
ExtractionMethod parse_extraction_method(const std::string& s);

}  // namespace usf
