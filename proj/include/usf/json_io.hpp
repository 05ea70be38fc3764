#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "usf/compositor.hpp"
#include "usf/contour.hpp"
#include "usf/markers.hpp"
#include "usf/pose.hpp"

namespace usf {

void to_json(nlohmann::json& j, const PixelRect& r);
void from_json(const nlohmann::json& j, PixelRect& r);

/// calib.json carries exactly: ref_marker_distance_px, anchor_offset [u, v],
/// base_rotation_offset_rad, us_crop {x, y, width, height}, us_anchor [x, y].
void to_json(nlohmann::json& j, const CalibrationProfile& c);
void from_json(const nlohmann::json& j, CalibrationProfile& c);

void to_json(nlohmann::json& j, const ColorBlobConfig& c);
void from_json(const nlohmann::json& j, ColorBlobConfig& c);

void to_json(nlohmann::json& j, const BlendWeights& w);
void from_json(const nlohmann::json& j, BlendWeights& w);

void to_json(nlohmann::json& j, const AugmentSpec& s);
void from_json(const nlohmann::json& j, AugmentSpec& s);

nlohmann::json point_json(const Point2d& p);
Point2d point_from_json(const nlohmann::json& j);

/// {"ts": .., "frame_index": .., "points": [[x, y], ...]}
nlohmann::json contour_record(std::int64_t frame_index, std::int64_t ts, const TongueContour& c);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace usf
