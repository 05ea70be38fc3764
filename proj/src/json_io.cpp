#include "usf/json_io.hpp"

#include <fstream>

#include "usf/error.hpp"

namespace usf {

nlohmann::json point_json(const Point2d& p) { return nlohmann::json::array({p.x(), p.y()}); }

Point2d point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::ConfigInvalid, "expected [x, y], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

void to_json(nlohmann::json& j, const PixelRect& r) {
  j = {{"x", r.x}, {"y", r.y}, {"width", r.width}, {"height", r.height}};
}

void from_json(const nlohmann::json& j, PixelRect& r) {
  r.x = j.at("x").get<int>();
  r.y = j.at("y").get<int>();
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
}

void to_json(nlohmann::json& j, const CalibrationProfile& c) {
  j = {{"ref_marker_distance_px", c.ref_marker_distance_px},
       {"anchor_offset", point_json(c.anchor_offset)},
       {"base_rotation_offset_rad", c.base_rotation_offset_rad},
       {"us_crop", c.us_crop},
       {"us_anchor", point_json(c.us_anchor)}};
}

void from_json(const nlohmann::json& j, CalibrationProfile& c) {
  try {
    c.ref_marker_distance_px = j.at("ref_marker_distance_px").get<double>();
    c.anchor_offset = point_from_json(j.at("anchor_offset"));
    c.base_rotation_offset_rad = j.at("base_rotation_offset_rad").get<double>();
    c.us_crop = j.at("us_crop").get<PixelRect>();
    c.us_anchor = point_from_json(j.at("us_anchor"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("calibration profile: ") + e.what());
  }
  c.validate();
}

void to_json(nlohmann::json& j, const ColorBlobConfig& c) {
  j = {{"hue_min_deg", c.hue_min_deg},       {"hue_max_deg", c.hue_max_deg},
       {"sat_min", c.sat_min},               {"val_min", c.val_min},
       {"min_blob_area", c.min_blob_area},   {"expected_blob_area", c.expected_blob_area},
       {"ambiguity_ratio", c.ambiguity_ratio}};
}

void from_json(const nlohmann::json& j, ColorBlobConfig& c) {
  ColorBlobConfig d;
  c.hue_min_deg = j.value("hue_min_deg", d.hue_min_deg);
  c.hue_max_deg = j.value("hue_max_deg", d.hue_max_deg);
  c.sat_min = j.value("sat_min", d.sat_min);
  c.val_min = j.value("val_min", d.val_min);
  c.min_blob_area = j.value("min_blob_area", d.min_blob_area);
  c.expected_blob_area = j.value("expected_blob_area", d.expected_blob_area);
  c.ambiguity_ratio = j.value("ambiguity_ratio", d.ambiguity_ratio);
}

void to_json(nlohmann::json& j, const BlendWeights& w) { j = {{"rgb", w.rgb}, {"us", w.us}, {"pred", w.pred}}; }

void from_json(const nlohmann::json& j, BlendWeights& w) {
  w.rgb = j.at("rgb").get<double>();
  w.us = j.at("us").get<double>();
  w.pred = j.at("pred").get<double>();
}

void to_json(nlohmann::json& j, const AugmentSpec& s) {
  j = {{"rotation_deg", s.rotation_deg},
       {"scale", s.scale},
       {"translation", point_json(s.translation)},
       {"channel_shift", s.channel_shift}};
}

void from_json(const nlohmann::json& j, AugmentSpec& s) {
  AugmentSpec d;
  s.rotation_deg = j.value("rotation_deg", d.rotation_deg);
  s.scale = j.value("scale", d.scale);
  s.translation = j.contains("translation") ? point_from_json(j["translation"]) : d.translation;
  s.channel_shift = j.value("channel_shift", d.channel_shift);
}

nlohmann::json contour_record(std::int64_t frame_index, std::int64_t ts, const TongueContour& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const Point2d& p : c.points) pts.push_back(point_json(p));
  return {{"ts", ts}, {"frame_index", frame_index}, {"points", pts}};
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace usf
