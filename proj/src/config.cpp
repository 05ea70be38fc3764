#include "usf/config.hpp"

#include "usf/error.hpp"
#include "usf/json_io.hpp"

namespace fs = std::filesystem;

namespace usf {

std::string to_string(ExtractionMethod m) { return m == ExtractionMethod::TopPixels ? "top" : "skeleton"; }

ExtractionMethod parse_extraction_method(const std::string& s) {
  if (s == "top") return ExtractionMethod::TopPixels;
  if (s == "skeleton") return ExtractionMethod::Skeleton;
  throw Error(ErrorCode::ConfigInvalid, "extraction method must be top or skeleton, got '" + s + "'");
}

void PipelineConfig::validate() const {
  SourceSpec::parse(rgb_source);
  SourceSpec::parse(us_source);
  if (audio_source) SourceSpec::parse(*audio_source);
  if (!weights.valid()) throw Error(ErrorCode::ConfigInvalid, "blend weights must lie in [0, 1]");
  make_detector(detector_backend, color_blob);
  make_segmentation_provider(segmentation.provider);
  if (!(segmentation.threshold > 0.0 && segmentation.threshold < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "segmentation threshold must lie in (0, 1)");
  }
  if (segmentation.max_gap < 0) throw Error(ErrorCode::ConfigInvalid, "max_gap must be >= 0");
  if (tolerance_us <= 0 || stall_timeout_us <= 0) throw Error(ErrorCode::ConfigInvalid, "sync timings must be positive");
  if (source_queue_capacity == 0 || subscriber_queue_capacity == 0) throw Error(ErrorCode::ConfigInvalid, "queue capacities must be positive");
  if (calibration_path && !fs::is_regular_file(*calibration_path)) {
    throw Error(ErrorCode::ConfigInvalid, "calibration file " + calibration_path->string() + " does not exist");
  }
  if (calibration) calibration->validate();
  if (png_compression < 0 || png_compression > 9) throw Error(ErrorCode::ConfigInvalid, "png_compression must be 0..9");
  if (record_outputs.empty()) throw Error(ErrorCode::ConfigInvalid, "record outputs must not be empty");
}

void PipelineConfig::resolve_calibration() {
  if (!calibration_path) return;
  calibration = read_json_file(*calibration_path).get<CalibrationProfile>();
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  j["sources"] = {{"rgb", rgb_source}, {"us", us_source}, {"audio", audio_source ? nlohmann::json(*audio_source) : nlohmann::json()}};
  if (calibration) {
    j["calibration"] = *calibration;
  } else if (calibration_path) {
    j["calibration"] = calibration_path->string();
  } else {
    j["calibration"] = nullptr;
  }
  j["weights"] = weights;
  j["blend_mode"] = blend_mode == BlendMode::Additive ? "additive" : "over";
  j["guideline"] = guideline;
  j["resample"] = resample == Resample::Bilinear ? "bilinear" : "nearest";
  j["detector"] = {{"backend", detector_backend}, {"color_blob", color_blob}};
  j["segmentation"] = {{"provider", segmentation.provider},
                       {"threshold", segmentation.threshold},
                       {"method", to_string(segmentation.method)},
                       {"max_gap", segmentation.max_gap}};
  j["sync"] = {{"tolerance_us", tolerance_us},
               {"stall_timeout_us", stall_timeout_us},
               {"queue_capacity", source_queue_capacity}};
  j["subscriber_queue"] = subscriber_queue_capacity;
  nlohmann::json outputs = nlohmann::json::array();
  for (RecordOutput o : record_outputs) {
    constexpr const char* names[] = {"RGB", "US", "PRED", "COMPOSITE", "CONTOURS", "AUDIO"};
    outputs.push_back(names[static_cast<int>(o)]);
  }
  j["record"] = {{"dir", record_dir ? nlohmann::json(record_dir->string()) : nlohmann::json()},
                 {"outputs", outputs},
                 {"png_compression", png_compression}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  PipelineConfig c;
  auto resolve = [&base_dir](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  auto resolve_source = [&](const std::string& s) {
    SourceSpec spec = SourceSpec::parse(s);
    if (spec.kind == SourceKind::Replay) spec.argument = resolve(spec.argument).string();
    return spec.str();
  };
  try {
    if (j.contains("sources")) {
      const auto& s = j["sources"];
      if (s.contains("rgb")) c.rgb_source = resolve_source(s["rgb"].get<std::string>());
      if (s.contains("us")) c.us_source = resolve_source(s["us"].get<std::string>());
      if (s.contains("audio")) {
        c.audio_source = s["audio"].is_null() ? std::nullopt : std::optional(resolve_source(s["audio"].get<std::string>()));
      }
    }
    if (j.contains("calibration") && !j["calibration"].is_null()) {
      if (j["calibration"].is_string()) {
        c.calibration_path = resolve(j["calibration"].get<std::string>());
      } else {
        c.calibration = j["calibration"].get<CalibrationProfile>();
      }
    }
    if (j.contains("weights")) c.weights = j["weights"].get<BlendWeights>();
    if (j.contains("blend_mode")) {
      const auto m = j["blend_mode"].get<std::string>();
      if (m != "additive" && m != "over") throw Error(ErrorCode::ConfigInvalid, "blend_mode must be additive or over");
      c.blend_mode = m == "additive" ? BlendMode::Additive : BlendMode::SourceOver;
    }
    c.guideline = j.value("guideline", c.guideline);
    if (j.contains("resample")) {
      const auto r = j["resample"].get<std::string>();
      if (r != "bilinear" && r != "nearest") throw Error(ErrorCode::ConfigInvalid, "resample must be bilinear or nearest");
      c.resample = r == "bilinear" ? Resample::Bilinear : Resample::Nearest;
    }
    if (j.contains("detector")) {
      const auto& d = j["detector"];
      c.detector_backend = d.value("backend", c.detector_backend);
      if (d.contains("color_blob")) c.color_blob = d["color_blob"].get<ColorBlobConfig>();
    }
    if (j.contains("segmentation")) {
      const auto& s = j["segmentation"];
      c.segmentation.provider = s.value("provider", c.segmentation.provider);
      c.segmentation.threshold = s.value("threshold", c.segmentation.threshold);
      if (s.contains("method")) c.segmentation.method = parse_extraction_method(s["method"].get<std::string>());
      c.segmentation.max_gap = s.value("max_gap", c.segmentation.max_gap);
    }
    if (j.contains("sync")) {
      const auto& s = j["sync"];
      c.tolerance_us = s.value("tolerance_us", c.tolerance_us);
      c.stall_timeout_us = s.value("stall_timeout_us", c.stall_timeout_us);
      c.source_queue_capacity = s.value("queue_capacity", c.source_queue_capacity);
    }
    c.subscriber_queue_capacity = j.value("subscriber_queue", c.subscriber_queue_capacity);
    if (j.contains("record")) {
      const auto& r = j["record"];
      if (r.contains("dir") && !r["dir"].is_null()) c.record_dir = resolve(r["dir"].get<std::string>());
      if (r.contains("outputs")) {
        c.record_outputs.clear();
        for (const auto& o : r["outputs"]) {
          const auto parsed = parse_record_output(o.get<std::string>());
          if (!parsed) throw Error(ErrorCode::ConfigInvalid, "unknown record output " + o.dump());
          c.record_outputs.insert(*parsed);
        }
      }
      c.png_compression = r.value("png_compression", c.png_compression);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::ConfigInvalid, "config file " + path.string() + " not found");
  return from_json(read_json_file(path), path.parent_path());
}

}  // namespace usf
