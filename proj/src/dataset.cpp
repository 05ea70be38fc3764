#include "usf/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "usf/error.hpp"
#include "usf/json_io.hpp"
#include "usf/media_io.hpp"

namespace fs = std::filesystem;

namespace usf {

std::vector<LabeledImage> read_labels(const fs::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + jsonl.string());
  std::vector<LabeledImage> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("file").get<std::string>(),
                     KeypointPair{point_from_json(j.at("m1")), point_from_json(j.at("m2")), 1.0}});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_labels(const fs::path& jsonl, const std::vector<LabeledImage>& labels) {
  std::ofstream out(jsonl);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + jsonl.string());
  for (const auto& l : labels) {
    out << nlohmann::json{{"file", l.file}, {"m1", point_json(l.truth.m1)}, {"m2", point_json(l.truth.m2)}}.dump()
        << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + jsonl.string());
}

AugmentSpec random_augment_spec(std::mt19937_64& rng, const AugmentRanges& r) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> scale(r.scale_min, r.scale_max);
  std::uniform_int_distribution<int> shift(-r.channel_shift, r.channel_shift);
  AugmentSpec s;
  s.rotation_deg = r.rotation_deg * unit(rng);
  s.scale = scale(rng);
  const double tx = r.translation_px * unit(rng);
  const double ty = r.translation_px * unit(rng);
  s.translation = Point2d(tx, ty);
  for (int& c : s.channel_shift) c = shift(rng);
  return s;
}

std::vector<AugmentSpec> parse_augment_specs(const nlohmann::json& j) {
  try {
    if (j.is_array()) return j.get<std::vector<AugmentSpec>>();
    if (j.contains("specs")) return j["specs"].get<std::vector<AugmentSpec>>();
    if (j.contains("random")) {
      const auto& r = j["random"];
      AugmentRanges ranges;
      ranges.rotation_deg = r.value("rotation_deg", ranges.rotation_deg);
      if (r.contains("scale")) {
        ranges.scale_min = r["scale"].at(0).get<double>();
        ranges.scale_max = r["scale"].at(1).get<double>();
      }
      ranges.translation_px = r.value("translation_px", ranges.translation_px);
      ranges.channel_shift = r.value("channel_shift", ranges.channel_shift);
      if (!(ranges.scale_min > 0 && ranges.scale_min <= ranges.scale_max)) {
        throw Error(ErrorCode::ConfigInvalid, "random scale range must satisfy 0 < lo <= hi");
      }
      std::mt19937_64 rng(r.value("seed", std::uint64_t{1}));
      std::vector<AugmentSpec> out(r.value("count", std::size_t{1}));
      for (auto& s : out) s = random_augment_spec(rng, ranges);
      return out;
    }
    return {j.get<AugmentSpec>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("bad augment spec: ") + e.what());
  }
}

AugmentSummary augment_dataset(const fs::path& in_dir, const fs::path& out_dir, const std::vector<AugmentSpec>& specs) {
  const auto labels = read_labels(in_dir / kLabelsFile);
  fs::create_directories(out_dir);
  AugmentSummary summary;
  std::vector<LabeledImage> out_labels;
  for (const auto& l : labels) {
    const KeypointSample sample{read_png(in_dir / l.file), l.truth};
    const std::string stem = fs::path(l.file).stem().string();
    for (std::size_t k = 0; k < specs.size(); ++k) {
      try {
        const KeypointSample aug = augment(sample, specs[k]);
        char name[32];
        std::snprintf(name, sizeof name, "_aug%03zu.png", k);
        const std::string file = stem + name;
        write_png(out_dir / file, aug.image);
        out_labels.push_back({file, aug.truth});
        ++summary.written;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::KeypointOutOfBounds) throw;
        ++summary.skipped;
      }
    }
  }
  write_labels(out_dir / kLabelsFile, out_labels);
  return summary;
}

}  // namespace usf
