#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "usf/markers.hpp"

namespace usf {

inline constexpr const char* kLabelsFile = "labels.jsonl";

/// One line of labels.jsonl: {"file": name, "m1": [x, y], "m2": [x, y]}.
struct LabeledImage {
  std::string file;
  KeypointPair truth;
};

std::vector<LabeledImage> read_labels(const std::filesystem::path& jsonl);
void write_labels(const std::filesystem::path& jsonl, const std::vector<LabeledImage>& labels);

struct AugmentRanges {
  double rotation_deg = 15.0;  // symmetric
  double scale_min = 0.9;
  double scale_max = 1.1;
  double translation_px = 20.0;  // symmetric, per axis
  int channel_shift = 20;        // symmetric, per channel
};

AugmentSpec random_augment_spec(std::mt19937_64& rng, const AugmentRanges& ranges = {});

/// Accepts a list of specs, {"specs": [...]}, or
/// {"random": {"count", "seed", "rotation_deg", "scale": [lo, hi], "translation_px", "channel_shift"}}.
std::vector<AugmentSpec> parse_augment_specs(const nlohmann::json& j);

struct AugmentSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;  // keypoint left the frame
};

/// Applies every spec to every labelled image of `in_dir`, writing
/// `<stem>_aug<k>.png` and a labels.jsonl into `out_dir`.
AugmentSummary augment_dataset(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                               const std::vector<AugmentSpec>& specs);

}  // namespace usf
