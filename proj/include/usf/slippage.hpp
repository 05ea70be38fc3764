#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace usf {

/// Tracker reading: translations in millimetres, rotations in degrees.
struct PoseSample6DOF {
  std::int64_t t_us = 0;
  std::array<double, 6> axes{};  // x, y, z, roll, yaw, pitch
};

inline constexpr std::array<const char*, 6> kSlippageAxes{"x", "y", "z", "roll", "yaw", "pitch"};

using SlippageTrial = std::vector<PoseSample6DOF>;

struct AxisStat {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct SlippageReport {
  std::array<AxisStat, 6> axes{};
  std::size_t trial_count = 0;
};

/// Per trial and axis, the largest |value - first value|; aggregated across
/// trials as mean and population standard deviation.
SlippageReport analyze_trials(const std::vector<SlippageTrial>& trials);

struct ConditionTrials {
  std::string condition;  // empty when the CSV has no condition column
  std::vector<SlippageTrial> trials;
};

/// Parses `trial,t_us,x,y,z,roll,yaw,pitch[,condition]` (header required,
/// column order free). Conditions and trials keep first-appearance order.
std::vector<ConditionTrials> read_slippage_csv(std::istream& in);

/// {"std": "population", "conditions": [{"condition", "trials",
///  "translational_mm": {x,y,z}, "rotational_deg": {roll,yaw,pitch}}]}
nlohmann::json slippage_report_json(const std::vector<ConditionTrials>& data);

}  // namespace usf
