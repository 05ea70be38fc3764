#include "usf/slippage.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

#include "usf/error.hpp"

namespace usf {

SlippageReport analyze_trials(const std::vector<SlippageTrial>& trials) {
  if (trials.empty()) throw Error(ErrorCode::EmptyTrial, "no trials");
  std::vector<std::array<double, 6>> maxima;
  maxima.reserve(trials.size());
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const SlippageTrial& trial = trials[t];
    if (trial.size() < 2) throw Error(ErrorCode::EmptyTrial, "trial " + std::to_string(t) + " has fewer than two samples");
    std::array<double, 6> m{};
    for (const PoseSample6DOF& s : trial) {
      for (int a = 0; a < 6; ++a) m[a] = std::max(m[a], std::abs(s.axes[a] - trial.front().axes[a]));
    }
    maxima.push_back(m);
  }
  SlippageReport report;
  report.trial_count = trials.size();
  const double n = double(trials.size());
  for (int a = 0; a < 6; ++a) {
    double sum = 0.0;
    for (const auto& m : maxima) sum += m[a];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& m : maxima) ss += (m[a] - mean) * (m[a] - mean);
    report.axes[a] = {mean, std::sqrt(ss / n)};
  }
  return report;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

std::vector<ConditionTrials> read_slippage_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "empty slippage CSV");
  const std::vector<std::string> header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"trial", "t_us", "x", "y", "z", "roll", "yaw", "pitch"}) {
    if (!col.count(required)) throw Error(ErrorCode::InvalidArgument, std::string("CSV missing column '") + required + "'");
  }
  const bool has_condition = col.count("condition") > 0;

  std::vector<ConditionTrials> out;
  std::map<std::string, std::size_t> condition_index;
  std::map<std::pair<std::string, std::string>, std::size_t> trial_index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() < header.size()) {
      throw Error(ErrorCode::InvalidArgument, "CSV line " + std::to_string(line_no) + " has too few columns");
    }
    const std::string condition = has_condition ? cells[col["condition"]] : "";
    auto [cit, new_condition] = condition_index.try_emplace(condition, out.size());
    if (new_condition) out.push_back({condition, {}});
    ConditionTrials& group = out[cit->second];

    auto [tit, new_trial] = trial_index.try_emplace({condition, cells[col["trial"]]}, group.trials.size());
    if (new_trial) group.trials.emplace_back();
    SlippageTrial& trial = group.trials[tit->second];

    PoseSample6DOF s;
    try {
      s.t_us = std::stoll(cells[col["t_us"]]);
      for (int a = 0; a < 6; ++a) s.axes[a] = std::stod(cells[col[kSlippageAxes[a]]]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "CSV line " + std::to_string(line_no) + " has a non-numeric field");
    }
    if (!trial.empty() && s.t_us <= trial.back().t_us) {
      throw Error(ErrorCode::InvalidArgument, "CSV line " + std::to_string(line_no) + ": t_us not increasing within trial");
    }
    trial.push_back(s);
  }
  return out;
}

nlohmann::json slippage_report_json(const std::vector<ConditionTrials>& data) {
  nlohmann::json conditions = nlohmann::json::array();
  for (const ConditionTrials& group : data) {
    const SlippageReport r = analyze_trials(group.trials);
    nlohmann::json trans, rot;
    for (int a = 0; a < 6; ++a) {
      nlohmann::json stat = {{"mean", r.axes[a].mean}, {"std", r.axes[a].stddev}};
      (a < 3 ? trans : rot)[kSlippageAxes[a]] = stat;
    }
    conditions.push_back({{"condition", group.condition},
                          {"trials", r.trial_count},
                          {"translational_mm", trans},
                          {"rotational_deg", rot}});
  }
  return {{"std", "population"}, {"deviation", "max |value - first sample| per trial"}, {"conditions", conditions}};
}

}  // namespace usf
