#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "usf/error.hpp"
#include "usf/slippage.hpp"

using namespace usf;

namespace {

// A trial whose samples rise linearly from `base` to base + peak on every
// axis (scaled per axis), then fall back.
SlippageTrial ramp(const std::array<double, 6>& base, const std::array<double, 6>& peak, int n = 9,
                   std::int64_t t0 = 0) {
  SlippageTrial t;
  for (int i = 0; i < n; ++i) {
    const double f = 1.0 - std::abs(i - (n - 1) / 2.0) / ((n - 1) / 2.0);
    PoseSample6DOF s;
    s.t_us = t0 + i * 10'000;
    for (int a = 0; a < 6; ++a) s.axes[a] = base[a] + f * peak[a];
    t.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("constant trials give zero slippage") {
  const SlippageReport r = analyze_trials({ramp({1, 2, 3, 4, 5, 6}, {}), ramp({0, 0, 0, 0, 0, 0}, {})});
  for (const auto& a : r.axes) {
    CHECK(a.mean == 0.0);
    CHECK(a.stddev == 0.0);
  }
  CHECK(r.trial_count == 2);
}

TEST_CASE("a single x ramp to 4.7 mm") {
  SlippageTrial t;
  for (int i = 0; i <= 47; ++i) t.push_back({i * 1000, {i * 0.1, 0, 0, 0, 0, 0}});
  const SlippageReport r = analyze_trials({t});
  CHECK(r.axes[0].mean == doctest::Approx(4.7).epsilon(1e-12));
  CHECK(r.axes[0].stddev == 0.0);
}

TEST_CASE("ten crafted trials match a brute-force recomputation") {
  std::vector<SlippageTrial> trials;
  std::array<std::vector<double>, 6> maxima;
  for (int k = 0; k < 10; ++k) {
    std::array<double, 6> peak;
    for (int a = 0; a < 6; ++a) {
      peak[a] = 1.0 + 0.37 * a + 0.11 * ((k * (a + 3)) % 7);
      maxima[a].push_back(peak[a]);
    }
    trials.push_back(ramp({10.0 * k, -3, 2, 0.5, 1, -1}, peak));
  }
  const SlippageReport r = analyze_trials(trials);
  for (int a = 0; a < 6; ++a) {
    CHECK(r.axes[a].mean == doctest::Approx(oracle::mean(maxima[a])).epsilon(1e-12));
    CHECK(r.axes[a].stddev == doctest::Approx(oracle::population_std(maxima[a])).epsilon(1e-12));
  }
}

TEST_CASE("report ignores trial order, time shifts and constant offsets") {
  std::vector<SlippageTrial> trials;
  for (int k = 0; k < 5; ++k) trials.push_back(ramp({0, 0, 0, 0, 0, 0}, {1.0 + k, 2, 0.5 * k, 1, 1, 3}));
  const SlippageReport base = analyze_trials(trials);

  std::vector<SlippageTrial> moved(trials.rbegin(), trials.rend());
  for (auto& t : moved)
    for (auto& s : t) {
      s.t_us += 777'000;
      s.axes[2] += 12.5;
    }
  const SlippageReport r = analyze_trials(moved);
  for (int a = 0; a < 6; ++a) {
    CHECK(r.axes[a].mean == doctest::Approx(base.axes[a].mean).epsilon(1e-12));
    CHECK(r.axes[a].stddev == doctest::Approx(base.axes[a].stddev).epsilon(1e-12));
  }
}

TEST_CASE("empty or one-sample trials are rejected") {
  CHECK_THROWS_AS(analyze_trials({}), Error);
  try {
    analyze_trials({SlippageTrial{{0, {}}}});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTrial);
  }
}

TEST_CASE("CSV with conditions yields one row per condition") {
  std::stringstream csv;
  csv << "condition,trial,t_us,x,y,z,roll,yaw,pitch\n";
  for (const char* cond : {"loose", "tight"}) {
    for (int k = 0; k < 2; ++k) {
      const double peak = std::string(cond) == "loose" ? 4.0 + k : 3.0 + k;
      csv << cond << ',' << k << ",0,0,0,0,0,0,0\n";
      csv << cond << ',' << k << ",10," << peak << ",0,0,0,0,0\n";
      csv << cond << ',' << k << ",20,0,0,0,0,0," << peak << "\n";
    }
  }
  const auto data = read_slippage_csv(csv);
  REQUIRE(data.size() == 2);
  CHECK(data[0].condition == "loose");
  CHECK(data[1].trials.size() == 2);
  const auto j = slippage_report_json(data);
  CHECK(j["std"] == "population");
  const auto& loose = j["conditions"][0];
  CHECK(loose["trials"] == 2);
  CHECK(loose["translational_mm"]["x"]["mean"].get<double>() == doctest::Approx(4.5));
  CHECK(loose["translational_mm"]["x"]["std"].get<double>() == doctest::Approx(0.5));
  CHECK(loose["rotational_deg"]["pitch"]["mean"].get<double>() == doctest::Approx(4.5));
  CHECK(j["conditions"][1]["translational_mm"]["x"]["mean"].get<double>() == doctest::Approx(3.5));
}

TEST_CASE("CSV errors") {
  std::stringstream missing("trial,t_us,x,y\n0,0,1,2\n");
  CHECK_THROWS_AS(read_slippage_csv(missing), Error);
  std::stringstream backwards("trial,t_us,x,y,z,roll,yaw,pitch\n0,10,0,0,0,0,0,0\n0,5,0,0,0,0,0,0\n");
  CHECK_THROWS_AS(read_slippage_csv(backwards), Error);
}
