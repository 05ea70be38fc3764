#pragma once

// Reference computations written independently of the library, used to
// check it. They favour the most literal formulation over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

struct P {
  double x;
  double y;
};

inline double dist(P a, P b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)); }

inline double nearest(P p, const std::vector<P>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (P q : set) best = std::min(best, dist(p, q));
  return best;
}

inline double msd(const std::vector<P>& a, const std::vector<P>& b) {
  double sum = 0.0;
  for (P p : a) sum += nearest(p, b);
  for (P p : b) sum += nearest(p, a);
  return sum / double(a.size() + b.size());
}

inline double hausdorff(const std::vector<P>& a, const std::vector<P>& b) {
  double h = 0.0;
  for (P p : a) h = std::max(h, nearest(p, b));
  for (P p : b) h = std::max(h, nearest(p, a));
  return h;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double population_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size()));
}

// Rotation about a centre followed by a translation, spelled out per component.
inline P rotate_about(P p, P c, double deg, double scale, P shift) {
  const double r = deg * 3.14159265358979323846 / 180.0;
  const double dx = p.x - c.x, dy = p.y - c.y;
  return {c.x + scale * (std::cos(r) * dx - std::sin(r) * dy) + shift.x,
          c.y + scale * (std::sin(r) * dx + std::cos(r) * dy) + shift.y};
}

// For every RGB timestamp, the index of the US timestamp with the smallest
// absolute difference (earliest on ties), by full enumeration.
inline std::vector<std::size_t> nearest_pairing(const std::vector<std::int64_t>& rgb,
                                                const std::vector<std::int64_t>& us) {
  std::vector<std::size_t> out;
  for (std::int64_t t : rgb) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < us.size(); ++j) {
      if (std::llabs(us[j] - t) < std::llabs(us[best] - t)) best = j;
    }
    out.push_back(best);
  }
  return out;
}

// One additive blend channel, the literal formula.
inline std::uint8_t blend(double wr, double r, double wu, double u, bool u_on, double wp, double p, bool p_on) {
  double v = wr * r + (u_on ? wu * u : 0.0) + (p_on ? wp * p : 0.0);
  v = std::clamp(v, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::lround(v));
}

// Zhang-Suen thinning on a nested-vector raster, written directly from the
// published two-subiteration rules. Pixels outside the raster count as 0.
inline std::vector<std::vector<int>> zhang_suen(std::vector<std::vector<int>> m) {
  const int h = int(m.size()), w = h ? int(m[0].size()) : 0;
  auto px = [&](int y, int x) { return (y < 0 || x < 0 || y >= h || x >= w) ? 0 : m[y][x]; };
  for (bool changed = true; changed;) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      std::vector<std::pair<int, int>> del;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!m[y][x]) continue;
          const int p2 = px(y - 1, x), p3 = px(y - 1, x + 1), p4 = px(y, x + 1), p5 = px(y + 1, x + 1);
          const int p6 = px(y + 1, x), p7 = px(y + 1, x - 1), p8 = px(y, x - 1), p9 = px(y - 1, x - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          const int a = (!p2 && p3) + (!p3 && p4) + (!p4 && p5) + (!p5 && p6) + (!p6 && p7) + (!p7 && p8) +
                        (!p8 && p9) + (!p9 && p2);
          if (b < 2 || b > 6 || a != 1) continue;
          const bool c = step == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0) : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
          if (c) del.emplace_back(y, x);
        }
      }
      for (auto [y, x] : del) m[y][x] = 0;
      if (!del.empty()) changed = true;
    }
  }
  return m;
}

}  // namespace oracle
