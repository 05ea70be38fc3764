// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "usf/compositor.hpp"
#include "usf/contour.hpp"
#include "usf/error.hpp"
#include "usf/markers.hpp"
#include "usf/media_io.hpp"
#include "usf/pipeline.hpp"
#include "usf/pose.hpp"
#include "usf/session.hpp"
#include "usf/slippage.hpp"
#include "usf/sync.hpp"
#include "usf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace usf;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks with a readable reason; the first few are kept.
struct Checker {
  Outcome out;
  int failures = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    out.pass = false;
    if (failures++ < 3) out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { out.detail += (out.detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int g_failed = 0;

void run(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("unexpected exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s) {
    o.pass = false;
    o.detail += fmt("; over the %.0f s budget", budget_s);
  }
  if (!o.pass) ++g_failed;
  std::printf("%s  %-28s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

double angle_diff(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

Point2d rotate_about(const Point2d& p, const Point2d& c, double theta) { return c + rotation2(theta) * (p - c); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("usf_acceptance_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Names of files that are missing on one side or differ in content.
std::vector<std::string> tree_diff(const fs::path& a, const fs::path& b) {
  std::vector<std::string> diff;
  auto listing = [](const fs::path& root) {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) names.push_back(fs::relative(e.path(), root).string());
    }
    std::sort(names.begin(), names.end());
    return names;
  };
  const auto la = listing(a), lb = listing(b);
  if (la != lb) diff.push_back("file lists differ");
  for (const auto& n : la) {
    if (fs::exists(b / n) && file_bytes(a / n) != file_bytes(b / n)) diff.push_back(n);
  }
  return diff;
}

PipelineConfig synthetic_config(const std::string& spec) {
  PipelineConfig c;
  c.rgb_source = "synthetic:" + spec;
  c.us_source = "synthetic:" + spec;
  c.audio_source = "synthetic:" + spec;
  return c;
}

PipelineConfig replay_config(const fs::path& dir) {
  PipelineConfig c;
  c.rgb_source = "replay:" + dir.string();
  c.us_source = "replay:" + dir.string();
  c.audio_source = "replay:" + dir.string();
  return c;
}

std::vector<std::shared_ptr<const PublishedBundle>> run_collect(Pipeline& p) {
  auto sub = p.subscribe(4096);
  std::vector<std::shared_ptr<const PublishedBundle>> out;
  auto drain = [&] {
    while (auto e = sub->next(std::chrono::microseconds(0))) {
      if (e->bundle) out.push_back(e->bundle);
    }
  };
  while (p.step()) drain();
  drain();
  return out;
}

// Runs a pipeline on its own thread to the end and returns bundles per second.
double threaded_throughput(PipelineConfig cfg, std::size_t* bundles) {
  Pipeline p(std::move(cfg));
  const auto t0 = std::chrono::steady_clock::now();
  p.start();
  p.wait();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  *bundles = p.bundles_published();
  return double(*bundles) / secs;
}

Outcome pose_suite() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> pos(0.0, 640.0), unit(-1.0, 1.0), ang(-kPi, kPi), scl(0.25, 4.0);
  Checker c;
  double worst = 0.0;
  auto close = [&](double err, const char* what) {
    worst = std::max(worst, err);
    c.expect(err <= 1e-9, std::string(what) + fmt(" err %.3g", err));
  };
  for (int i = 0; i < 1000; ++i) {
    CalibrationProfile cal;
    cal.ref_marker_distance_px = 50.0 + 100.0 * std::abs(unit(rng));
    cal.anchor_offset = Point2d(unit(rng), unit(rng));
    cal.base_rotation_offset_rad = 0.5 * unit(rng);
    cal.us_crop = {0, 0, 256, 256};
    cal.us_anchor = Point2d(128.0 + 100.0 * unit(rng), 100.0 * std::abs(unit(rng)));
    KeypointPair kp{Point2d(pos(rng), pos(rng)), Point2d(pos(rng), pos(rng)), 1.0};
    if ((kp.m2 - kp.m1).norm() < 20.0) kp.m2 = kp.m1 + Point2d(40.0, 5.0);
    const Pose2D base = pose_from_markers(kp, cal);

    const Point2d centre(pos(rng), pos(rng));
    const double k = scl(rng);
    const KeypointPair scaled{centre + k * (kp.m1 - centre), centre + k * (kp.m2 - centre), 1.0};
    const Pose2D ps = pose_from_markers(scaled, cal);
    close(std::abs(ps.scale - k * base.scale) / std::max(1.0, base.scale * k), "scale equivariance");
    close(angle_diff(ps.angle_rad, base.angle_rad), "angle under scaling");

    const double theta = ang(rng);
    const KeypointPair rotated{rotate_about(kp.m1, centre, theta), rotate_about(kp.m2, centre, theta), 1.0};
    const Pose2D pr = pose_from_markers(rotated, cal);
    close(angle_diff(pr.angle_rad, base.angle_rad + theta), "rotation equivariance");

    const Point2d d(200.0 * unit(rng), 200.0 * unit(rng));
    const Pose2D pt = pose_from_markers({kp.m1 + d, kp.m2 + d, 1.0}, cal);
    close((pt.anchor_px - (base.anchor_px + d)).norm(), "translation equivariance");
    close(angle_diff(pt.angle_rad, base.angle_rad) + std::abs(pt.scale - base.scale), "pose under translation");

    const OverlayTransform t = overlay_transform(base, cal);
    const OverlayTransform inv = t.inverse();
    const Point2d p(pos(rng), pos(rng));
    close((t(inv(p)) - p).norm(), "T of T^-1");
    close((inv(t(p)) - p).norm(), "T^-1 of T");
    close(((t * inv)(p) - p).norm(), "composition with inverse");
  }
  c.note("1000 cases" + fmt(", worst error %.2e", worst));
  return c.out;
}

Outcome detector_suite() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> x(20.0, 600.0), y(20.0, 440.0), size(16.0, 30.0);
  const FrameDims dims{640, 480};
  int within = 0, total = 0;
  double worst = 0.0;
  Checker c;
  while (total < 200) {
    const double s = size(rng);
    const Point2d a(x(rng), y(rng)), b(x(rng), y(rng));
    // Keep the squares apart so the frame really holds two blobs.
    if (std::abs(a.x() - b.x()) < s + 4.0 && std::abs(a.y() - b.y()) < s + 4.0) continue;
    if (a.x() + s > 638 || b.x() + s > 638 || a.y() + s > 478 || b.y() + s > 478) continue;
    ++total;
    const KeypointPair truth = KeypointPair{a, b, 1.0}.canonical();
    const KeypointPair got = detect_markers(render_marker_frame_subpixel(dims, {a, b}, s), {});
    c.expect(got.is_canonical(), "non-canonical output");
    const double err = std::max((got.m1 - truth.m1).norm(), (got.m2 - truth.m2).norm());
    worst = std::max(worst, err);
    if (err <= 0.5) ++within;
  }
  const double frac = double(within) / total;
  c.expect(frac >= 0.99, fmt("only %.1f%% within 0.5 px", 100.0 * frac));
  c.note(std::to_string(within) + "/" + std::to_string(total) + " within 0.5 px" + fmt(", worst %.3f px", worst));
  return c.out;
}

Outcome augmentation_suite() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> rot(-30.0, 30.0), scl(0.8, 1.2), shift(-40.0, 40.0);
  std::uniform_int_distribution<int> cx(180, 420), cy(130, 330);
  const FrameDims dims{640, 480};
  constexpr int kSize = 20;
  constexpr double kInset = 5.0;  // labels sit inside the square, clear of anti-aliased edges
  int cases = 0, rejected = 0;
  int worst = 0;
  Checker c;
  while (cases < 500) {
    Point2d a(cx(rng), cy(rng)), b(cx(rng), cy(rng));
    if (std::abs(a.x() - b.x()) < kSize + 4 && std::abs(a.y() - b.y()) < kSize + 4) continue;
    KeypointSample sample{render_marker_frame(dims, {a, b}, kSize),
                          KeypointPair{a + Point2d(kInset, kInset), b + Point2d(kInset, kInset), 1.0}.canonical()};
    AugmentSpec spec;
    spec.rotation_deg = rot(rng);
    spec.scale = scl(rng);
    spec.translation = Point2d(shift(rng), shift(rng));
    KeypointSample out;
    try {
      out = augment(sample, spec);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::KeypointOutOfBounds) throw;
      ++rejected;
      continue;
    }
    ++cases;
    c.expect(out.truth.is_canonical(), "mapped pair not canonical");
    for (const Point2d& p : {out.truth.m1, out.truth.m2}) {
      const int px = int(std::lround(p.x())), py = int(std::lround(p.y()));
      const std::uint8_t* v = out.image.at(px, py);
      for (int k = 0; k < 3; ++k) {
        const int d = std::abs(int(v[k]) - int(kMarkerOrange[k]));
        worst = std::max(worst, d);
        c.expect(d <= 10, "pixel at mapped keypoint off marker color by " + std::to_string(d));
      }
    }
  }
  c.note("500 specs (" + std::to_string(rejected) + " out-of-bounds draws redrawn), worst channel diff " +
         std::to_string(worst) + "/255");
  return c.out;
}

Outcome contour_suite() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Checker c;
  int cases = 0;
  double worst_rmse = 0.0;
  while (cases < 100) {
    TongueBandSpec spec;
    spec.dims = {128, 128};
    const int knots = 3 + int(u(rng) * 4);
    const double x0 = 2.0 + 20.0 * u(rng), x1 = 105.0 + 20.0 * u(rng);
    for (int k = 0; k < knots; ++k) {
      spec.control_points.emplace_back(x0 + (x1 - x0) * k / (knots - 1), 25.0 + 60.0 * u(rng));
    }
    spec.band_thickness = 3.0 + 12.0 * u(rng);
    spec.noise_level = 0.1 * u(rng);
    spec.speckle_seed = rng();
    std::pair<SegmentationMap, TongueContour> gen;
    try {
      gen = generate_segmentation(spec);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SpecOutOfBounds) throw;
      continue;
    }
    ++cases;
    const auto& [map, truth] = gen;
    const BinaryMask mask = binarize(map, 0.5);
    const TongueContour top = extract_top_pixels(mask);
    c.expect(top.size() == truth.size(), "contour length differs from truth");
    double ss = 0.0;
    std::size_t n = std::min(top.size(), truth.size());
    for (std::size_t i = 0; i < n; ++i) {
      c.expect(top.points[i].x() == truth.points[i].x(), "column mismatch");
      ss += std::pow(top.points[i].y() - truth.points[i].y(), 2);
    }
    const double rmse = n ? std::sqrt(ss / double(n)) : INFINITY;
    worst_rmse = std::max(worst_rmse, rmse);
    c.expect(rmse <= 1.5, fmt("RMSE %.3f", rmse));

    const BinaryMask skel = skeletonize(mask);
    c.expect((skeletonize(skel) == skel).all(), "skeletonize not idempotent");
    c.expect(((skel != 0) <= (mask != 0)).all(), "skeleton outside the mask");
  }
  c.note("100 bands" + fmt(", worst RMSE %.3f px", worst_rmse));
  return c.out;
}

Outcome metric_suite() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Checker c;
  double worst = 0.0;
  auto polyline = [&] {
    TongueContour t;
    std::vector<oracle::P> o;
    const int n = 5 + int(u(rng) * 120);
    double x = 200.0 * u(rng), y = 200.0 * u(rng);
    for (int i = 0; i < n; ++i) {
      x += 3.0 * u(rng);
      y += 4.0 * (u(rng) - 0.5);
      t.points.emplace_back(x, y);
      o.push_back({x, y});
    }
    return std::pair{t, o};
  };
  for (int i = 0; i < 50; ++i) {
    const auto [a, oa] = polyline();
    const auto [b, ob] = polyline();
    const double msd = contour_distance(a, b, ContourMetric::Msd);
    const double hd = contour_distance(a, b, ContourMetric::Hausdorff);
    const double em = std::abs(msd - oracle::msd(oa, ob)), eh = std::abs(hd - oracle::hausdorff(oa, ob));
    worst = std::max({worst, em, eh});
    c.expect(em <= 1e-9, fmt("MSD off by %.3g", em));
    c.expect(eh <= 1e-9, fmt("Hausdorff off by %.3g", eh));
    c.expect(hd >= msd, "Hausdorff below MSD");
  }
  c.note("50 pairs" + fmt(", worst deviation %.2e", worst));
  return c.out;
}

Outcome compositor_suite() {
  Checker c;
  struct Px {
    Rgb rgb;
    std::uint8_t us;
    bool us_on;
    std::uint8_t pred;
    bool pred_on;
    Rgb expect;  // round(min(255, 0.9 rgb + 0.4 us + 1.0 pred)), worked by hand
  };
  const Px px[9] = {
      {{100, 100, 100}, 200, true, 255, true, {255, 255, 255}}, {{100, 100, 100}, 200, true, 0, false, {170, 170, 170}},
      {{10, 20, 30}, 0, false, 0, false, {9, 18, 27}},          {{50, 60, 70}, 100, true, 0, false, {85, 94, 103}},
      {{0, 0, 0}, 0, false, 128, true, {128, 128, 128}},        {{200, 150, 100}, 255, true, 0, false, {255, 237, 192}},
      {{1, 2, 3}, 1, true, 0, false, {1, 2, 3}},                {{250, 250, 250}, 0, false, 0, false, {225, 225, 225}},
      {{30, 40, 50}, 50, true, 51, true, {98, 107, 116}},
  };
  ImageFrame rgb(StreamId::Rgb, 0, 3, 3, PixelFormat::Rgb8);
  Layer us{ImageFrame(StreamId::Us, 0, 3, 3, PixelFormat::Gray8), std::vector<std::uint8_t>(9)};
  Layer pred{ImageFrame(StreamId::Pred, 0, 3, 3, PixelFormat::Gray8), std::vector<std::uint8_t>(9)};
  for (int i = 0; i < 9; ++i) {
    std::copy(px[i].rgb.begin(), px[i].rgb.end(), rgb.payload.begin() + 3 * i);
    us.image.payload[i] = px[i].us;
    us.alpha[i] = px[i].us_on ? 255 : 0;
    pred.image.payload[i] = px[i].pred;
    pred.alpha[i] = px[i].pred_on ? 255 : 0;
  }
  const ImageFrame golden = composite(rgb, us, pred, BlendWeights{0.9, 0.4, 1.0}, std::nullopt);
  int exact = 0;
  for (int i = 0; i < 9; ++i) {
    bool ok = true;
    for (int k = 0; k < 3; ++k) ok = ok && golden.payload[3 * i + k] == px[i].expect[k];
    exact += ok;
    c.expect(ok, "golden pixel " + std::to_string(i) + " differs");
  }

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  const int n = 24;
  ImageFrame frame(StreamId::Rgb, 0, n, n, PixelFormat::Rgb8);
  Layer lu{ImageFrame(StreamId::Us, 0, n, n, PixelFormat::Gray8), std::vector<std::uint8_t>(n * n)};
  Layer lp{ImageFrame(StreamId::Pred, 0, n, n, PixelFormat::Gray8), std::vector<std::uint8_t>(n * n)};
  std::uniform_int_distribution<int> byte(0, 255), bit(0, 1);
  for (auto& b : frame.payload) b = std::uint8_t(byte(rng));
  for (int i = 0; i < n * n; ++i) {
    lu.image.payload[i] = std::uint8_t(byte(rng));
    lu.alpha[i] = bit(rng) ? 255 : 0;
    lp.image.payload[i] = std::uint8_t(byte(rng));
    lp.alpha[i] = bit(rng) ? 255 : 0;
  }
  for (int i = 0; i < 100; ++i) {
    BlendWeights lo{w(rng), w(rng), w(rng)};
    BlendWeights hi{lo.rgb + (1.0 - lo.rgb) * w(rng), lo.us + (1.0 - lo.us) * w(rng), lo.pred + (1.0 - lo.pred) * w(rng)};
    const ImageFrame a = composite(frame, lu, lp, lo, std::nullopt), b = composite(frame, lu, lp, hi, std::nullopt);
    for (std::size_t k = 0; k < a.payload.size(); ++k) c.expect(b.payload[k] >= a.payload[k], "raising a weight darkened a channel");
  }
  c.note(std::to_string(exact) + "/9 golden pixels exact, 100 weight pairs monotone");
  return c.out;
}

std::vector<ImageFrame> clock_frames(StreamId id, int n, std::int64_t offset) {
  std::vector<ImageFrame> v;
  for (int i = 0; i < n; ++i) v.emplace_back(id, frame_timestamp_us(i, 30) + offset, 2, 2, PixelFormat::Gray8, std::uint8_t(i));
  return v;
}

Outcome sync_suite() {
  Checker c;
  std::int64_t worst = 0;
  const auto rgb = clock_frames(StreamId::Rgb, 90, 0);
  for (std::int64_t skew : {10'000, -10'000}) {
    const auto us = clock_frames(StreamId::Us, 90, skew);
    const auto bundles = pair_streams(rgb, us, {});
    c.expect(bundles.size() == rgb.size(), "bundle count " + std::to_string(bundles.size()));
    std::vector<std::int64_t> rt, ut;
    for (const auto& f : rgb) rt.push_back(f.timestamp_us);
    for (const auto& f : us) ut.push_back(f.timestamp_us);
    const auto expect = oracle::nearest_pairing(rt, ut);
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      worst = std::max<std::int64_t>(worst, std::llabs(bundles[i].us_skew_us));
      c.expect(std::llabs(bundles[i].us_skew_us) <= 16'667, "skew beyond 16.667 ms");
      c.expect(bundles[i].us.timestamp_us == ut[expect[i]], "not the nearest ultrasound frame");
    }
  }

  // Ultrasound goes silent after its first frame: held bundles until the
  // held frame is 500 ms old, then SourceStalled.
  std::int64_t stalled_at = -1;
  std::size_t held_bundles = 0;
  {
    BoundedQueue<ImageFrame> rq(256), uq(256);
    for (auto f : clock_frames(StreamId::Rgb, 60, 0)) rq.push(std::move(f));
    uq.push(clock_frames(StreamId::Us, 1, 0)[0]);
    rq.close();
    uq.close();
    Pairer p(rq, uq, nullptr, {});
    try {
      while (auto b = p.next()) ++held_bundles;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SourceStalled) stalled_at = frame_timestamp_us(std::int64_t(held_bundles), 30);
    }
  }
  c.expect(stalled_at > 500'000 && frame_timestamp_us(std::int64_t(held_bundles) - 1, 30) <= 500'000,
           "offline stall not raised at the first frame past 500 ms");
  double live_wait_ms = 0.0;
  {
    BoundedQueue<ImageFrame> rq(4), uq(4);
    SyncConfig cfg;
    cfg.wall_wait = std::chrono::microseconds(cfg.stall_timeout_us);
    Pairer p(rq, uq, nullptr, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    bool stalled = false;
    try {
      p.next();
    } catch (const Error& e) {
      stalled = e.code() == ErrorCode::SourceStalled;
    }
    live_wait_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    c.expect(stalled && live_wait_ms >= 495.0, fmt("live stall after %.0f ms", live_wait_ms));
  }

  // Two replays of one recorded session produce the same bundle sequence.
  TempDir dir("sync_replay");
  {
    PipelineConfig cfg = synthetic_config("seed=8,frames=45,offset_us=7000");
    cfg.record_dir = dir.path;
    Pipeline p(cfg);
    run_collect(p);
  }
  auto replayed = [&] {
    ReplaySet set = replay(dir.path);
    std::vector<ImageFrame> r, u;
    std::vector<AudioChunk> a;
    while (auto f = set.frames.at(StreamId::Rgb)->next()) r.push_back(std::move(*f));
    while (auto f = set.frames.at(StreamId::Us)->next()) u.push_back(std::move(*f));
    while (auto ch = set.audio->next()) a.push_back(std::move(*ch));
    return pair_streams(r, u, a);
  };
  const auto first = replayed(), second = replayed();
  c.expect(!first.empty() && first == second, "replayed bundle sequences differ");
  Pipeline pa(replay_config(dir.path)), pb(replay_config(dir.path));
  const auto ba = run_collect(pa), bb = run_collect(pb);
  bool same = ba.size() == bb.size() && !ba.empty();
  for (std::size_t i = 0; same && i < ba.size(); ++i) {
    same = ba[i]->timestamp_us == bb[i]->timestamp_us && ba[i]->us_skew_us == bb[i]->us_skew_us &&
           ba[i]->composite == bb[i]->composite && ba[i]->contour.points == bb[i]->contour.points;
  }
  c.expect(same, "replayed pipeline bundles differ");
  c.note(fmt("worst |skew| %.3f ms", worst / 1000.0) + ", offline stall after " + std::to_string(held_bundles) +
         " held bundles" + fmt(", live stall after %.0f ms", live_wait_ms) + ", " + std::to_string(ba.size()) +
         " replayed bundles identical");
  return c.out;
}

Outcome end_to_end_suite() {
  Checker c;
  TempDir a("e2e_a"), b("e2e_b");
  std::size_t na = 0, nb = 0;
  PipelineConfig ca = synthetic_config("seed=1,frames=90");
  ca.record_dir = a.path;
  PipelineConfig cb = ca;
  cb.record_dir = b.path;
  const double rec_a = threaded_throughput(ca, &na);
  const double rec_b = threaded_throughput(cb, &nb);
  c.expect(na == 90 && nb == 90, "bundle counts " + std::to_string(na) + "/" + std::to_string(nb));
  const auto diff = tree_diff(a.path, b.path);
  c.expect(diff.empty(), "recordings differ (" + (diff.empty() ? std::string() : diff.front()) + ")");

  std::size_t n = 0;
  const double live = threaded_throughput(synthetic_config("seed=1,frames=300"), &n);
  c.expect(n == 300, "throughput run published " + std::to_string(n));
  c.expect(live >= 30.0, fmt("%.1f bundles/s below 30", live));
  c.note("2x90-frame recordings byte-identical" + fmt(", pipeline %.1f bundles/s at 640x480", live) +
         fmt(", while recording all outputs %.1f bundles/s", std::min(rec_a, rec_b)) + ", " +
         std::to_string(std::thread::hardware_concurrency()) + " hardware thread(s)");
  return c.out;
}

Outcome session_suite() {
  Checker c;
  TempDir first("rt_first"), second("rt_second"), broken("rt_broken");
  {
    PipelineConfig cfg = synthetic_config("seed=4,frames=30");
    cfg.record_dir = first.path;
    Pipeline p(cfg);
    run_collect(p);
  }
  {
    PipelineConfig cfg = replay_config(first.path);
    cfg.record_dir = second.path;
    Pipeline p(cfg);
    run_collect(p);
  }
  const SessionManifest m1 = load_manifest(first.path), m2 = load_manifest(second.path);
  c.expect(m1.to_json() == m2.to_json(), "manifests differ after record, replay, record");
  c.expect(file_bytes(first.path / kManifestFile) == file_bytes(second.path / kManifestFile), "manifest bytes differ");

  fs::copy(first.path, broken.path, fs::copy_options::recursive);
  const StreamDescriptor* us = m1.stream(StreamId::Us);
  c.expect(us && us->frames.size() > 5, "no ultrasound frames recorded");
  if (us && us->frames.size() > 5) {
    const fs::path victim = broken.path / us->frames[5].file;
    fs::resize_file(victim, fs::file_size(victim) / 2);
    const VerifyReport report = verify_session(broken.path);
    c.expect(!report.ok, "verify accepted a truncated frame");
    try {
      replay(broken.path);
      c.expect(false, "replay accepted a truncated frame");
    } catch (const Error& e) {
      c.expect(e.code() == ErrorCode::ManifestCorrupt, "wrong error for a truncated frame");
      c.expect(std::string(e.what()).find("US") != std::string::npos, "error does not name the stream");
    }
  }
  std::size_t frames = 0;
  for (const auto& s : m1.streams) frames += s.frames.size();
  c.note(std::to_string(frames) + " indexed frames, manifests equal, truncated US frame detected");
  return c.out;
}

Outcome slippage_suite() {
  Checker c;
  // Per-trial maxima are the condition mean plus factor * d_k, so the
  // population std is factor * sqrt(0.08).
  const double d[10] = {-0.4, -0.2, 0.0, 0.2, 0.4, -0.4, -0.2, 0.0, 0.2, 0.4};
  const double factor[6] = {1.0, 0.5, 2.0, 1.0, 0.5, 2.0};
  const double means[2][6] = {{4.7, 5.1, 7.6, 6.4, 4.1, 5.9}, {3.4, 3.5, 6.1, 5.6, 3.8, 4.7}};
  const double stds[6] = {0.282842712474619, 0.141421356237310, 0.565685424949238,
                          0.282842712474619, 0.141421356237310, 0.565685424949238};
  const char* conditions[2] = {"loose", "tight"};
  std::ostringstream csv;
  csv << "trial,t_us,x,y,z,roll,yaw,pitch,condition\n";
  csv.precision(17);
  for (int cond = 0; cond < 2; ++cond) {
    for (int k = 0; k < 10; ++k) {
      const int trial = cond * 10 + k;
      double base[6], peak[6];
      for (int a = 0; a < 6; ++a) {
        base[a] = 0.25 * (k - 4) + a;
        const double sign = (k + a) % 2 ? -1.0 : 1.0;
        peak[a] = sign * (means[cond][a] + factor[a] * d[k]);
      }
      // Baseline, a ramp to the peak, a partial return.
      for (int step = 0; step <= 4; ++step) {
        const double f = step <= 2 ? step / 2.0 : 1.0 - 0.3 * (step - 2);
        csv << trial << ',' << step * 33'333;
        for (int a = 0; a < 6; ++a) csv << ',' << base[a] + f * peak[a];
        csv << ',' << conditions[cond] << '\n';
      }
    }
  }
  std::istringstream in(csv.str());
  const auto data = read_slippage_csv(in);
  const nlohmann::json report = slippage_report_json(data);
  c.expect(report["std"] == "population", "std kind not population");
  c.expect(report["conditions"].size() == 2, "expected loose and tight conditions");
  double worst = 0.0;
  for (int cond = 0; cond < 2 && cond < int(report["conditions"].size()); ++cond) {
    const auto& entry = report["conditions"][cond];
    c.expect(entry["condition"] == conditions[cond], "condition order");
    c.expect(entry["trials"] == 10, "trial count");
    for (int a = 0; a < 6; ++a) {
      const char* group = a < 3 ? "translational_mm" : "rotational_deg";
      const auto& stat = entry[group][kSlippageAxes[a]];
      const double em = std::abs(stat["mean"].get<double>() - means[cond][a]);
      const double es = std::abs(stat["std"].get<double>() - stds[a]);
      worst = std::max({worst, em, es});
      c.expect(em <= 1e-12 && es <= 1e-12, std::string(conditions[cond]) + " " + kSlippageAxes[a] + " mismatch");
    }
  }
  c.note("2 conditions x 10 trials x 6 axes" + fmt(", worst deviation %.1e", worst));
  return c.out;
}

}  // namespace

int main() {
  run("pose math", 1.0, pose_suite);
  run("marker detector", 10.0, detector_suite);
  run("augmentation consistency", 10.0, augmentation_suite);
  run("contour closure", 30.0, contour_suite);
  run("metric oracle", 0.0, metric_suite);
  run("compositor", 0.0, compositor_suite);
  run("sync", 0.0, sync_suite);
  run("end-to-end determinism", 0.0, end_to_end_suite);
  run("session round trip", 0.0, session_suite);
  run("slippage", 0.0, slippage_suite);
  std::printf("%d criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
