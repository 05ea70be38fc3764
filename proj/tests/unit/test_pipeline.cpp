#include <doctest.h>

#include <filesystem>

#include "usf/error.hpp"
#include "usf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace usf;
using nlohmann::json;

namespace {

PipelineConfig synthetic_config(const std::string& spec) {
  PipelineConfig c;
  c.rgb_source = "synthetic:" + spec;
  c.us_source = "synthetic:" + spec;
  c.audio_source = "synthetic:" + spec;
  return c;
}

struct Collected {
  std::vector<std::shared_ptr<const PublishedBundle>> bundles;
  std::vector<json> status;
};

// Drains whatever is queued without waiting.
void drain(Subscription& sub, Collected& out) {
  while (auto e = sub.next(std::chrono::microseconds(0))) {
    if (e->bundle) out.bundles.push_back(e->bundle);
    else out.status.push_back(e->status);
  }
}

Collected run_all(Pipeline& p, std::size_t capacity = 1024) {
  auto sub = p.subscribe(capacity);
  Collected out;
  while (p.step()) drain(*sub, out);
  drain(*sub, out);
  return out;
}

bool all_zero(const ImageFrame& f) {
  return std::all_of(f.payload.begin(), f.payload.end(), [](std::uint8_t b) { return b == 0; });
}

}  // namespace

TEST_CASE("90 synthetic frames give 90 identical composites on every run") {
  Pipeline a(synthetic_config("seed=1,frames=90")), b(synthetic_config("seed=1,frames=90"));
  const Collected ra = run_all(a), rb = run_all(b);
  REQUIRE(ra.bundles.size() == 90);
  REQUIRE(rb.bundles.size() == 90);
  for (std::size_t i = 0; i < 90; ++i) {
    CHECK(ra.bundles[i]->index == std::int64_t(i));
    CHECK(ra.bundles[i]->composite == rb.bundles[i]->composite);
    CHECK(ra.bundles[i]->composite.width == 640);
    CHECK(ra.bundles[i]->composite.height == 480);
  }
  REQUIRE_FALSE(ra.status.empty());
  CHECK(ra.status.back()["state"] == "finished");
  CHECK(ra.status.back()["bundles"] == 90);
  CHECK(a.finished());
}

TEST_CASE("freeze repeats the frozen composite, unfreeze resumes live") {
  Pipeline p(synthetic_config("seed=2,frames=40"));
  auto sub = p.subscribe(1024);
  Collected c;
  for (int i = 0; i < 5; ++i) REQUIRE(p.step());
  drain(*sub, c);
  const auto frozen = c.bundles.back();
  CHECK(p.control({{"id", 1}, {"type", "freeze"}})["ok"] == true);
  c.bundles.clear();
  for (int i = 0; i < 30; ++i) REQUIRE(p.step());
  drain(*sub, c);
  REQUIRE(c.bundles.size() == 30);
  for (const auto& b : c.bundles) {
    CHECK(b->frozen);
    CHECK(b->composite.payload == frozen->composite.payload);
  }
  CHECK(c.bundles.back()->index == 34);
  CHECK(p.control({{"id", 2}, {"type", "unfreeze"}})["ok"] == true);
  c.bundles.clear();
  REQUIRE(p.step());
  drain(*sub, c);
  REQUIRE(c.bundles.size() == 1);
  CHECK_FALSE(c.bundles[0]->frozen);
  CHECK(c.bundles[0]->composite.payload != frozen->composite.payload);
}

TEST_CASE("zero weights make every later composite black") {
  Pipeline p(synthetic_config("seed=3,frames=12"));
  auto sub = p.subscribe(1024);
  for (int i = 0; i < 3; ++i) p.step();
  const json r = p.control({{"id", "w"}, {"type", "set_weights"}, {"weights", {{"rgb", 0}, {"us", 0}, {"pred", 0}}}});
  CHECK(r["ok"] == true);
  CHECK(r["re"] == "w");
  Collected c;
  drain(*sub, c);
  CHECK_FALSE(all_zero(c.bundles.back()->composite));
  c.bundles.clear();
  while (p.step()) drain(*sub, c);
  REQUIRE(c.bundles.size() == 9);
  for (const auto& b : c.bundles) CHECK(all_zero(b->composite));

  Pipeline q(synthetic_config("seed=3,frames=2"));
  CHECK(q.control({{"id", 3}, {"type", "set_weights"}, {"rgb", 1.5}})["error"] == "InvalidArgument");
}

TEST_CASE("control errors carry the correlation id") {
  Pipeline p(synthetic_config("seed=1,frames=3"));
  json r = p.control({{"id", 17}, {"type", "get_metrics"}});
  CHECK(r["re"] == 17);
  CHECK(r["ok"] == false);
  CHECK(r["error"] == "NoReferenceSelected");
  r = p.control({{"id", 18}, {"type", "launch_rocket"}});
  CHECK(r["re"] == 18);
  CHECK(r["error"] == "ProtocolError");
  r = p.control({{"id", 19}});
  CHECK(r["error"] == "ProtocolError");
  r = p.control({{"id", 20}, {"type", "select_reference"}, {"reference", "/no/such/session"}});
  CHECK(r["error"] == "SessionNotFound");
  r = p.control({{"id", 21}, {"type", "get_status"}});
  CHECK(r["ok"] == true);
  CHECK(r["re"] == 21);
  CHECK(r.contains("latency_ms"));
  CHECK(r["weights"]["rgb"] == 0.9);
}

TEST_CASE("status exposes per-stage latencies") {
  Pipeline p(synthetic_config("seed=1,frames=4"));
  run_all(p);
  const json s = p.control({{"id", 1}, {"type", "get_status"}});
  for (const char* stage : {"sync", "detect", "pose", "segment", "contour", "warp", "composite", "publish", "total"}) {
    REQUIRE(s["latency_ms"].contains(stage));
    CHECK(s["latency_ms"][stage]["count"] == 4);
  }
  CHECK(s["bundles"] == 4);
  CHECK(s["finished"] == true);
}

TEST_CASE("a session replayed against itself has zero MSD") {
  const fs::path dir = fs::temp_directory_path() / "usf_test_selfref";
  fs::remove_all(dir);
  {
    PipelineConfig c = synthetic_config("seed=5,frames=20");
    c.record_dir = dir;
    Pipeline p(c);
    run_all(p);
    REQUIRE(p.last_recording());
  }
  PipelineConfig c;
  c.rgb_source = "replay:" + dir.string();
  c.us_source = "replay:" + dir.string();
  c.audio_source = "replay:" + dir.string();
  Pipeline p(c);
  const json r = p.control({{"id", 1}, {"type", "select_reference"}, {"reference", dir.string()}});
  REQUIRE(r["ok"] == true);
  CHECK(r["frames"] == 20);
  const Collected out = run_all(p);
  REQUIRE(out.bundles.size() == 20);
  for (const auto& b : out.bundles) {
    REQUIRE(b->metrics);
    CHECK(b->metrics->msd == 0.0);
    CHECK(b->metrics->hausdorff == 0.0);
  }
  const json m = p.control({{"id", 2}, {"type", "get_metrics"}});
  CHECK(m["ok"] == true);
  CHECK(m["msd"] == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("a reference shifted 5 px down gives MSD 5") {
  Pipeline p(synthetic_config("seed=1,frames=30,curve=0"));
  const json r =
      p.control({{"id", 1}, {"type", "select_reference"}, {"reference", "synthetic:seed=1,frames=30,curve=0,shift_y=5"}});
  REQUIRE(r["ok"] == true);
  const Collected out = run_all(p);
  REQUIRE(out.bundles.size() == 30);
  for (const auto& b : out.bundles) {
    REQUIRE(b->metrics);
    CHECK(std::abs(b->metrics->msd - 5.0) <= 0.1);
    REQUIRE(b->ref);
    CHECK(b->ref->stream_id == StreamId::Ref);
  }
}

TEST_CASE("a slow subscriber loses events but never stalls the pipeline") {
  Pipeline p(synthetic_config("seed=1,frames=30"));
  auto slow = p.subscribe(2);
  auto fast = p.subscribe(1024);
  p.start();
  p.wait();
  CHECK(p.finished());
  CHECK(p.bundles_published() == 30);
  CHECK(slow->dropped() > 0);
  CHECK(fast->dropped() == 0);
  const json s = p.control({{"id", 1}, {"type", "get_status"}});
  bool reported = false;
  for (const auto& d : s["drops"]["subscribers"]) reported = reported || d.get<std::size_t>() == slow->dropped();
  CHECK(reported);
}

TEST_CASE("a silent ultrasound source becomes a status event") {
  PipelineConfig c = synthetic_config("seed=1,frames=30");
  c.us_source = "synthetic:seed=1,frames=1";
  Pipeline p(c);
  const Collected out = run_all(p);
  CHECK(out.bundles.size() == 16);
  bool stalled = false;
  for (const auto& s : out.status) stalled = stalled || s["state"] == "stalled";
  CHECK(stalled);
  CHECK(out.status.back()["state"] == "finished");
}

TEST_CASE("start_record and stop_record through control") {
  const fs::path dir = fs::temp_directory_path() / "usf_test_ctlrec";
  fs::remove_all(dir);
  Pipeline p(synthetic_config("seed=1,frames=10"));
  p.step();
  const json a = p.control({{"id", 1}, {"type", "start_record"}, {"dir", dir.string()}, {"outputs", {"US", "CONTOURS"}}});
  REQUIRE(a["ok"] == true);
  CHECK(a["dir"] == fs::absolute(dir).lexically_normal().string());
  for (int i = 0; i < 4; ++i) p.step();
  const json b = p.control({{"id", 2}, {"type", "stop_record"}});
  REQUIRE(b["ok"] == true);
  CHECK(b["frames"]["US"] == 4);
  CHECK(b["contours"] == 4);
  CHECK(verify_session(dir).ok);
  CHECK(p.control({{"id", 3}, {"type", "stop_record"}})["ok"] == false);
  fs::remove_all(dir);
}

TEST_CASE("unknown replay directory fails at construction") {
  PipelineConfig c;
  c.rgb_source = "replay:/no/such/dir";
  try {
    Pipeline p(c);
    p.step();
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SessionNotFound);
  }
}
