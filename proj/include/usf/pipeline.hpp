#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "usf/config.hpp"
#include "usf/session.hpp"
#include "usf/sources.hpp"
#include "usf/sync.hpp"

namespace usf {

/// Everything produced for one bundle. Published as shared_ptr<const>, so
/// subscribers never observe later mutation.
struct PublishedBundle {
  std::int64_t index = 0;
  std::int64_t timestamp_us = 0;
  ImageFrame rgb;
  ImageFrame us;
  ImageFrame pred;  // GRAY8 mask in cropped ultrasound coordinates
  ImageFrame composite;
  std::optional<ImageFrame> ref;
  TongueContour contour;
  std::optional<KeypointPair> markers;  // unset when detection failed on this frame
  bool reference_selected = false;
  std::optional<ContourStats> metrics;  // unset when a contour is empty
  std::optional<double> audio_rms;
  std::int64_t us_skew_us = 0;
  std::int64_t audio_skew_us = 0;
  bool us_held = false;
  bool frozen = false;
};

/// Either a bundle or a status event (for instance a stalled source).
struct PipelineEvent {
  std::shared_ptr<const PublishedBundle> bundle;
  nlohmann::json status;
};

/// Per-subscriber drop-oldest queue. A slow reader loses old events; the
/// pipeline never waits for it.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : queue_(capacity, OverflowPolicy::DropOldest) {}
  std::optional<PipelineEvent> next(std::optional<std::chrono::microseconds> timeout = std::nullopt) {
    return queue_.pop(timeout).item;
  }
  std::size_t dropped() const { return queue_.dropped(); }
  bool closed() const { return queue_.closed(); }

 private:
  friend class Pipeline;
  BoundedQueue<PipelineEvent> queue_;
};

struct StageLatency {
  double last_ms = 0.0;
  double total_ms = 0.0;
  double max_ms = 0.0;
  std::size_t count = 0;

  void add(double ms);
  double mean_ms() const { return count ? total_ms / double(count) : 0.0; }
};

/// The end-to-end processing loop: pair sources, detect markers, pose the
/// ultrasound overlay, segment and extract the tongue contour, composite and
/// publish, optionally recording and comparing against a reference.
///
/// Control messages are queued to the processing context and applied between
/// bundles; when no processing thread is running they apply immediately.
class Pipeline {
 public:
  /// Throws ConfigInvalid / SessionNotFound for a bad configuration.
  explicit Pipeline(PipelineConfig config, std::shared_ptr<StubRegistry> stubs = nullptr);
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  std::shared_ptr<Subscription> subscribe(std::size_t capacity = 0);
  void unsubscribe(const std::shared_ptr<Subscription>& sub);

  /// Processes one bundle on the calling thread. Returns false once the
  /// sources are exhausted (or stop() was called).
  bool step();

  /// Runs step() on a background thread until the sources end.
  void start();
  void stop();
  /// Blocks until the background thread finishes.
  void wait();
  bool running() const { return running_; }
  bool finished() const { return finished_; }

  /// Applies a control message and returns the reply
  /// {"re": id, "ok": true|false, ...}. Thread-safe.
  nlohmann::json control(const nlohmann::json& message);

  std::size_t bundles_published() const { return published_; }
  const PipelineConfig& config() const { return config_; }
  /// Manifest of the last recording finished (by stop_record or end of stream).
  std::optional<SessionManifest> last_recording() const;
  const std::shared_ptr<StubRegistry>& stubs() const { return stubs_; }

  class Reference;

 private:
  struct Mail {
    nlohmann::json message;
    std::promise<nlohmann::json> reply;
  };

  void ensure_sources();
  void process(SyncedBundle&& bundle);
  void publish(const PipelineEvent& event);
  void drain_mailbox();
  nlohmann::json apply(const nlohmann::json& message);
  nlohmann::json status_json() const;
  void begin_recording(const std::filesystem::path& dir, const RecordOutputs& outputs);
  std::optional<SessionManifest> end_recording();
  TongueContour contour_of(const ImageFrame& us_full, ImageFrame* pred_out) const;
  ImageFrame crop_us(const ImageFrame& us_full) const;
  void finish_streams();
  bool offline() const;

  PipelineConfig config_;
  std::shared_ptr<StubRegistry> stubs_;
  std::unique_ptr<DetectorBackend> detector_;
  std::unique_ptr<SegmentationProvider> segmenter_;
  CompositeOptions composite_options_;

  std::shared_ptr<FrameSource> rgb_source_, us_source_;
  std::shared_ptr<AudioSource> audio_source_;
  std::unique_ptr<BoundedQueue<ImageFrame>> rgb_q_, us_q_;
  std::unique_ptr<BoundedQueue<AudioChunk>> audio_q_;
  std::unique_ptr<SourcePump<ImageFrame>> rgb_pump_, us_pump_;
  std::unique_ptr<SourcePump<AudioChunk>> audio_pump_;
  std::unique_ptr<Pairer> pairer_;

  // Processing state, touched only by whoever currently runs step().
  std::optional<CalibrationProfile> calibration_;
  std::optional<KeypointPair> last_markers_;
  BlendWeights weights_;
  bool frozen_ = false;
  std::shared_ptr<const PublishedBundle> frozen_bundle_;
  std::unique_ptr<Reference> reference_;
  std::shared_ptr<const PublishedBundle> last_bundle_;
  std::unique_ptr<SessionRecorder> recorder_;
  std::optional<std::pair<std::filesystem::path, RecordOutputs>> pending_recording_;
  std::optional<SessionManifest> last_recording_;
  std::int64_t recorder_ordinal_ = 0;
  std::optional<std::pair<std::int64_t, std::optional<ContourStats>>> last_metrics_;
  std::int64_t index_ = 0;
  std::map<std::string, StageLatency> latency_;
  std::size_t markers_lost_ = 0;
  std::size_t stalls_ = 0;
  bool stalled_ = false;
  std::optional<std::chrono::steady_clock::time_point> first_bundle_at_;
  std::chrono::steady_clock::time_point last_bundle_at_;

  mutable std::mutex subscribers_mutex_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;

  mutable std::mutex mail_mutex_;
  std::deque<std::shared_ptr<Mail>> mailbox_;
  std::mutex step_mutex_;  // serialises step() and inline control
  std::atomic<bool> running_{false};
  std::atomic<bool> finished_{false};
  std::atomic<bool> stop_{false};
  std::atomic<std::size_t> published_{0};
  std::thread thread_;
};

/// Runs segmentation and contour extraction over the recorded ultrasound
/// frames of a session, cropping with the session's calibration when present.
std::vector<RecordedContour> extract_session_contours(const std::filesystem::path& dir, ExtractionMethod method,
                                                      double threshold, int max_gap = kDefaultMaxGap,
                                                      const std::string& provider = "intensity");

}  // namespace usf
