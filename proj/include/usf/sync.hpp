#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "usf/image.hpp"
#include "usf/queue.hpp"

namespace usf {

struct AudioChunk {
  std::int64_t timestamp_us = 0;
  int sample_rate_hz = 16000;
  std::vector<std::int16_t> samples;  // mono PCM16

  std::int64_t duration_us() const {
    return static_cast<std::int64_t>(samples.size()) * 1'000'000 / sample_rate_hz;
  }
  bool covers(std::int64_t t) const { return t >= timestamp_us && t < timestamp_us + duration_us(); }
  friend bool operator==(const AudioChunk&, const AudioChunk&) = default;
};

double rms(const AudioChunk& chunk);

struct SyncedBundle {
  ImageFrame rgb;
  ImageFrame us;
  std::optional<AudioChunk> audio;
  std::int64_t bundle_ts_us = 0;
  std::int64_t us_skew_us = 0;     // us.timestamp - bundle_ts
  std::int64_t audio_skew_us = 0;  // audio.timestamp - bundle_ts, when audio is present
  bool us_held = false;            // no ultrasound frame within tolerance; last pair reused

  friend bool operator==(const SyncedBundle&, const SyncedBundle&) = default;
};

/// Pull-based producer. next() returns nullopt at end of stream; live
/// sources may block until data arrives or close() is called.
template <typename T>
class Source {
 public:
  virtual ~Source() = default;
  virtual std::optional<T> next() = 0;
  virtual std::string describe() const = 0;
  /// Offline sources (synthetic, replay) are finite and never stall.
  virtual bool live() const { return false; }
  virtual void close() {}
};

using FrameSource = Source<ImageFrame>;
using AudioSource = Source<AudioChunk>;

/// Live-stub source fed by an external producer (a network client or a test).
template <typename T>
class PushSource final : public Source<T> {
 public:
  explicit PushSource(std::string id, std::size_t capacity = 8)
      : id_(std::move(id)), queue_(capacity, OverflowPolicy::DropOldest) {}

  bool push(T item) { return queue_.push(std::move(item)); }
  void close() override { queue_.close(); }
  std::optional<T> next() override { return queue_.pop().item; }
  std::string describe() const override { return "stub:" + id_; }
  bool live() const override { return true; }
  std::size_t dropped() const { return queue_.dropped(); }

 private:
  std::string id_;
  BoundedQueue<T> queue_;
};

/// Runs a source on its own thread and forwards everything into a queue,
/// closing the queue at end of stream.
template <typename T>
class SourcePump {
 public:
  SourcePump(std::shared_ptr<Source<T>> source, BoundedQueue<T>& queue)
      : source_(std::move(source)), queue_(queue), thread_([this] { run(); }) {}
  ~SourcePump() { stop(); }

  SourcePump(const SourcePump&) = delete;
  SourcePump& operator=(const SourcePump&) = delete;

  void stop() {
    stop_ = true;
    source_->close();
    queue_.close();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void run() {
    while (!stop_) {
      std::optional<T> item = source_->next();
      if (!item || !queue_.push(std::move(*item))) break;
    }
    queue_.close();
  }

  std::shared_ptr<Source<T>> source_;
  BoundedQueue<T>& queue_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

struct SyncConfig {
  std::int64_t tolerance_us = 16'667;
  std::int64_t stall_timeout_us = 500'000;
  /// When set, queue reads give up after this much wall time (live sources).
  /// Offline sources leave it unset so pairing never depends on scheduling.
  std::optional<std::chrono::microseconds> wall_wait;
};

struct PairerStats {
  std::size_t bundles = 0;
  std::size_t held = 0;
  std::size_t unpaired_rgb = 0;
  std::size_t non_monotone_rgb = 0;
};

/// Pairs every RGB frame (the master clock) with the nearest ultrasound frame
/// and the audio chunk covering its timestamp.
///
/// When no ultrasound frame lies within tolerance the last paired frame is
/// held and the bundle is flagged; once the held frame is more than
/// stall_timeout older than the RGB clock (or, for live queues, nothing
/// arrives within stall_timeout of wall time) next() throws SourceStalled.
class Pairer {
 public:
  Pairer(BoundedQueue<ImageFrame>& rgb, BoundedQueue<ImageFrame>& us, BoundedQueue<AudioChunk>* audio,
         SyncConfig config);

  std::optional<SyncedBundle> next();
  const PairerStats& stats() const { return stats_; }

 private:
  template <typename T>
  typename BoundedQueue<T>::Popped pull(BoundedQueue<T>& q, std::optional<std::chrono::microseconds> wait);
  void fill_us(std::int64_t t);
  std::optional<AudioChunk> audio_for(std::int64_t t);

  BoundedQueue<ImageFrame>& rgb_;
  BoundedQueue<ImageFrame>& us_;
  BoundedQueue<AudioChunk>* audio_;
  SyncConfig config_;
  std::deque<ImageFrame> us_buf_;
  std::optional<ImageFrame> last_us_;
  bool us_closed_ = false;
  std::deque<AudioChunk> audio_buf_;
  bool audio_closed_ = false;
  std::optional<std::int64_t> last_ts_;
  PairerStats stats_;
};

/// Convenience for offline data: pairs pre-materialised streams.
std::vector<SyncedBundle> pair_streams(const std::vector<ImageFrame>& rgb, const std::vector<ImageFrame>& us,
                                       const std::vector<AudioChunk>& audio, const SyncConfig& config = {});

/// i * 1'000'000 / fps with integer division.
inline std::int64_t frame_timestamp_us(std::int64_t index, int fps) { return index * 1'000'000 / fps; }

}  // namespace usf
