#include "usf/sync.hpp"

#include <cmath>
#include <cstdlib>

#include "usf/error.hpp"

namespace usf {

double rms(const AudioChunk& chunk) {
  if (chunk.samples.empty()) return 0.0;
  double ss = 0.0;
  for (std::int16_t s : chunk.samples) ss += double(s) * s;
  return std::sqrt(ss / double(chunk.samples.size())) / 32768.0;
}

Pairer::Pairer(BoundedQueue<ImageFrame>& rgb, BoundedQueue<ImageFrame>& us, BoundedQueue<AudioChunk>* audio,
               SyncConfig config)
    : rgb_(rgb), us_(us), audio_(audio), config_(config), audio_closed_(audio == nullptr) {}

template <typename T>
typename BoundedQueue<T>::Popped Pairer::pull(BoundedQueue<T>& q, std::optional<std::chrono::microseconds> wait) {
  return q.pop(wait);
}

void Pairer::fill_us(std::int64_t t) {
  // Lookahead only needs the first frame at or after t; anything later is
  // farther away. Live queues get at most one tolerance of wall time.
  std::optional<std::chrono::microseconds> wait;
  if (config_.wall_wait) wait = std::chrono::microseconds(config_.tolerance_us);
  while (!us_closed_ && (us_buf_.empty() || us_buf_.back().timestamp_us < t)) {
    auto popped = pull(us_, wait);
    if (popped.status == BoundedQueue<ImageFrame>::Status::Timeout) break;
    if (popped.status == BoundedQueue<ImageFrame>::Status::Closed) {
      us_closed_ = true;
      break;
    }
    if (!us_buf_.empty() && popped.item->timestamp_us <= us_buf_.back().timestamp_us) continue;
    us_buf_.push_back(std::move(*popped.item));
  }
}

std::optional<AudioChunk> Pairer::audio_for(std::int64_t t) {
  if (!audio_) return std::nullopt;
  std::optional<std::chrono::microseconds> wait;
  if (config_.wall_wait) wait = std::chrono::microseconds(config_.tolerance_us);
  while (!audio_closed_ && (audio_buf_.empty() || audio_buf_.back().timestamp_us + audio_buf_.back().duration_us() <= t)) {
    auto popped = pull(*audio_, wait);
    if (popped.status == BoundedQueue<AudioChunk>::Status::Timeout) break;
    if (popped.status == BoundedQueue<AudioChunk>::Status::Closed) {
      audio_closed_ = true;
      break;
    }
    audio_buf_.push_back(std::move(*popped.item));
  }
  while (!audio_buf_.empty() && audio_buf_.front().timestamp_us + audio_buf_.front().duration_us() <= t) {
    audio_buf_.pop_front();
  }
  if (!audio_buf_.empty() && audio_buf_.front().covers(t)) return audio_buf_.front();
  return std::nullopt;
}

std::optional<SyncedBundle> Pairer::next() {
  for (;;) {
    std::optional<std::chrono::microseconds> rgb_wait;
    if (config_.wall_wait) rgb_wait = std::chrono::microseconds(config_.stall_timeout_us);
    auto popped = pull(rgb_, rgb_wait);
    if (popped.status == BoundedQueue<ImageFrame>::Status::Closed) return std::nullopt;
    if (popped.status == BoundedQueue<ImageFrame>::Status::Timeout) {
      throw Error(ErrorCode::SourceStalled, "RGB source produced nothing for " +
                                                std::to_string(config_.stall_timeout_us / 1000) + " ms");
    }
    ImageFrame rgb = std::move(*popped.item);
    const std::int64_t t = rgb.timestamp_us;
    if (last_ts_ && t <= *last_ts_) {
      ++stats_.non_monotone_rgb;
      continue;
    }

    fill_us(t);
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < us_buf_.size(); ++i) {
      const std::int64_t d = std::llabs(us_buf_[i].timestamp_us - t);
      if (!best || d < std::llabs(us_buf_[*best].timestamp_us - t)) best = i;
    }

    SyncedBundle bundle;
    if (best && std::llabs(us_buf_[*best].timestamp_us - t) <= config_.tolerance_us) {
      us_buf_.erase(us_buf_.begin(), us_buf_.begin() + static_cast<std::ptrdiff_t>(*best));
      last_us_ = us_buf_.front();
      bundle.us = us_buf_.front();
    } else {
      // Frames too old for this RGB frame are too old for every later one.
      while (!us_buf_.empty() && us_buf_.front().timestamp_us < t - config_.tolerance_us) us_buf_.pop_front();
      if (last_us_) {
        bundle.us = *last_us_;
      } else if (!us_buf_.empty()) {
        bundle.us = us_buf_.front();
      } else {
        // Nothing to pair with yet.
        ++stats_.unpaired_rgb;
        continue;
      }
      bundle.us_held = true;
      if (t - bundle.us.timestamp_us > config_.stall_timeout_us) {
        throw Error(ErrorCode::SourceStalled, "no ultrasound frame for " +
                                                  std::to_string((t - bundle.us.timestamp_us) / 1000) + " ms");
      }
      ++stats_.held;
    }

    bundle.bundle_ts_us = t;
    bundle.us_skew_us = bundle.us.timestamp_us - t;
    bundle.audio = audio_for(t);
    if (bundle.audio) bundle.audio_skew_us = bundle.audio->timestamp_us - t;
    bundle.rgb = std::move(rgb);
    last_ts_ = t;
    ++stats_.bundles;
    return bundle;
  }
}

std::vector<SyncedBundle> pair_streams(const std::vector<ImageFrame>& rgb, const std::vector<ImageFrame>& us,
                                       const std::vector<AudioChunk>& audio, const SyncConfig& config) {
  BoundedQueue<ImageFrame> rq(rgb.size() + 1, OverflowPolicy::Block), uq(us.size() + 1, OverflowPolicy::Block);
  BoundedQueue<AudioChunk> aq(audio.size() + 1, OverflowPolicy::Block);
  for (const auto& f : rgb) rq.push(f);
  for (const auto& f : us) uq.push(f);
  for (const auto& a : audio) aq.push(a);
  rq.close();
  uq.close();
  aq.close();
  SyncConfig offline = config;
  offline.wall_wait.reset();
  Pairer pairer(rq, uq, audio.empty() ? nullptr : &aq, offline);
  std::vector<SyncedBundle> out;
  while (auto b = pairer.next()) out.push_back(std::move(*b));
  return out;
}

}  // namespace usf
