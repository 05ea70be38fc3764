#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "usf/contour.hpp"
#include "usf/image.hpp"
#include "usf/pose.hpp"
#include "usf/sync.hpp"

namespace usf {

/// What a recorder writes. CONTOURS and AUDIO are not frame streams.
enum class RecordOutput { Rgb, Us, Pred, Composite, Contours, Audio };
using RecordOutputs = std::set<RecordOutput>;

RecordOutputs all_record_outputs();
std::optional<RecordOutput> parse_record_output(std::string_view name);

struct FrameRecord {
  std::int64_t ordinal = 0;
  std::int64_t timestamp_us = 0;
  std::string file;  // relative to the session directory
  std::uint32_t crc32 = 0;
  std::uint64_t size = 0;
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct StreamDescriptor {
  StreamId id = StreamId::Rgb;
  PixelFormat pixel_format = PixelFormat::Rgb8;
  FrameDims dims;
  std::vector<FrameRecord> frames;
  friend bool operator==(const StreamDescriptor&, const StreamDescriptor&) = default;
};

struct AudioChunkRecord {
  std::int64_t timestamp_us = 0;
  std::uint64_t sample_offset = 0;
  std::uint64_t sample_count = 0;
  friend bool operator==(const AudioChunkRecord&, const AudioChunkRecord&) = default;
};

struct AudioDescriptor {
  int sample_rate = 0;
  std::uint64_t sample_count = 0;
  std::string file = "audio.wav";
  std::uint32_t data_crc32 = 0;  // over the PCM payload bytes
  std::vector<AudioChunkRecord> chunks;
  friend bool operator==(const AudioDescriptor&, const AudioDescriptor&) = default;
};

struct ContoursDescriptor {
  std::string file = "contours.jsonl";
  std::uint64_t count = 0;
  std::uint64_t size = 0;
  std::uint32_t crc32 = 0;
  friend bool operator==(const ContoursDescriptor&, const ContoursDescriptor&) = default;
};

struct SessionManifest {
  int format_version = 1;
  std::string session_id;
  std::string created_at;
  std::vector<StreamDescriptor> streams;
  std::optional<AudioDescriptor> audio;
  std::optional<ContoursDescriptor> contours;
  std::optional<CalibrationProfile> calibration;
  nlohmann::json config = nlohmann::json::object();

  const StreamDescriptor* stream(StreamId id) const;
  nlohmann::json to_json() const;
  static SessionManifest from_json(const nlohmann::json& j);
};

inline constexpr const char* kManifestFile = "manifest.json";

struct RecorderOptions {
  std::string session_id;  // generated from the clock when empty
  std::string created_at;  // ISO-8601 UTC; current time when empty
  std::optional<CalibrationProfile> calibration;
  nlohmann::json config = nlohmann::json::object();
  int png_compression = 1;
  /// Manifest checkpoint cadence in stream time, bounding what a crash loses.
  std::int64_t checkpoint_us = 1'000'000;
  /// Encode and write on a background thread (completion order matches call order).
  bool async = true;
  /// PNG encoder threads when async; 0 picks hardware concurrency.
  unsigned encoder_threads = 0;
  /// Submissions block once this many jobs are pending, so a slow disk
  /// throttles the caller instead of growing memory without bound.
  std::size_t max_pending = 64;
};

/// Writes a session directory: `<stream>/<ordinal>.png` frames, audio.wav,
/// contours.jsonl and manifest.json with per-file CRC32.
///
/// Frames whose timestamp does not advance their stream (a held ultrasound
/// frame reused by several bundles) are written once.
class SessionRecorder {
 public:
  /// Throws DirNotWritable before anything is recorded.
  SessionRecorder(std::filesystem::path dir, RecordOutputs outputs, RecorderOptions options = {});
  ~SessionRecorder();

  SessionRecorder(const SessionRecorder&) = delete;
  SessionRecorder& operator=(const SessionRecorder&) = delete;

  void write_frame(RecordOutput output, const ImageFrame& frame);
  void write_audio(const AudioChunk& chunk);
  void write_contour(std::int64_t frame_index, std::int64_t ts, const TongueContour& contour);

  /// Flushes everything and writes the final manifest.
  SessionManifest finish();

  const std::filesystem::path& dir() const { return dir_; }
  const RecordOutputs& outputs() const { return outputs_; }
  bool wants(RecordOutput o) const { return outputs_.count(o) > 0; }

 private:
  struct Job {
    std::function<void()> run;
  };
  void submit(std::function<void()> job);
  void worker();
  void encoder();
  std::shared_future<std::vector<std::uint8_t>> encode_async(std::shared_ptr<const ImageFrame> frame);
  void rethrow_pending();
  void checkpoint_if_due(std::int64_t ts);
  void write_manifest_locked();
  SessionManifest snapshot_locked() const;

  std::filesystem::path dir_;
  RecordOutputs outputs_;
  RecorderOptions options_;

  // Owned by the worker (or the caller when synchronous).
  std::map<StreamId, StreamDescriptor> streams_;
  std::optional<AudioDescriptor> audio_;
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> audio_file_{nullptr, std::fclose};
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> contour_file_{nullptr, std::fclose};
  ContoursDescriptor contours_;
  std::optional<std::int64_t> last_checkpoint_ts_;

  std::map<StreamId, std::int64_t> last_submitted_ts_;
  bool finished_ = false;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool stop_ = false;
  std::exception_ptr error_;
  std::thread thread_;

  std::mutex enc_mutex_;
  std::condition_variable enc_cv_;
  std::deque<std::function<void()>> enc_jobs_;
  bool enc_stop_ = false;
  std::vector<std::thread> encoders_;
};

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> problems;
  std::map<std::string, std::size_t> frame_counts;
};

/// Loads manifest.json. Throws SessionNotFound when absent and
/// ManifestCorrupt when it does not parse.
SessionManifest load_manifest(const std::filesystem::path& dir);

/// Checks that every indexed file exists with the recorded size and CRC32 and
/// that on-disk frame counts match the manifest. `decode` also decodes each
/// PNG and checks declared dims/format.
VerifyReport verify_session(const std::filesystem::path& dir, bool decode = false);

/// Frame source reproducing one recorded stream byte-for-byte.
class ReplayFrameSource final : public FrameSource {
 public:
  ReplayFrameSource(std::filesystem::path dir, StreamDescriptor stream);
  std::optional<ImageFrame> next() override;
  std::string describe() const override;

 private:
  std::filesystem::path dir_;
  StreamDescriptor stream_;
  std::size_t pos_ = 0;
};

class ReplayAudioSource final : public AudioSource {
 public:
  ReplayAudioSource(AudioDescriptor desc, std::vector<std::int16_t> samples);
  std::optional<AudioChunk> next() override;
  std::string describe() const override { return "replay audio"; }

 private:
  AudioDescriptor desc_;
  std::vector<std::int16_t> samples_;
  std::size_t pos_ = 0;
};

struct RecordedContour {
  std::int64_t frame_index = 0;
  std::int64_t ts = 0;
  TongueContour contour;
};

struct ReplaySet {
  SessionManifest manifest;
  std::map<StreamId, std::shared_ptr<FrameSource>> frames;
  std::shared_ptr<AudioSource> audio;
  std::vector<RecordedContour> contours;
};

/// Verifies the session (ManifestCorrupt names the first bad stream) and
/// returns fresh sources for every recorded stream.
ReplaySet replay(const std::filesystem::path& dir);

std::vector<RecordedContour> read_contours_jsonl(const std::filesystem::path& path, const FrameDims& dims);

}  // namespace usf
