#include "usf/session.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "usf/error.hpp"
#include "usf/json_io.hpp"
#include "usf/media_io.hpp"

namespace fs = std::filesystem;

namespace usf {

RecordOutputs all_record_outputs() {
  return {RecordOutput::Rgb, RecordOutput::Us, RecordOutput::Pred, RecordOutput::Composite, RecordOutput::Contours,
          RecordOutput::Audio};
}

std::optional<RecordOutput> parse_record_output(std::string_view name) {
  if (name == "RGB") return RecordOutput::Rgb;
  if (name == "US") return RecordOutput::Us;
  if (name == "PRED") return RecordOutput::Pred;
  if (name == "COMPOSITE") return RecordOutput::Composite;
  if (name == "CONTOURS") return RecordOutput::Contours;
  if (name == "AUDIO") return RecordOutput::Audio;
  return std::nullopt;
}

namespace {

std::optional<StreamId> stream_for(RecordOutput o) {
  switch (o) {
    case RecordOutput::Rgb: return StreamId::Rgb;
    case RecordOutput::Us: return StreamId::Us;
    case RecordOutput::Pred: return StreamId::Pred;
    case RecordOutput::Composite: return StreamId::Composite;
    default: return std::nullopt;
  }
}

std::string stream_dir_name(StreamId id) {
  std::string s(to_string(id));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

std::string frame_file_name(StreamId id, std::int64_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld.png", static_cast<long long>(ordinal));
  return stream_dir_name(id) + "/" + buf;
}

std::string iso_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::uint8_t> wav_header(std::uint64_t samples, int rate) {
  std::vector<std::uint8_t> h = encode_wav({}, rate);
  const std::uint32_t data_bytes = std::uint32_t(samples * 2);
  auto put = [&h](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) h[at + i] = std::uint8_t(v >> (8 * i));
  };
  put(4, 36 + data_bytes);
  put(40, data_bytes);
  return h;
}

void check_io(std::FILE* f, std::size_t want, std::size_t got, const fs::path& path) {
  if (got == want && std::ferror(f) == 0) return;
  if (errno == ENOSPC || errno == EDQUOT) throw Error(ErrorCode::DiskFull, "no space left writing " + path.string());
  throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

const StreamDescriptor* SessionManifest::stream(StreamId id) const {
  for (const auto& s : streams) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

nlohmann::json SessionManifest::to_json() const {
  nlohmann::json j;
  j["format_version"] = format_version;
  j["session_id"] = session_id;
  j["created_at"] = created_at;
  nlohmann::json streams_json = nlohmann::json::array();
  for (const auto& s : streams) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : s.frames) {
      frames.push_back({{"ordinal", f.ordinal}, {"timestamp_us", f.timestamp_us}, {"file", f.file},
                        {"crc32", f.crc32}, {"size", f.size}});
    }
    streams_json.push_back({{"id", to_string(s.id)},
                            {"pixel_format", to_string(s.pixel_format)},
                            {"width", s.dims.width},
                            {"height", s.dims.height},
                            {"frame_count", s.frames.size()},
                            {"frames", frames}});
  }
  j["streams"] = streams_json;
  if (audio) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : audio->chunks) {
      chunks.push_back({{"timestamp_us", c.timestamp_us}, {"sample_offset", c.sample_offset}, {"sample_count", c.sample_count}});
    }
    j["audio"] = {{"file", audio->file},
                  {"sample_rate", audio->sample_rate},
                  {"sample_count", audio->sample_count},
                  {"data_crc32", audio->data_crc32},
                  {"chunks", chunks}};
  } else {
    j["audio"] = nullptr;
  }
  if (contours) {
    j["contours"] = {{"file", contours->file}, {"count", contours->count}, {"size", contours->size}, {"crc32", contours->crc32}};
  } else {
    j["contours"] = nullptr;
  }
  j["calibration"] = calibration ? nlohmann::json(*calibration) : nlohmann::json(nullptr);
  j["config"] = config;
  return j;
}

SessionManifest SessionManifest::from_json(const nlohmann::json& j) {
  SessionManifest m;
  m.format_version = j.at("format_version").get<int>();
  m.session_id = j.at("session_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  for (const auto& s : j.at("streams")) {
    StreamDescriptor d;
    const auto id = parse_stream_id(s.at("id").get<std::string>());
    const auto fmt = parse_pixel_format(s.at("pixel_format").get<std::string>());
    if (!id || !fmt) throw Error(ErrorCode::ManifestCorrupt, "unknown stream id or pixel format in manifest");
    d.id = *id;
    d.pixel_format = *fmt;
    d.dims = {s.at("width").get<int>(), s.at("height").get<int>()};
    for (const auto& f : s.at("frames")) {
      d.frames.push_back({f.at("ordinal").get<std::int64_t>(), f.at("timestamp_us").get<std::int64_t>(),
                          f.at("file").get<std::string>(), f.at("crc32").get<std::uint32_t>(),
                          f.at("size").get<std::uint64_t>()});
    }
    if (s.at("frame_count").get<std::size_t>() != d.frames.size()) {
      throw Error(ErrorCode::ManifestCorrupt, "stream " + std::string(to_string(d.id)) + ": frame_count disagrees with frame table");
    }
    m.streams.push_back(std::move(d));
  }
  if (!j.at("audio").is_null()) {
    const auto& a = j["audio"];
    AudioDescriptor d;
    d.file = a.at("file").get<std::string>();
    d.sample_rate = a.at("sample_rate").get<int>();
    d.sample_count = a.at("sample_count").get<std::uint64_t>();
    d.data_crc32 = a.at("data_crc32").get<std::uint32_t>();
    for (const auto& c : a.at("chunks")) {
      d.chunks.push_back({c.at("timestamp_us").get<std::int64_t>(), c.at("sample_offset").get<std::uint64_t>(),
                          c.at("sample_count").get<std::uint64_t>()});
    }
    m.audio = std::move(d);
  }
  if (!j.at("contours").is_null()) {
    const auto& c = j["contours"];
    m.contours = ContoursDescriptor{c.at("file").get<std::string>(), c.at("count").get<std::uint64_t>(),
                                    c.at("size").get<std::uint64_t>(), c.at("crc32").get<std::uint32_t>()};
  }
  if (!j.at("calibration").is_null()) m.calibration = j["calibration"].get<CalibrationProfile>();
  m.config = j.at("config");
  return m;
}

SessionRecorder::SessionRecorder(fs::path dir, RecordOutputs outputs, RecorderOptions options)
    : dir_(std::move(dir)), outputs_(std::move(outputs)), options_(std::move(options)) {
  if (outputs_.empty()) throw Error(ErrorCode::InvalidArgument, "select at least one recording output");
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) throw Error(ErrorCode::DirNotWritable, dir_.string() + ": " + ec.message());
  const fs::path probe = dir_ / ".write_probe";
  {
    std::FILE* f = std::fopen(probe.c_str(), "wb");
    if (!f) throw Error(ErrorCode::DirNotWritable, dir_.string() + ": " + std::strerror(errno));
    std::fclose(f);
  }
  fs::remove(probe, ec);

  for (RecordOutput o : outputs_) {
    if (auto id = stream_for(o)) {
      fs::create_directories(dir_ / stream_dir_name(*id), ec);
      if (ec) throw Error(ErrorCode::DirNotWritable, ec.message());
      StreamDescriptor d;
      d.id = *id;
      streams_[*id] = d;
    }
  }
  if (wants(RecordOutput::Contours)) {
    contour_file_.reset(std::fopen((dir_ / contours_.file).c_str(), "wb"));
    if (!contour_file_) throw Error(ErrorCode::DirNotWritable, "cannot create contours file");
    contours_.crc32 = std::uint32_t(crc32(0L, Z_NULL, 0));
  }
  if (options_.created_at.empty()) options_.created_at = iso_now();
  if (options_.session_id.empty()) {
    options_.session_id = "s" + std::to_string(std::chrono::system_clock::now().time_since_epoch().count());
  }
  write_manifest_locked();
  if (options_.async) {
    thread_ = std::thread([this] { worker(); });
    unsigned n = options_.encoder_threads ? options_.encoder_threads : std::thread::hardware_concurrency();
    n = std::max(1u, n);
    for (unsigned i = 0; i < n; ++i) encoders_.emplace_back([this] { encoder(); });
  }
}

SessionRecorder::~SessionRecorder() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
      // Destructors must not throw; finish() is the place to observe errors.
    }
  }
}

void SessionRecorder::submit(std::function<void()> job) {
  rethrow_pending();
  if (!options_.async) {
    job();
    return;
  }
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return jobs_.size() < options_.max_pending || error_; });
  jobs_.push_back(std::move(job));
  cv_.notify_all();
}

void SessionRecorder::encoder() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lock(enc_mutex_);
      enc_cv_.wait(lock, [&] { return enc_stop_ || !enc_jobs_.empty(); });
      if (enc_jobs_.empty()) return;
      job = std::move(enc_jobs_.front());
      enc_jobs_.pop_front();
    }
    job();
  }
}

std::shared_future<std::vector<std::uint8_t>> SessionRecorder::encode_async(std::shared_ptr<const ImageFrame> frame) {
  auto task = std::make_shared<std::packaged_task<std::vector<std::uint8_t>()>>(
      [frame, level = options_.png_compression] { return encode_png(*frame, level); });
  std::shared_future<std::vector<std::uint8_t>> result = task->get_future().share();
  if (encoders_.empty()) {
    (*task)();
    return result;
  }
  {
    std::lock_guard lock(enc_mutex_);
    enc_jobs_.push_back([task] { (*task)(); });
  }
  enc_cv_.notify_one();
  return result;
}

void SessionRecorder::worker() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stop_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
      cv_.notify_all();
    }
    if (error_) continue;  // drain without doing further IO after a failure
    try {
      job();
    } catch (...) {
      std::lock_guard lock(mutex_);
      error_ = std::current_exception();
    }
  }
}

void SessionRecorder::rethrow_pending() {
  std::lock_guard lock(mutex_);
  if (error_) std::rethrow_exception(error_);
}

void SessionRecorder::write_frame(RecordOutput output, const ImageFrame& frame) {
  const auto id = stream_for(output);
  if (!id) throw Error(ErrorCode::InvalidArgument, "not a frame output");
  if (!wants(output) || finished_) return;
  auto last = last_submitted_ts_.find(*id);
  if (last != last_submitted_ts_.end() && frame.timestamp_us <= last->second) return;
  last_submitted_ts_[*id] = frame.timestamp_us;

  auto shared = std::make_shared<const ImageFrame>(frame);
  auto encoded = encode_async(shared);
  submit([this, sid = *id, shared, encoded] {
    StreamDescriptor& d = streams_[sid];
    if (d.frames.empty()) {
      d.pixel_format = shared->pixel_format;
      d.dims = shared->dims();
    } else if (d.pixel_format != shared->pixel_format || d.dims != shared->dims()) {
      throw Error(ErrorCode::DimsMismatch, "stream " + std::string(to_string(sid)) + " changed format mid-session");
    }
    const std::int64_t ordinal = std::int64_t(d.frames.size());
    const std::string rel = frame_file_name(sid, ordinal);
    const std::vector<std::uint8_t>& png = encoded.get();
    write_file(dir_ / rel, png);
    d.frames.push_back({ordinal, shared->timestamp_us, rel, crc32_of(png), png.size()});
    checkpoint_if_due(shared->timestamp_us);
  });
}

void SessionRecorder::write_audio(const AudioChunk& chunk) {
  if (!wants(RecordOutput::Audio) || finished_) return;
  auto shared = std::make_shared<AudioChunk>(chunk);
  submit([this, shared] {
    const fs::path path = dir_ / "audio.wav";
    if (!audio_) {
      audio_ = AudioDescriptor{};
      audio_->sample_rate = shared->sample_rate_hz;
      audio_->data_crc32 = std::uint32_t(crc32(0L, Z_NULL, 0));
      audio_file_.reset(std::fopen(path.c_str(), "wb+"));
      if (!audio_file_) throw Error(ErrorCode::IoError, "cannot create " + path.string());
      const auto header = wav_header(0, audio_->sample_rate);
      check_io(audio_file_.get(), header.size(), std::fwrite(header.data(), 1, header.size(), audio_file_.get()), path);
    }
    if (shared->sample_rate_hz != audio_->sample_rate) throw Error(ErrorCode::InvalidArgument, "audio sample rate changed mid-session");
    if (!audio_->chunks.empty() && shared->timestamp_us <= audio_->chunks.back().timestamp_us) return;
    std::vector<std::uint8_t> bytes(shared->samples.size() * 2);
    for (std::size_t i = 0; i < shared->samples.size(); ++i) {
      const auto v = std::uint16_t(shared->samples[i]);
      bytes[2 * i] = std::uint8_t(v);
      bytes[2 * i + 1] = std::uint8_t(v >> 8);
    }
    check_io(audio_file_.get(), bytes.size(), std::fwrite(bytes.data(), 1, bytes.size(), audio_file_.get()), path);
    audio_->data_crc32 = std::uint32_t(crc32(audio_->data_crc32, bytes.data(), uInt(bytes.size())));
    audio_->chunks.push_back({shared->timestamp_us, audio_->sample_count, shared->samples.size()});
    audio_->sample_count += shared->samples.size();
    checkpoint_if_due(shared->timestamp_us);
  });
}

void SessionRecorder::write_contour(std::int64_t frame_index, std::int64_t ts, const TongueContour& contour) {
  if (!wants(RecordOutput::Contours) || finished_) return;
  auto line = std::make_shared<std::string>(contour_record(frame_index, ts, contour).dump() + "\n");
  submit([this, line, ts] {
    const auto* data = reinterpret_cast<const std::uint8_t*>(line->data());
    check_io(contour_file_.get(), line->size(), std::fwrite(data, 1, line->size(), contour_file_.get()), dir_ / contours_.file);
    contours_.crc32 = std::uint32_t(crc32(contours_.crc32, data, uInt(line->size())));
    contours_.size += line->size();
    ++contours_.count;
    checkpoint_if_due(ts);
  });
}

void SessionRecorder::checkpoint_if_due(std::int64_t ts) {
  if (last_checkpoint_ts_ && ts - *last_checkpoint_ts_ < options_.checkpoint_us) return;
  last_checkpoint_ts_ = ts;
  write_manifest_locked();
}

SessionManifest SessionRecorder::snapshot_locked() const {
  SessionManifest m;
  m.session_id = options_.session_id;
  m.created_at = options_.created_at;
  for (const auto& [id, d] : streams_) m.streams.push_back(d);
  m.audio = audio_;
  if (wants(RecordOutput::Contours)) m.contours = contours_;
  m.calibration = options_.calibration;
  m.config = options_.config;
  return m;
}

void SessionRecorder::write_manifest_locked() {
  if (audio_file_) {
    const auto header = wav_header(audio_->sample_count, audio_->sample_rate);
    std::fseek(audio_file_.get(), 0, SEEK_SET);
    check_io(audio_file_.get(), header.size(), std::fwrite(header.data(), 1, header.size(), audio_file_.get()), dir_ / "audio.wav");
    std::fseek(audio_file_.get(), 0, SEEK_END);
    std::fflush(audio_file_.get());
  }
  if (contour_file_) std::fflush(contour_file_.get());
  const fs::path tmp = dir_ / "manifest.json.tmp";
  const std::string text = snapshot_locked().to_json().dump(1) + "\n";
  write_file(tmp, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  std::error_code ec;
  fs::rename(tmp, dir_ / kManifestFile, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot publish manifest: " + ec.message());
}

SessionManifest SessionRecorder::finish() {
  if (finished_) return snapshot_locked();
  finished_ = true;
  if (thread_.joinable()) {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
      cv_.notify_all();
    }
    thread_.join();
  }
  {
    std::lock_guard lock(enc_mutex_);
    enc_stop_ = true;
  }
  enc_cv_.notify_all();
  for (auto& t : encoders_) t.join();
  encoders_.clear();
  rethrow_pending();
  write_manifest_locked();
  audio_file_.reset();
  contour_file_.reset();
  return snapshot_locked();
}

SessionManifest load_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestFile;
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::SessionNotFound, "no manifest.json in " + dir.string());
  std::ifstream in(path);
  try {
    return SessionManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestCorrupt, "manifest.json: " + std::string(e.what()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ManifestCorrupt) throw;
    throw Error(ErrorCode::ManifestCorrupt, e.what());
  }
}

VerifyReport verify_session(const fs::path& dir, bool decode) {
  const SessionManifest m = load_manifest(dir);
  VerifyReport report;
  auto problem = [&report](std::string text) {
    report.ok = false;
    report.problems.push_back(std::move(text));
  };
  for (const StreamDescriptor& s : m.streams) {
    const std::string name(to_string(s.id));
    report.frame_counts[name] = s.frames.size();
    std::int64_t prev_ts = 0;
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      const FrameRecord& f = s.frames[i];
      if (i > 0 && f.timestamp_us <= prev_ts) problem("stream " + name + ": timestamps not increasing at frame " + std::to_string(i));
      prev_ts = f.timestamp_us;
      const fs::path p = dir / f.file;
      std::error_code ec;
      const auto size = fs::file_size(p, ec);
      if (ec) {
        problem("stream " + name + ": frame " + std::to_string(f.ordinal) + " missing (" + f.file + ")");
        continue;
      }
      if (size != f.size) {
        problem("stream " + name + ": frame " + std::to_string(f.ordinal) + " (" + f.file + ") has " +
                std::to_string(size) + " bytes, manifest says " + std::to_string(f.size));
        continue;
      }
      const std::vector<std::uint8_t> bytes = read_file(p);
      if (crc32_of(bytes) != f.crc32) {
        problem("stream " + name + ": frame " + std::to_string(f.ordinal) + " (" + f.file + ") fails CRC32");
        continue;
      }
      if (decode) {
        try {
          const ImageFrame img = decode_png(bytes);
          if (img.dims() != s.dims || img.pixel_format != s.pixel_format) {
            problem("stream " + name + ": frame " + std::to_string(f.ordinal) + " does not match declared dims/format");
          }
        } catch (const Error& e) {
          problem("stream " + name + ": frame " + std::to_string(f.ordinal) + " does not decode: " + e.what());
        }
      }
    }
    // On-disk count must agree with the manifest.
    std::size_t on_disk = 0;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir / stream_dir_name(s.id), ec)) {
      if (entry.path().extension() == ".png") ++on_disk;
    }
    if (on_disk != s.frames.size()) {
      problem("stream " + name + ": " + std::to_string(on_disk) + " frame files on disk, manifest declares " +
              std::to_string(s.frames.size()));
    }
  }
  if (m.audio) {
    try {
      const std::vector<std::uint8_t> bytes = read_file(dir / m.audio->file);
      const WavData wav = decode_wav(bytes);
      std::vector<std::uint8_t> pcm(bytes.end() - std::ptrdiff_t(wav.samples.size() * 2), bytes.end());
      if (wav.samples.size() != m.audio->sample_count || wav.sample_rate != m.audio->sample_rate) {
        problem("stream AUDIO: sample count/rate disagree with manifest");
      } else if (crc32_of(pcm) != m.audio->data_crc32) {
        problem("stream AUDIO: fails CRC32");
      }
    } catch (const Error& e) {
      problem(std::string("stream AUDIO: ") + e.what());
    }
  }
  if (m.contours) {
    std::error_code ec;
    const auto size = fs::file_size(dir / m.contours->file, ec);
    if (ec || size != m.contours->size) {
      problem("stream CONTOURS: size disagrees with manifest");
    } else if (crc32_of(read_file(dir / m.contours->file)) != m.contours->crc32) {
      problem("stream CONTOURS: fails CRC32");
    }
  }
  return report;
}

ReplayFrameSource::ReplayFrameSource(fs::path dir, StreamDescriptor stream) : dir_(std::move(dir)), stream_(std::move(stream)) {}

std::optional<ImageFrame> ReplayFrameSource::next() {
  if (pos_ >= stream_.frames.size()) return std::nullopt;
  const FrameRecord& rec = stream_.frames[pos_++];
  const std::vector<std::uint8_t> bytes = read_file(dir_ / rec.file);
  if (bytes.size() != rec.size || crc32_of(bytes) != rec.crc32) {
    throw Error(ErrorCode::ManifestCorrupt, "stream " + std::string(to_string(stream_.id)) + ": " + rec.file + " changed on disk");
  }
  ImageFrame f = decode_png(bytes);
  f.stream_id = stream_.id;
  f.timestamp_us = rec.timestamp_us;
  return f;
}

std::string ReplayFrameSource::describe() const { return "replay:" + dir_.string() + " " + std::string(to_string(stream_.id)); }

ReplayAudioSource::ReplayAudioSource(AudioDescriptor desc, std::vector<std::int16_t> samples)
    : desc_(std::move(desc)), samples_(std::move(samples)) {}

std::optional<AudioChunk> ReplayAudioSource::next() {
  if (pos_ >= desc_.chunks.size()) return std::nullopt;
  const AudioChunkRecord& rec = desc_.chunks[pos_++];
  if (rec.sample_offset + rec.sample_count > samples_.size()) throw Error(ErrorCode::ManifestCorrupt, "stream AUDIO: chunk past end of data");
  AudioChunk c;
  c.timestamp_us = rec.timestamp_us;
  c.sample_rate_hz = desc_.sample_rate;
  c.samples.assign(samples_.begin() + std::ptrdiff_t(rec.sample_offset),
                   samples_.begin() + std::ptrdiff_t(rec.sample_offset + rec.sample_count));
  return c;
}

std::vector<RecordedContour> read_contours_jsonl(const fs::path& path, const FrameDims& dims) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<RecordedContour> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RecordedContour rc;
      rc.frame_index = j.at("frame_index").get<std::int64_t>();
      rc.ts = j.at("ts").get<std::int64_t>();
      rc.contour.source_dims = dims;
      for (const auto& p : j.at("points")) rc.contour.points.push_back(point_from_json(p));
      out.push_back(std::move(rc));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ManifestCorrupt, "stream CONTOURS: " + std::string(e.what()));
    }
  }
  return out;
}

ReplaySet replay(const fs::path& dir) {
  const VerifyReport report = verify_session(dir);
  if (!report.ok) throw Error(ErrorCode::ManifestCorrupt, report.problems.front());
  ReplaySet set;
  set.manifest = load_manifest(dir);
  for (const StreamDescriptor& s : set.manifest.streams) {
    set.frames[s.id] = std::make_shared<ReplayFrameSource>(dir, s);
  }
  if (set.manifest.audio) {
    WavData wav = decode_wav(read_file(dir / set.manifest.audio->file));
    set.audio = std::make_shared<ReplayAudioSource>(*set.manifest.audio, std::move(wav.samples));
  }
  if (set.manifest.contours) {
    FrameDims dims;
    if (set.manifest.calibration) dims = {set.manifest.calibration->us_crop.width, set.manifest.calibration->us_crop.height};
    set.contours = read_contours_jsonl(dir / set.manifest.contours->file, dims);
  }
  return set;
}

}  // namespace usf
