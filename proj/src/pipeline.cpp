#include "usf/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "usf/error.hpp"
#include "usf/json_io.hpp"
#include "usf/media_io.hpp"
#include "usf/synthetic.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace usf {

namespace {

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

Layer empty_layer(const FrameDims& canvas) {
  return {ImageFrame(StreamId::Us, 0, canvas.width, canvas.height, PixelFormat::Gray8),
          std::vector<std::uint8_t>(canvas.area(), 0)};
}

void probe_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".usf-probe";
  {
    std::ofstream out(probe);
    if (ec || !out) throw Error(ErrorCode::DirNotWritable, "cannot write to " + dir.string());
  }
  fs::remove(probe, ec);
}

std::string default_record_dir() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "rec-%Y%m%d-%H%M%S", &tm);
  return (fs::path("sessions") / buf).string();
}

nlohmann::json latency_json(const StageLatency& l) {
  return {{"last", l.last_ms}, {"mean", l.mean_ms()}, {"max", l.max_ms}, {"count", l.count}};
}

nlohmann::json metrics_json(const std::optional<ContourStats>& m) {
  if (!m) return {{"msd", nullptr}, {"hausdorff", nullptr}};
  return {{"msd", m->msd}, {"hausdorff", m->hausdorff}};
}

RecordOutputs parse_outputs(const nlohmann::json& list) {
  RecordOutputs out;
  for (const auto& o : list) {
    const auto parsed = parse_record_output(o.get<std::string>());
    if (!parsed) throw Error(ErrorCode::InvalidArgument, "unknown record output " + o.dump());
    out.insert(*parsed);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "record outputs must not be empty");
  return out;
}

}  // namespace

void StageLatency::add(double ms) {
  last_ms = ms;
  total_ms += ms;
  max_ms = std::max(max_ms, ms);
  ++count;
}

/// Plays back one sample per bundle, looping at its end. A synthetic
/// reference renders ultrasound frames; a recorded session supplies its
/// contours (or, without them, its ultrasound frames).
class Pipeline::Reference {
 public:
  struct Sample {
    std::optional<ImageFrame> frame;       // full ultrasound frame relabelled REF
    std::optional<TongueContour> contour;  // unset: derive from the frame
  };

  std::string id;
  std::unique_ptr<UsScene> scene;
  std::int64_t scene_frames = 0;  // 0 = unbounded
  int scene_fps = 30;
  fs::path dir;
  std::vector<FrameRecord> us_frames;
  std::vector<RecordedContour> contours;
  std::int64_t cursor = 0;

  std::size_t length() const {
    if (scene) return std::size_t(scene_frames);
    return contours.empty() ? us_frames.size() : contours.size();
  }

  Sample next() {
    Sample s;
    const std::int64_t i = cursor++;
    if (scene) {
      const std::int64_t k = scene_frames > 0 ? i % scene_frames : i;
      s.frame = scene->render(k).frame;
      s.frame->stream_id = StreamId::Ref;
      return s;
    }
    if (!contours.empty()) {
      const RecordedContour& rc = contours[std::size_t(i) % contours.size()];
      s.contour = rc.contour;
      if (!us_frames.empty()) {
        auto it = std::upper_bound(us_frames.begin(), us_frames.end(), rc.ts,
                                   [](std::int64_t t, const FrameRecord& f) { return t < f.timestamp_us; });
        if (it != us_frames.begin()) --it;
        s.frame = load(*it);
      }
      return s;
    }
    s.frame = load(us_frames[std::size_t(i) % us_frames.size()]);
    return s;
  }

 private:
  ImageFrame load(const FrameRecord& rec) const {
    ImageFrame f = read_png(dir / rec.file);
    f.stream_id = StreamId::Ref;
    f.timestamp_us = rec.timestamp_us;
    return f;
  }
};

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<StubRegistry> stubs)
    : config_(std::move(config)), stubs_(std::move(stubs)) {
  config_.validate();
  config_.resolve_calibration();
  calibration_ = config_.calibration;
  weights_ = config_.weights;
  detector_ = make_detector(config_.detector_backend, config_.color_blob);
  segmenter_ = make_segmentation_provider(config_.segmentation.provider);
  composite_options_.mode = config_.blend_mode;
  if (!stubs_) stubs_ = std::make_shared<StubRegistry>();

  rgb_source_ = make_source(SourceSpec::parse(config_.rgb_source), StreamId::Rgb, stubs_.get());
  us_source_ = make_source(SourceSpec::parse(config_.us_source), StreamId::Us, stubs_.get());
  if (config_.audio_source) audio_source_ = make_audio_source(SourceSpec::parse(*config_.audio_source), stubs_.get());

  if (config_.record_dir) {
    probe_writable(*config_.record_dir);
    pending_recording_ = std::make_pair(*config_.record_dir, config_.record_outputs);
  }
}

Pipeline::~Pipeline() {
  stop();
  wait();
  std::lock_guard lock(step_mutex_);
  if (recorder_) {
    try {
      end_recording();
    } catch (...) {
    }
  }
}

bool Pipeline::offline() const {
  return !rgb_source_->live() && !us_source_->live() && (!audio_source_ || !audio_source_->live());
}

void Pipeline::ensure_sources() {
  if (pairer_) return;
  const OverflowPolicy policy = offline() ? OverflowPolicy::Block : OverflowPolicy::DropOldest;
  const std::size_t cap = config_.source_queue_capacity;
  rgb_q_ = std::make_unique<BoundedQueue<ImageFrame>>(cap, policy);
  us_q_ = std::make_unique<BoundedQueue<ImageFrame>>(cap, policy);
  if (audio_source_) audio_q_ = std::make_unique<BoundedQueue<AudioChunk>>(cap, policy);
  rgb_pump_ = std::make_unique<SourcePump<ImageFrame>>(rgb_source_, *rgb_q_);
  us_pump_ = std::make_unique<SourcePump<ImageFrame>>(us_source_, *us_q_);
  if (audio_source_) audio_pump_ = std::make_unique<SourcePump<AudioChunk>>(audio_source_, *audio_q_);
  SyncConfig sync{config_.tolerance_us, config_.stall_timeout_us, std::nullopt};
  if (!offline()) sync.wall_wait = std::chrono::microseconds(config_.stall_timeout_us);
  pairer_ = std::make_unique<Pairer>(*rgb_q_, *us_q_, audio_q_.get(), sync);
}

std::shared_ptr<Subscription> Pipeline::subscribe(std::size_t capacity) {
  auto sub = std::make_shared<Subscription>(capacity ? capacity : config_.subscriber_queue_capacity);
  std::lock_guard lock(subscribers_mutex_);
  if (finished_) sub->queue_.close();
  subscribers_.push_back(sub);
  return sub;
}

void Pipeline::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  std::lock_guard lock(subscribers_mutex_);
  std::erase(subscribers_, sub);
  sub->queue_.close();
}

void Pipeline::publish(const PipelineEvent& event) {
  std::lock_guard lock(subscribers_mutex_);
  for (const auto& s : subscribers_) s->queue_.push(event);
}

bool Pipeline::step() {
  std::lock_guard lock(step_mutex_);
  if (finished_) return false;
  drain_mailbox();
  ensure_sources();
  if (stop_) {
    finish_streams();
    return false;
  }
  const auto t0 = Clock::now();
  std::optional<SyncedBundle> bundle;
  try {
    bundle = pairer_->next();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SourceStalled) throw;
    ++stalls_;
    if (!stalled_) {
      stalled_ = true;
      publish({nullptr, {{"event", "status"}, {"state", "stalled"}, {"error", to_string(e.code())}, {"message", e.what()}}});
    }
    return true;
  }
  if (!bundle) {
    finish_streams();
    return false;
  }
  latency_["sync"].add(ms_since(t0));
  if (stalled_) {
    stalled_ = false;
    publish({nullptr, {{"event", "status"}, {"state", "running"}}});
  }
  process(std::move(*bundle));
  return true;
}

ImageFrame Pipeline::crop_us(const ImageFrame& us_full) const {
  const ImageFrame gray = us_full.pixel_format == PixelFormat::Gray8 ? us_full : to_gray(us_full);
  if (!calibration_) return gray;
  const PixelRect& r = calibration_->us_crop;
  return crop(gray, r.x, r.y, r.width, r.height);
}

TongueContour Pipeline::contour_of(const ImageFrame& us_full, ImageFrame* pred_out) const {
  const ImageFrame us_crop = crop_us(us_full);
  const BinaryMask mask = binarize(segmenter_->segment(us_crop), config_.segmentation.threshold);
  if (pred_out) *pred_out = mask_to_frame(mask, StreamId::Pred, us_full.timestamp_us);
  return extract_contour(mask, config_.segmentation.method, config_.segmentation.max_gap);
}

void Pipeline::process(SyncedBundle&& b) {
  const auto t_start = Clock::now();
  auto pb = std::make_shared<PublishedBundle>();
  pb->index = index_++;
  pb->timestamp_us = b.bundle_ts_us;
  pb->us_skew_us = b.us_skew_us;
  pb->audio_skew_us = b.audio_skew_us;
  pb->us_held = b.us_held;
  const FrameDims canvas = b.rgb.dims();

  auto t = Clock::now();
  try {
    pb->markers = detector_->detect(b.rgb);
    last_markers_ = pb->markers;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FewerThanTwoBlobs && e.code() != ErrorCode::AmbiguousBlobs) throw;
    ++markers_lost_;
  }
  latency_["detect"].add(ms_since(t));

  t = Clock::now();
  if (!calibration_ && pb->markers) {
    calibration_ = calibrate_from_markers(*pb->markers, b.us.dims());
  }
  std::optional<OverlayTransform> overlay;
  if (calibration_ && last_markers_) {
    // Lost markers keep the last pose rather than dropping the overlay.
    try {
      overlay = overlay_transform(pose_from_markers(*last_markers_, *calibration_), *calibration_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateMarkers) throw;
    }
  }
  latency_["pose"].add(ms_since(t));

  t = Clock::now();
  const ImageFrame us_crop = crop_us(b.us);
  const SegmentationMap prob = segmenter_->segment(us_crop);
  const BinaryMask mask = binarize(prob, config_.segmentation.threshold);
  pb->pred = mask_to_frame(mask, StreamId::Pred, b.us.timestamp_us);
  latency_["segment"].add(ms_since(t));

  t = Clock::now();
  pb->contour = extract_contour(mask, config_.segmentation.method, config_.segmentation.max_gap);
  latency_["contour"].add(ms_since(t));

  t = Clock::now();
  Layer us_layer = overlay ? apply_transform(*overlay, us_crop, canvas, config_.resample) : empty_layer(canvas);
  Layer pred_layer = overlay ? apply_transform(*overlay, pb->pred, canvas, config_.resample) : empty_layer(canvas);
  latency_["warp"].add(ms_since(t));

  t = Clock::now();
  // The guideline annotates the face layer, so it disappears with it.
  const bool guideline = config_.guideline && weights_.rgb > 0.0;
  pb->composite = composite(b.rgb, us_layer, pred_layer, weights_, guideline ? pb->markers : std::nullopt,
                            composite_options_);
  latency_["composite"].add(ms_since(t));

  t = Clock::now();
  if (reference_) {
    pb->reference_selected = true;
    Reference::Sample sample = reference_->next();
    const TongueContour ref_contour = sample.contour ? *sample.contour : contour_of(*sample.frame, nullptr);
    if (sample.frame) {
      sample.frame->timestamp_us = b.bundle_ts_us;
      pb->ref = std::move(*sample.frame);
    }
    if (!pb->contour.empty() && !ref_contour.empty()) pb->metrics = contour_stats(pb->contour, ref_contour);
  }
  if (b.audio) pb->audio_rms = rms(*b.audio);
  latency_["metrics"].add(ms_since(t));

  pb->rgb = std::move(b.rgb);
  pb->us = std::move(b.us);

  t = Clock::now();
  if (pending_recording_ && !recorder_) {
    const auto [dir, outputs] = *pending_recording_;
    begin_recording(dir, outputs);
  }
  if (recorder_) {
    const std::int64_t ordinal = recorder_ordinal_++;
    recorder_->write_frame(RecordOutput::Rgb, pb->rgb);
    recorder_->write_frame(RecordOutput::Us, pb->us);
    recorder_->write_frame(RecordOutput::Pred, pb->pred);
    recorder_->write_frame(RecordOutput::Composite, pb->composite);
    recorder_->write_contour(ordinal, pb->timestamp_us, pb->contour);
    if (b.audio) recorder_->write_audio(*b.audio);
  }
  latency_["record"].add(ms_since(t));

  t = Clock::now();
  std::shared_ptr<const PublishedBundle> live = pb;
  if (reference_) last_metrics_ = std::make_pair(pb->index, pb->metrics);
  if (frozen_) {
    if (!frozen_bundle_) frozen_bundle_ = live;
    auto repeat = std::make_shared<PublishedBundle>(*frozen_bundle_);
    repeat->index = pb->index;
    repeat->timestamp_us = pb->timestamp_us;
    repeat->us_skew_us = pb->us_skew_us;
    repeat->audio_skew_us = pb->audio_skew_us;
    repeat->us_held = pb->us_held;
    repeat->frozen = true;
    publish({repeat, nullptr});
  } else {
    publish({live, nullptr});
  }
  last_bundle_ = live;
  ++published_;
  latency_["publish"].add(ms_since(t));
  latency_["total"].add(ms_since(t_start));
  const auto now = Clock::now();
  if (!first_bundle_at_) first_bundle_at_ = now;
  last_bundle_at_ = now;
}

void Pipeline::begin_recording(const fs::path& dir, const RecordOutputs& outputs) {
  RecorderOptions opts;
  opts.calibration = calibration_;
  nlohmann::json snapshot = config_.to_json();
  snapshot.erase("sources");
  snapshot.erase("record");
  snapshot["weights"] = weights_;
  if (calibration_) snapshot["calibration"] = *calibration_;
  opts.config = snapshot;
  opts.png_compression = config_.png_compression;
  if (offline()) {
    // Offline input is reproducible, so the session metadata is too.
    const std::string dump = snapshot.dump();
    char id[32];
    std::snprintf(id, sizeof id, "session-%08x",
                  crc32_of({reinterpret_cast<const std::uint8_t*>(dump.data()), dump.size()}));
    opts.session_id = id;
    opts.created_at = "1970-01-01T00:00:00Z";
  }
  recorder_ = std::make_unique<SessionRecorder>(dir, outputs, opts);
  recorder_ordinal_ = 0;
  pending_recording_.reset();
}

std::optional<SessionManifest> Pipeline::end_recording() {
  pending_recording_.reset();
  if (!recorder_) return std::nullopt;
  SessionManifest m = recorder_->finish();
  recorder_.reset();
  std::lock_guard lock(subscribers_mutex_);
  last_recording_ = m;
  return m;
}

std::optional<SessionManifest> Pipeline::last_recording() const {
  std::lock_guard lock(subscribers_mutex_);
  return last_recording_;
}

void Pipeline::finish_streams() {
  if (finished_) return;
  std::optional<std::string> record_error;
  try {
    end_recording();
  } catch (const Error& e) {
    record_error = e.what();
  }
  finished_ = true;
  nlohmann::json ev = {{"event", "status"}, {"state", "finished"}, {"bundles", index_}};
  if (record_error) ev["record_error"] = *record_error;
  publish({nullptr, ev});
  std::lock_guard lock(subscribers_mutex_);
  for (const auto& s : subscribers_) s->queue_.close();
}

void Pipeline::start() {
  if (running_ || finished_) return;
  if (thread_.joinable()) thread_.join();
  running_ = true;
  thread_ = std::thread([this] {
    try {
      while (step()) {
      }
    } catch (const std::exception& e) {
      publish({nullptr, {{"event", "status"}, {"state", "failed"}, {"message", e.what()}}});
      std::lock_guard lock(step_mutex_);
      finish_streams();
    }
    std::deque<std::shared_ptr<Mail>> leftover;
    {
      std::lock_guard lock(mail_mutex_);
      running_ = false;
      leftover.swap(mailbox_);
    }
    std::lock_guard lock(step_mutex_);
    for (auto& m : leftover) m->reply.set_value(apply(m->message));
  });
}

void Pipeline::stop() {
  stop_ = true;
  if (rgb_pump_) rgb_pump_->stop();
  if (us_pump_) us_pump_->stop();
  if (audio_pump_) audio_pump_->stop();
  if (!pairer_) {
    rgb_source_->close();
    us_source_->close();
    if (audio_source_) audio_source_->close();
  }
}

void Pipeline::wait() {
  if (thread_.joinable()) thread_.join();
}

void Pipeline::drain_mailbox() {
  std::deque<std::shared_ptr<Mail>> mail;
  {
    std::lock_guard lock(mail_mutex_);
    mail.swap(mailbox_);
  }
  for (auto& m : mail) m->reply.set_value(apply(m->message));
}

nlohmann::json Pipeline::control(const nlohmann::json& message) {
  {
    std::unique_lock lock(mail_mutex_);
    if (running_) {
      auto mail = std::make_shared<Mail>();
      mail->message = message;
      auto reply = mail->reply.get_future();
      mailbox_.push_back(mail);
      lock.unlock();
      if (reply.wait_for(std::chrono::seconds(5)) == std::future_status::ready) return reply.get();
      nlohmann::json timeout = {{"ok", false}, {"error", "Timeout"}, {"message", "pipeline did not answer"}};
      timeout["re"] = message.is_object() && message.contains("id") ? message["id"] : nlohmann::json();
      return timeout;
    }
  }
  std::lock_guard lock(step_mutex_);
  return apply(message);
}

nlohmann::json Pipeline::apply(const nlohmann::json& message) {
  nlohmann::json reply;
  reply["re"] = message.is_object() && message.contains("id") ? message["id"] : nlohmann::json();
  try {
    if (!message.is_object() || !message.contains("type") || !message["type"].is_string()) {
      throw Error(ErrorCode::ProtocolError, "control message needs a string \"type\"");
    }
    const std::string type = message["type"].get<std::string>();
    nlohmann::json body = nlohmann::json::object();
    if (type == "set_weights") {
      const nlohmann::json& src = message.contains("weights") ? message["weights"] : message;
      BlendWeights w = weights_;
      w.rgb = src.value("rgb", w.rgb);
      w.us = src.value("us", w.us);
      w.pred = src.value("pred", w.pred);
      if (!w.valid()) throw Error(ErrorCode::InvalidArgument, "blend weights must lie in [0, 1]");
      weights_ = w;
      body["weights"] = weights_;
    } else if (type == "start_record") {
      if (recorder_ || pending_recording_) throw Error(ErrorCode::InvalidArgument, "already recording");
      fs::path dir = message.contains("dir") && message["dir"].is_string()
                         ? fs::path(message["dir"].get<std::string>())
                         : (config_.record_dir ? *config_.record_dir : fs::path(default_record_dir()));
      RecordOutputs outputs = message.contains("outputs") ? parse_outputs(message["outputs"]) : config_.record_outputs;
      probe_writable(dir);
      pending_recording_ = std::make_pair(dir, outputs);
      body["dir"] = fs::absolute(dir).lexically_normal().string();
    } else if (type == "stop_record") {
      if (!recorder_ && !pending_recording_) throw Error(ErrorCode::InvalidArgument, "not recording");
      const fs::path dir = recorder_ ? recorder_->dir() : pending_recording_->first;
      const auto manifest = end_recording();
      body["dir"] = fs::absolute(dir).lexically_normal().string();
      nlohmann::json frames = nlohmann::json::object();
      if (manifest) {
        for (const auto& s : manifest->streams) frames[std::string(to_string(s.id))] = s.frames.size();
        body["contours"] = manifest->contours ? manifest->contours->count : 0;
        body["session_id"] = manifest->session_id;
      }
      body["frames"] = frames;
    } else if (type == "freeze") {
      frozen_ = true;
      frozen_bundle_ = last_bundle_;
      body["frozen"] = true;
    } else if (type == "unfreeze") {
      frozen_ = false;
      frozen_bundle_.reset();
      body["frozen"] = false;
    } else if (type == "select_reference") {
      const nlohmann::json& ref = message.contains("reference") ? message["reference"] : nlohmann::json();
      if (ref.is_null() || (ref.is_string() && ref.get<std::string>().empty())) {
        reference_.reset();
        last_metrics_.reset();
        body["reference"] = nullptr;
      } else {
        if (!ref.is_string()) throw Error(ErrorCode::InvalidArgument, "reference must be a string");
        std::string id = ref.get<std::string>();
        auto r = std::make_unique<Reference>();
        r->id = id;
        if (id.rfind("synthetic:", 0) == 0) {
          const SyntheticSpec spec = SyntheticSpec::parse(id.substr(10));
          r->scene = std::make_unique<UsScene>(spec);
          r->scene_frames = spec.frames;
          r->scene_fps = spec.fps;
        } else {
          if (id.rfind("replay:", 0) == 0) id = id.substr(7);
          if (!fs::is_directory(id) || !fs::exists(fs::path(id) / kManifestFile)) {
            throw Error(ErrorCode::SessionNotFound, "no reference session '" + id + "'");
          }
          ReplaySet set = replay(id);
          r->dir = id;
          if (const StreamDescriptor* us = set.manifest.stream(StreamId::Us)) r->us_frames = us->frames;
          r->contours = std::move(set.contours);
          if (r->us_frames.empty() && r->contours.empty()) {
            throw Error(ErrorCode::SessionNotFound, "session '" + id + "' has neither US frames nor contours");
          }
        }
        body["reference"] = r->id;
        body["frames"] = r->length();
        reference_ = std::move(r);
        last_metrics_.reset();
      }
    } else if (type == "get_metrics") {
      if (!reference_) throw Error(ErrorCode::NoReferenceSelected, "no reference selected");
      body["reference"] = reference_->id;
      if (last_metrics_) {
        body["bundle"] = last_metrics_->first;
        body.update(metrics_json(last_metrics_->second));
      } else {
        body["bundle"] = nullptr;
        body.update(metrics_json(std::nullopt));
      }
    } else if (type == "get_status") {
      body = status_json();
    } else {
      throw Error(ErrorCode::ProtocolError, "unknown control message type '" + type + "'");
    }
    reply["ok"] = true;
    reply.update(body);
  } catch (const Error& e) {
    reply["ok"] = false;
    reply["error"] = to_string(e.code());
    reply["message"] = e.what();
  } catch (const nlohmann::json::exception& e) {
    reply["ok"] = false;
    reply["error"] = to_string(ErrorCode::ProtocolError);
    reply["message"] = e.what();
  }
  return reply;
}

nlohmann::json Pipeline::status_json() const {
  nlohmann::json s;
  s["bundles"] = index_;
  s["published"] = published_.load();
  s["finished"] = finished_.load();
  s["frozen"] = frozen_;
  s["weights"] = weights_;
  s["calibrated"] = calibration_.has_value();
  s["reference"] = reference_ ? nlohmann::json(reference_->id) : nlohmann::json();
  if (recorder_) {
    s["recording"] = fs::absolute(recorder_->dir()).lexically_normal().string();
  } else if (pending_recording_) {
    s["recording"] = fs::absolute(pending_recording_->first).lexically_normal().string();
  } else {
    s["recording"] = nullptr;
  }
  s["markers_lost"] = markers_lost_;
  s["stalls"] = stalls_;
  s["stalled"] = stalled_;
  nlohmann::json sync = {{"us_skew_us", last_bundle_ ? last_bundle_->us_skew_us : 0},
                         {"audio_skew_us", last_bundle_ ? last_bundle_->audio_skew_us : 0}};
  if (pairer_) {
    const PairerStats& ps = pairer_->stats();
    sync["held"] = ps.held;
    sync["unpaired_rgb"] = ps.unpaired_rgb;
    sync["non_monotone_rgb"] = ps.non_monotone_rgb;
  }
  s["sync"] = sync;
  nlohmann::json drops = {{"rgb", rgb_q_ ? rgb_q_->dropped() : 0}, {"us", us_q_ ? us_q_->dropped() : 0},
                          {"audio", audio_q_ ? audio_q_->dropped() : 0}};
  nlohmann::json subs = nlohmann::json::array();
  {
    std::lock_guard lock(subscribers_mutex_);
    for (const auto& sub : subscribers_) subs.push_back(sub->dropped());
  }
  drops["subscribers"] = subs;
  s["drops"] = drops;
  nlohmann::json lat = nlohmann::json::object();
  for (const auto& [stage, l] : latency_) lat[stage] = latency_json(l);
  s["latency_ms"] = lat;
  double rate = 0.0;
  if (first_bundle_at_ && index_ > 1) {
    const double secs = std::chrono::duration<double>(last_bundle_at_ - *first_bundle_at_).count();
    if (secs > 0) rate = double(index_ - 1) / secs;
  }
  s["bundles_per_s"] = rate;
  return s;
}

std::vector<RecordedContour> extract_session_contours(const fs::path& dir, ExtractionMethod method, double threshold,
                                                      int max_gap, const std::string& provider) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::SessionNotFound, "no session directory " + dir.string());
  ReplaySet set = replay(dir);
  auto it = set.frames.find(StreamId::Us);
  if (it == set.frames.end()) throw Error(ErrorCode::InvalidArgument, "session " + dir.string() + " has no US stream");
  const auto segmenter = make_segmentation_provider(provider);
  std::vector<RecordedContour> out;
  std::int64_t index = 0;
  while (auto f = it->second->next()) {
    ImageFrame gray = f->pixel_format == PixelFormat::Gray8 ? std::move(*f) : to_gray(*f);
    if (set.manifest.calibration) {
      const PixelRect& r = set.manifest.calibration->us_crop;
      gray = crop(gray, r.x, r.y, r.width, r.height);
    }
    const BinaryMask mask = binarize(segmenter->segment(gray), threshold);
    out.push_back({index++, gray.timestamp_us, extract_contour(mask, method, max_gap)});
  }
  return out;
}

}  // namespace usf
