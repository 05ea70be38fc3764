#include "usf/sources.hpp"

#include <filesystem>

#include "usf/error.hpp"
#include "usf/session.hpp"
#include "usf/synthetic.hpp"

namespace usf {

SourceSpec SourceSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "synthetic") return {SourceKind::Synthetic, arg};
  if (kind == "replay") {
    if (arg.empty()) throw Error(ErrorCode::ConfigInvalid, "replay source needs a session directory");
    return {SourceKind::Replay, arg};
  }
  if (kind == "stub") return {SourceKind::Stub, arg.empty() ? "default" : arg};
  throw Error(ErrorCode::ConfigInvalid, "source '" + text + "' is not synthetic:<spec>, replay:<dir> or stub:<id>");
}

std::string SourceSpec::str() const {
  switch (kind) {
    case SourceKind::Synthetic: return "synthetic:" + argument;
    case SourceKind::Replay: return "replay:" + argument;
    case SourceKind::Stub: return "stub:" + argument;
  }
  return {};
}

std::shared_ptr<PushSource<ImageFrame>> StubRegistry::frames(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& slot = frames_[id];
  if (!slot) slot = std::make_shared<PushSource<ImageFrame>>(id);
  return slot;
}

std::shared_ptr<PushSource<AudioChunk>> StubRegistry::audio(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& slot = audio_[id];
  if (!slot) slot = std::make_shared<PushSource<AudioChunk>>(id);
  return slot;
}

std::shared_ptr<PushSource<ImageFrame>> StubRegistry::find_frames(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = frames_.find(id);
  return it == frames_.end() ? nullptr : it->second;
}

void StubRegistry::close_all() {
  std::lock_guard lock(mutex_);
  for (auto& [id, s] : frames_) s->close();
  for (auto& [id, s] : audio_) s->close();
}

namespace {

// Re-labels frames from another stream (a recorded US stream used as REF).
class RelabelSource final : public FrameSource {
 public:
  RelabelSource(std::shared_ptr<FrameSource> inner, StreamId id) : inner_(std::move(inner)), id_(id) {}
  std::optional<ImageFrame> next() override {
    auto f = inner_->next();
    if (f) f->stream_id = id_;
    return f;
  }
  std::string describe() const override { return inner_->describe(); }

 private:
  std::shared_ptr<FrameSource> inner_;
  StreamId id_;
};

}  // namespace

std::shared_ptr<FrameSource> make_source(const SourceSpec& spec, StreamId stream, StubRegistry* stubs) {
  switch (spec.kind) {
    case SourceKind::Synthetic:
      return std::make_shared<SyntheticFrameSource>(stream, SyntheticSpec::parse(spec.argument));
    case SourceKind::Replay: {
      if (!std::filesystem::is_directory(spec.argument)) {
        throw Error(ErrorCode::SessionNotFound, "no session directory " + spec.argument);
      }
      ReplaySet set = replay(spec.argument);
      const StreamId recorded = stream == StreamId::Ref ? StreamId::Us : stream;
      auto it = set.frames.find(recorded);
      if (it == set.frames.end()) {
        throw Error(ErrorCode::ConfigInvalid, "session " + spec.argument + " has no " + std::string(to_string(recorded)) + " stream");
      }
      if (recorded != stream) return std::make_shared<RelabelSource>(it->second, stream);
      return it->second;
    }
    case SourceKind::Stub:
      if (!stubs) throw Error(ErrorCode::ConfigInvalid, "stub sources need a registry");
      return stubs->frames(spec.argument);
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown source kind");
}

std::shared_ptr<AudioSource> make_audio_source(const SourceSpec& spec, StubRegistry* stubs) {
  switch (spec.kind) {
    case SourceKind::Synthetic:
      return std::make_shared<SyntheticAudioSource>(SyntheticSpec::parse(spec.argument));
    case SourceKind::Replay: {
      if (!std::filesystem::is_directory(spec.argument)) {
        throw Error(ErrorCode::SessionNotFound, "no session directory " + spec.argument);
      }
      ReplaySet set = replay(spec.argument);
      if (!set.audio) throw Error(ErrorCode::ConfigInvalid, "session " + spec.argument + " has no audio");
      return set.audio;
    }
    case SourceKind::Stub:
      if (!stubs) throw Error(ErrorCode::ConfigInvalid, "stub sources need a registry");
      return stubs->audio(spec.argument);
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown source kind");
}

}  // namespace usf
