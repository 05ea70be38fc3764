#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "usf/sync.hpp"

namespace usf {

enum class SourceKind { Synthetic, Replay, Stub };

/// Parsed `synthetic:<spec>`, `replay:<dir>` or `stub:<id>`.
struct SourceSpec {
  SourceKind kind = SourceKind::Synthetic;
  std::string argument;

  static SourceSpec parse(const std::string& text);
  std::string str() const;
};

/// Live-stub sources are registered here by id so that an external producer
/// (for instance a network client pushing ultrasound frames) can reach them.
class StubRegistry {
 public:
  std::shared_ptr<PushSource<ImageFrame>> frames(const std::string& id);
  std::shared_ptr<PushSource<AudioChunk>> audio(const std::string& id);
  std::shared_ptr<PushSource<ImageFrame>> find_frames(const std::string& id) const;
  void close_all();

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<PushSource<ImageFrame>>> frames_;
  std::map<std::string, std::shared_ptr<PushSource<AudioChunk>>> audio_;
};

/// Builds the frame source for `stream`. Throws SessionNotFound for a missing
/// replay directory and ConfigInvalid for malformed specs.
std::shared_ptr<FrameSource> make_source(const SourceSpec& spec, StreamId stream, StubRegistry* stubs = nullptr);
std::shared_ptr<AudioSource> make_audio_source(const SourceSpec& spec, StubRegistry* stubs = nullptr);

}  // namespace usf
