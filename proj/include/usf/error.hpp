#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace usf {

enum class ErrorCode {
  FewerThanTwoBlobs,
  AmbiguousBlobs,
  KeypointOutOfBounds,
  LengthMismatch,
  DegenerateMarkers,
  InvalidArgument,
  EmptyContour,
  SpecOutOfBounds,
  SourceStalled,
  SessionNotFound,
  ConfigInvalid,
  DimsMismatch,
  DiskFull,
  DirNotWritable,
  ManifestCorrupt,
  EmptyTrial,
  NoReferenceSelected,
  ProtocolError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (and the control protocol) can branch on it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace usf
