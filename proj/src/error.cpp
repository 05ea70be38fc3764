#include "usf/error.hpp"

namespace usf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FewerThanTwoBlobs: return "FewerThanTwoBlobs";
    case ErrorCode::AmbiguousBlobs: return "AmbiguousBlobs";
    case ErrorCode::KeypointOutOfBounds: return "KeypointOutOfBounds";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateMarkers: return "DegenerateMarkers";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyContour: return "EmptyContour";
    case ErrorCode::SpecOutOfBounds: return "SpecOutOfBounds";
    case ErrorCode::SourceStalled: return "SourceStalled";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DimsMismatch: return "DimsMismatch";
    case ErrorCode::DiskFull: return "DiskFull";
    case ErrorCode::DirNotWritable: return "DirNotWritable";
    case ErrorCode::ManifestCorrupt: return "ManifestCorrupt";
    case ErrorCode::EmptyTrial: return "EmptyTrial";
    case ErrorCode::NoReferenceSelected: return "NoReferenceSelected";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace usf
