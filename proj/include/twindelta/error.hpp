#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twindelta {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  TooFewFrames,
  RankTooLarge,
  DegenerateData,
  IndexOutOfRange,
  ElevationOutOfRange,
  InvalidBin,
  NotARotation,
  ZeroRealDelta,
  BoxOutOfFrame,
  EmptyImage,
  InvalidFrame,
  OutOfOrderEvent,
  UnknownObject,
  IoFailure,
  CorruptLog,
  MalformedStl,
  MalformedObj,
  InvalidConfig,
  ProtocolError,
  BackendFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace twindelta
