#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brownent {

enum class ErrorCode {
  InvalidParameter,
  NoStationaryState,
  SingularCovariance,
  UnequalTemperatures,
  InsufficientSamples,
  UnsupportedRegime,
  SchemaMismatch,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception. The code is stable and used for machine-readable
/// error reports by the command line tool.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace brownent
