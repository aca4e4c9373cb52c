#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace speclab {

enum class ErrorCode {
  // model / input validation
  AsymmetricB,
  EntryOutOfRange,
  BadSimplexVector,
  RankDeficiencyAmbiguous,
  InvalidModel,
  NotIndefiniteOrthogonal,
  FormOutOfRange,
  InvalidArgument,
  Parse,
  // numerical preconditions
  DegenerateGram,
  SingularDelta,
  NotSimpleSpectrum,
  RequiresPositiveSemidefinite,
  DegenerateVariance,
  TooLargeForOracle,
  // runtime
  NoConvergence,
  TooManyFailures,
  InternalMismatch,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by bad user input (models, files, flags) rather
/// than by a failed computation. The CLI maps these to exit code 2.
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace speclab
