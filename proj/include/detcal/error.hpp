#pragma once

#include <stdexcept>
#include <string>

namespace detcal {

enum class ErrorKind {
  MalformedInput,
  InconsistentReference,
  OutOfRangeBox,
  DimensionMismatch,
  InvalidProbability,
  EmptyEvaluationSet,
  InvalidConfig,
  NoGroundTruth,
  IoFailure,
};

const char* to_string(ErrorKind kind);

/// Toolkit-wide error type. The CLI maps kinds onto exit codes:
/// input/parse errors -> 1, configuration errors -> 2, empty evaluation set -> 3.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace detcal
