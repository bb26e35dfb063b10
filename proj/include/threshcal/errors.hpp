#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace threshcal {

// Error taxonomy shared by the library and the CLI. The CLI maps categories
// to exit codes: usage -> 1, data -> 2, numeric -> 3.
enum class ErrorCategory { Usage = 1, Data = 2, Numeric = 3 };

enum class Errc {
  // usage
  ConfigInvalid,
  UnknownMethod,
  OutOfRange,
  // data
  FileNotFound,
  MissingField,
  LabelUnmapped,
  EmptyAfterCleaning,
  TooFewPerClass,
  DegenerateSplit,
  TooFewSamples,
  SingleClass,
  NoPositives,
  EmptyCalibration,
  EmptyTest,
  IoError,
  // numeric
  ZeroVariance,
  NoBimodalStructure,
  ZeroEvidence,
  UnreachableConfidence,
  UnreachableProbability,
  PassNeverIncluded,
  Separation,
  NotConverged,
};

ErrorCategory category_of(Errc code);
std::string_view name_of(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);
  Errc code() const { return code_; }
  ErrorCategory category() const { return category_of(code_); }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& message);

}  // namespace threshcal
