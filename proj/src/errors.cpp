#include "threshcal/errors.hpp"

namespace threshcal {

ErrorCategory category_of(Errc code) {
  switch (code) {
    case Errc::ConfigInvalid:
    case Errc::UnknownMethod:
    case Errc::OutOfRange:
      return ErrorCategory::Usage;
    case Errc::FileNotFound:
    case Errc::MissingField:
    case Errc::LabelUnmapped:
    case Errc::EmptyAfterCleaning:
    case Errc::TooFewPerClass:
    case Errc::DegenerateSplit:
    case Errc::TooFewSamples:
    case Errc::SingleClass:
    case Errc::NoPositives:
    case Errc::EmptyCalibration:
    case Errc::EmptyTest:
    case Errc::IoError:
      return ErrorCategory::Data;
    default:
      return ErrorCategory::Numeric;
  }
}

std::string_view name_of(Errc code) {
  switch (code) {
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::UnknownMethod: return "UnknownMethod";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::MissingField: return "MissingField";
    case Errc::LabelUnmapped: return "LabelUnmapped";
    case Errc::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case Errc::TooFewPerClass: return "TooFewPerClass";
    case Errc::DegenerateSplit: return "DegenerateSplit";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NoPositives: return "NoPositives";
    case Errc::EmptyCalibration: return "EmptyCalibration";
    case Errc::EmptyTest: return "EmptyTest";
    case Errc::IoError: return "IoError";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::NoBimodalStructure: return "NoBimodalStructure";
    case Errc::ZeroEvidence: return "ZeroEvidence";
    case Errc::UnreachableConfidence: return "UnreachableConfidence";
    case Errc::UnreachableProbability: return "UnreachableProbability";
    case Errc::PassNeverIncluded: return "PassNeverIncluded";
    case Errc::Separation: return "Separation";
    case Errc::NotConverged: return "NotConverged";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(name_of(code)) + ": " + message), code_(code) {}

void raise(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace threshcal
