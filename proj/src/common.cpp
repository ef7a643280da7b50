#include "posefuse/common.hpp"

namespace posefuse {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::NotARotation: return "NotARotation";
    case Errc::DegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::NearDegenerateAlignment: return "NearDegenerateAlignment";
    case Errc::InvalidDims: return "InvalidDims";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::IsolatedVertex: return "IsolatedVertex";
    case Errc::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::ParseError: return "ParseError";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::UnknownJoint: return "UnknownJoint";
    case Errc::UnknownSide: return "UnknownSide";
    case Errc::BehindCamera: return "BehindCamera";
    case Errc::MissingReference: return "MissingReference";
    case Errc::CorrespondenceMissing: return "CorrespondenceMissing";
    case Errc::FrozenParamsModified: return "FrozenParamsModified";
    case Errc::ConfigError: return "ConfigError";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string format_message(Errc code, const std::string& detail, long index) {
  std::string msg = errc_name(code);
  if (!detail.empty()) msg += "(" + detail + ")";
  if (index >= 0) msg += " at index " + std::to_string(index);
  return msg;
}

}  // namespace

Error::Error(Errc code, std::string detail, long index)
    : std::runtime_error(format_message(code, detail, index)),
      code_(code),
      detail_(std::move(detail)),
      index_(index) {}

}  // namespace posefuse
