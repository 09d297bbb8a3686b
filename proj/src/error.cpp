#include "hfsel/error.hpp"

namespace hfsel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::MultipleParents: return "MultipleParents";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateFeatureInRow: return "DuplicateFeatureInRow";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::FeatureAbsent: return "FeatureAbsent";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotEnoughFeatures: return "NotEnoughFeatures";
    case ErrorCode::DegenerateRanking: return "DegenerateRanking";
    case ErrorCode::SingleChildNode: return "SingleChildNode";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::NoInstances: return "NoInstances";
    case ErrorCode::ModelIncomplete: return "ModelIncomplete";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {
std::string decorate(ErrorCode code, const std::string& message,
                     const std::optional<std::int64_t>& subject) {
  std::string out(to_string(code));
  if (subject) out += "(" + std::to_string(*subject) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}
}  // namespace

Error::Error(ErrorCode code, std::string message, std::optional<std::int64_t> subject)
    : std::runtime_error(decorate(code, message, subject)), code_(code), subject_(subject) {}

}  // namespace hfsel
