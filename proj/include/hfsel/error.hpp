#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hfsel {

enum class ErrorCode {
  // hierarchy
  EmptyInput,
  CycleDetected,
  MultipleParents,
  MultipleRoots,
  UnknownLabel,
  // corpus
  MalformedLine,
  NonFiniteValue,
  DuplicateFeatureInRow,
  DegenerateSplit,
  // scoring
  FeatureAbsent,
  LengthMismatch,
  NotEnoughFeatures,
  DegenerateRanking,
  SingleChildNode,
  // selection / training / prediction
  EmptyGrid,
  NoInstances,
  ModelIncomplete,
  // plumbing
  Io,
  Format,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::optional<std::int64_t> subject = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  // Offending node id, instance id, line number or feature id, when one applies.
  std::optional<std::int64_t> subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::optional<std::int64_t> subject_;
};

}  // namespace hfsel
