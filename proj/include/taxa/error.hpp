#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taxa {

// Numeric values are part of the C ABI (see taxa.h); append only.
enum class ErrorCode : int {
  Ok = 0,
  InvalidArgument = 1,
  EmptyCoderId = 2,
  DuplicateImage = 3,
  NoSuchTaxon = 4,
  DuplicateSibling = 5,
  InvalidPartition = 6,
  NothingToFlatten = 7,
  NonLeafMerge = 8,
  SelfMerge = 9,
  CyclicMove = 10,
  CannotRemoveRoot = 11,
  NonLeafLabel = 12,
  NoSuchImage = 13,
  NoSuchAssignment = 14,
  CorruptLog = 15,
  InvalidName = 16,
  ReservedTaxon = 17,
  RootOperand = 18,
  ImageSetMismatch = 19,
  DimMismatch = 20,
  TooManyClusters = 21,
  MissingEmbedding = 22,
  EmptyLabeledSet = 23,
  EmptyProbabilityRow = 24,
  NotEnoughData = 25,
  FormatError = 26,
  NotEnoughImages = 27,
  NoSuchSession = 28,
  VersionConflict = 29,
  DecodeError = 30,
  IoError = 31,
  NotALeaf = 32,
  Internal = 99,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Domain error carrying a machine-readable code. `details` holds the
/// offending identifiers (uuids, joined paths) when there are any.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace taxa
