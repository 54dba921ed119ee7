#include "taxa/error.hpp"

namespace taxa {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyCoderId: return "EmptyCoderId";
    case ErrorCode::DuplicateImage: return "DuplicateImage";
    case ErrorCode::NoSuchTaxon: return "NoSuchTaxon";
    case ErrorCode::DuplicateSibling: return "DuplicateSibling";
    case ErrorCode::InvalidPartition: return "InvalidPartition";
    case ErrorCode::NothingToFlatten: return "NothingToFlatten";
    case ErrorCode::NonLeafMerge: return "NonLeafMerge";
    case ErrorCode::SelfMerge: return "SelfMerge";
    case ErrorCode::CyclicMove: return "CyclicMove";
    case ErrorCode::CannotRemoveRoot: return "CannotRemoveRoot";
    case ErrorCode::NonLeafLabel: return "NonLeafLabel";
    case ErrorCode::NoSuchImage: return "NoSuchImage";
    case ErrorCode::NoSuchAssignment: return "NoSuchAssignment";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::InvalidName: return "InvalidName";
    case ErrorCode::ReservedTaxon: return "ReservedTaxon";
    case ErrorCode::RootOperand: return "RootOperand";
    case ErrorCode::ImageSetMismatch: return "ImageSetMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TooManyClusters: return "TooManyClusters";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::EmptyLabeledSet: return "EmptyLabeledSet";
    case ErrorCode::EmptyProbabilityRow: return "EmptyProbabilityRow";
    case ErrorCode::NotEnoughData: return "NotEnoughData";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::NotEnoughImages: return "NotEnoughImages";
    case ErrorCode::NoSuchSession: return "NoSuchSession";
    case ErrorCode::VersionConflict: return "VersionConflict";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotALeaf: return "NotALeaf";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace taxa
