#include "mfdr/error.hpp"

namespace mfdr {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ConstantColumn: return "ConstantColumn";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::NonNumericCell: return "NonNumericCell";
        case ErrorCode::InvalidResponse: return "InvalidResponse";
        case ErrorCode::FamilyMismatch: return "FamilyMismatch";
        case ErrorCode::EmptyPenalizedSet: return "EmptyPenalizedSet";
        case ErrorCode::DegenerateNull: return "DegenerateNull";
        case ErrorCode::SaturatedModel: return "SaturatedModel";
        case ErrorCode::ZeroResidual: return "ZeroResidual";
        case ErrorCode::DegenerateWeight: return "DegenerateWeight";
        case ErrorCode::TooFewStatistics: return "TooFewStatistics";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::FoldTooSmall: return "FoldTooSmall";
        case ErrorCode::EmptyEventFold: return "EmptyEventFold";
        case ErrorCode::RequiresReplicates: return "RequiresReplicates";
        case ErrorCode::NoSelections: return "NoSelections";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool Error::is_input_error() const noexcept {
    switch (code_) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::ConstantColumn:
        case ErrorCode::ParseError:
        case ErrorCode::MissingColumn:
        case ErrorCode::NonNumericCell:
        case ErrorCode::InvalidResponse:
        case ErrorCode::FamilyMismatch:
        case ErrorCode::IoError:
            return true;
        default:
            return false;
    }
}

}  // namespace mfdr
