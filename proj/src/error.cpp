#include "cghair/error.h"

namespace cghair {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::InconsistentCounts: return "InconsistentCounts";
        case ErrorCode::EmptyHairstyle: return "EmptyHairstyle";
        case ErrorCode::DegenerateStrand: return "DegenerateStrand";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::WrongPointCount: return "WrongPointCount";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::NonUnitTangent: return "NonUnitTangent";
        case ErrorCode::DegenerateAfterSmoothing: return "DegenerateAfterSmoothing";
        case ErrorCode::InvalidTriangleIndex: return "InvalidTriangleIndex";
        case ErrorCode::ZeroResolution: return "ZeroResolution";
        case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyTargets: return "EmptyTargets";
        case ErrorCode::ZeroLengthSegment: return "ZeroLengthSegment";
        case ErrorCode::BadDirection: return "BadDirection";
        case ErrorCode::IncompleteConfig: return "IncompleteConfig";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace cghair
