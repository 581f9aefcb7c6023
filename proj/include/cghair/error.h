#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cghair {

enum class ErrorCode {
    BadMagic,
    TruncatedFile,
    InconsistentCounts,
    EmptyHairstyle,
    DegenerateStrand,
    KTooLarge,
    EmptyInput,
    DimensionMismatch,
    WrongPointCount,
    TooFewPoints,
    NonUnitTangent,
    DegenerateAfterSmoothing,
    InvalidTriangleIndex,
    ZeroResolution,
    NonPositiveTemperature,
    LengthMismatch,
    EmptyTargets,
    ZeroLengthSegment,
    BadDirection,
    IncompleteConfig,
    ShapeMismatch,
    InvalidArgument,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cghair
