#include "lqrac/error.hpp"

namespace lqrac {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::AsymmetricInput: return "AsymmetricInput";
    case ErrorCode::UnstableMatrix: return "UnstableMatrix";
    case ErrorCode::UnstablePolicy: return "UnstablePolicy";
    case ErrorCode::UnstableInitialPolicy: return "UnstableInitialPolicy";
    case ErrorCode::NotControllable: return "NotControllable";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::NumericalOverflow: return "NumericalOverflow";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::EpochBudgetExceeded: return "EpochBudgetExceeded";
    case ErrorCode::GuardViolation: return "GuardViolation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

void fail(ErrorCode code, const std::string& what) {
    throw Error(code, std::string(to_string(code)) + ": " + what);
}

} // namespace lqrac
