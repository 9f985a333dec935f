#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lqrac {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    AsymmetricInput,
    UnstableMatrix,
    UnstablePolicy,
    UnstableInitialPolicy,
    NotControllable,
    ConvergenceFailure,
    NumericalOverflow,
    InvalidSchedule,
    EpochBudgetExceeded,
    GuardViolation,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C boundary can map it onto a status value without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

} // namespace lqrac
