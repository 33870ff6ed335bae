#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridflex {

enum class ErrorCode {
    MalformedCase,
    UnsupportedFeature,
    ConfigParse,
    UnknownBus,
    UnknownLine,
    InvalidGrid,
    InvalidDecision,
    SingularNetwork,
    UnbalancedInjection,
    DomainError,
    NotNormalized,
    InfeasibleMargin,
    Infeasible,
    NumericalLimit,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; what() is prefixed with the code name
/// so CLI diagnostics carry it verbatim.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace gridflex
