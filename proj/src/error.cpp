#include "gridflex/error.hpp"

namespace gridflex {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedCase: return "MalformedCase";
        case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
        case ErrorCode::ConfigParse: return "ConfigParse";
        case ErrorCode::UnknownBus: return "UnknownBus";
        case ErrorCode::UnknownLine: return "UnknownLine";
        case ErrorCode::InvalidGrid: return "InvalidGrid";
        case ErrorCode::InvalidDecision: return "InvalidDecision";
        case ErrorCode::SingularNetwork: return "SingularNetwork";
        case ErrorCode::UnbalancedInjection: return "UnbalancedInjection";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::InfeasibleMargin: return "InfeasibleMargin";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::NumericalLimit: return "NumericalLimit";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

}  // namespace gridflex
