// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>

namespace citynav
{

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code)
    {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DegenerateBearing: return "DegenerateBearing";
        case ErrorCode::UnsupportedRegion: return "UnsupportedRegion";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IntegrityError: return "IntegrityError";
        case ErrorCode::ProtectedIsolation: return "ProtectedIsolation";
        case ErrorCode::Unreachable: return "Unreachable";
        case ErrorCode::EmptyGraph: return "EmptyGraph";
        case ErrorCode::TargetUnreachable: return "TargetUnreachable";
        case ErrorCode::EmptyDestination: return "EmptyDestination";
        case ErrorCode::DegenerateTask: return "DegenerateTask";
        case ErrorCode::InvalidAction: return "InvalidAction";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::InvalidDecision: return "InvalidDecision";
        case ErrorCode::ClientUnavailable: return "ClientUnavailable";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::StorageError: return "StorageError";
        case ErrorCode::InvalidTask: return "InvalidTask";
        case ErrorCode::TraceMismatch: return "TraceMismatch";
        case ErrorCode::ReplayDivergence: return "ReplayDivergence";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace citynav
