// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace citynav
{

enum class ErrorCode
{
    InvalidArgument = 1,
    DegenerateBearing,
    UnsupportedRegion,
    ParseError,
    IntegrityError,
    ProtectedIsolation,
    Unreachable,
    EmptyGraph,
    TargetUnreachable,
    EmptyDestination,
    DegenerateTask,
    InvalidAction,
    MalformedResponse,
    SchemaViolation,
    InvalidDecision,
    ClientUnavailable,
    ConfigError,
    ProviderError,
    StorageError,
    InvalidTask,
    TraceMismatch,
    ReplayDivergence,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// C layer can translate it without string matching.
class Error: public std::runtime_error
{
  public:
    Error(ErrorCode code, const std::string& message):
        std::runtime_error(std::string(to_string(code)) + ": " + message), _code(code)
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return _code; }

  private:
    ErrorCode _code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace citynav
