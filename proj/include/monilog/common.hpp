#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace monilog {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using TemplateId = std::uint64_t;
using ReportId = std::uint64_t;
using PoolId = std::uint64_t;
using EventId = std::uint64_t;

/// Reserved id of the empty template (messages with no tokens).
inline constexpr TemplateId kEmptyTemplateId = 0;

/// Rendering of a variable position inside a template.
inline constexpr std::string_view kWildcard = "<*>";

/// Base class of all recoverable errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or value range.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A referenced entity (report, pool, cursor) does not exist.
class NotFoundError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Filesystem or stream failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Aborts the process when an internal invariant does not hold. These are
/// programming errors, not input errors, so they are never thrown.
[[noreturn]] void invariant_violation(std::string_view what);

inline void check_invariant(bool condition, std::string_view what) {
    if (!condition) {
        invariant_violation(what);
    }
}

/// Formats as ISO-8601 UTC with millisecond precision, e.g.
/// "2024-01-01T00:00:00.000Z".
std::string format_timestamp(Timestamp ts);

/// Accepts "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]" ('T' or ' ' as
/// separator). Throws ValidationError on malformed input.
Timestamp parse_timestamp(std::string_view text);

/// Splits on runs of whitespace; no empty pieces.
std::vector<std::string_view> split_whitespace(std::string_view text);

/// True when the whole string parses as a finite decimal number.
bool parse_number(std::string_view text, double& out);

}  // namespace monilog
