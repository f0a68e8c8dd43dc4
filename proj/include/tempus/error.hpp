#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tempus {

enum class ErrorKind {
    NotInScale,
    HorizonExceeded,
    EmptyRange,
    InvalidScale,
    NotRegressive,
    DimensionMismatch,
    DomainEscape,
    ScheduleTooShort,
    PrerequisiteNotConvergent,
    NoValidityWindow,
    AlphaDegenerate,
    InvalidArgument,
    ConfigInvalid,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NotInScale: return "NotInScale";
        case ErrorKind::HorizonExceeded: return "HorizonExceeded";
        case ErrorKind::EmptyRange: return "EmptyRange";
        case ErrorKind::InvalidScale: return "InvalidScale";
        case ErrorKind::NotRegressive: return "NotRegressive";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::DomainEscape: return "DomainEscape";
        case ErrorKind::ScheduleTooShort: return "ScheduleTooShort";
        case ErrorKind::PrerequisiteNotConvergent: return "PrerequisiteNotConvergent";
        case ErrorKind::NoValidityWindow: return "NoValidityWindow";
        case ErrorKind::AlphaDegenerate: return "AlphaDegenerate";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

/// Error raised by every tempus operation. The kind is stable and is what the
/// CLI reports on stderr; the message carries the offending values.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Numerical failures (as opposed to bad input) map to CLI exit code 2.
    bool is_numerical() const noexcept {
        return kind_ == ErrorKind::NotRegressive || kind_ == ErrorKind::NoValidityWindow ||
               kind_ == ErrorKind::DomainEscape || kind_ == ErrorKind::PrerequisiteNotConvergent ||
               kind_ == ErrorKind::AlphaDegenerate || kind_ == ErrorKind::HorizonExceeded;
    }

private:
    ErrorKind kind_;
};

/// Round-trip formatting of doubles for error messages.
inline std::string show(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace tempus
