#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace selfreg {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition or invariant violation in caller-supplied data.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

enum class FormatErrc {
    io,
    bad_magic,
    unsupported_version,
    unsupported_dtype,
    bad_header,
    truncated,
    trailing_data,
    non_finite,
    meta_missing,
    meta_mismatch,
    meta_invalid,
};

inline std::string_view to_string(FormatErrc code) noexcept {
    switch (code) {
    case FormatErrc::io: return "io";
    case FormatErrc::bad_magic: return "bad_magic";
    case FormatErrc::unsupported_version: return "unsupported_version";
    case FormatErrc::unsupported_dtype: return "unsupported_dtype";
    case FormatErrc::bad_header: return "bad_header";
    case FormatErrc::truncated: return "truncated";
    case FormatErrc::trailing_data: return "trailing_data";
    case FormatErrc::non_finite: return "non_finite";
    case FormatErrc::meta_missing: return "meta_missing";
    case FormatErrc::meta_mismatch: return "meta_mismatch";
    case FormatErrc::meta_invalid: return "meta_invalid";
    }
    return "unknown";
}

/// Raised by the binary/JSONL readers and writers. Each failure mode has its own code.
class FormatError : public Error {
public:
    FormatError(FormatErrc code, const std::string& what)
        : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

    FormatErrc code() const noexcept { return code_; }

private:
    FormatErrc code_;
};

} // namespace selfreg
