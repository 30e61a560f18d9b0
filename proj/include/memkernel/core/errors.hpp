// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memkernel {

// Closed catalogue of error codes. The wire names returned by
// error_code_name() are stable and enumerated by the gateway tests.
enum class ErrorCode {
    InvalidPayload,
    InvalidGovernance,
    DecodeError,
    IllegalTransition,
    FrozenViolation,
    UnknownVersion,
    MalformedFilter,
    EmptyTask,
    PreconditionNotMet,
    AccessDenied,
    ReadOnlyNamespace,
    UnknownCube,
    UnknownNamespace,
    VersionConflict,
    IllegalTier,
    AdapterUnavailable,
    CorruptLog,
    EmptyPrompt,
    UnresolvableTime,
    IllegalForPayloadKind,
    StepFailed,
    AuthorizationFailed,
    UnsupportedVersion,
    ManifestMismatch,
    ValidationFailed,
    LicenseExhausted,
    LicenseExpired,
    UnknownListing,
    UnknownSubscription,
    DegenerateFit,
    TraceInvalid,
    InvalidConfig,
    UnknownOp,
    BadArgs,
    Internal,
};

std::string_view error_code_name(ErrorCode code) noexcept;
std::optional<ErrorCode> error_code_from_name(std::string_view name) noexcept;
const std::vector<ErrorCode>& all_error_codes();

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code),
          detail_(message)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

// Malformed canonical input. offset is the byte position where decoding failed.
class DecodeError : public Error {
public:
    DecodeError(std::size_t offset, const std::string& message, ErrorCode code = ErrorCode::DecodeError)
        : Error(code, "at byte " + std::to_string(offset) + ": " + message),
          offset_(offset)
    {
    }

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace memkernel
