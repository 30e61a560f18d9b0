// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/errors.hpp"

#include <array>
#include <utility>

namespace memkernel {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 35> kNames{{
    {ErrorCode::InvalidPayload, "INVALID_PAYLOAD"},
    {ErrorCode::InvalidGovernance, "INVALID_GOVERNANCE"},
    {ErrorCode::DecodeError, "DECODE_ERROR"},
    {ErrorCode::IllegalTransition, "ILLEGAL_TRANSITION"},
    {ErrorCode::FrozenViolation, "FROZEN_VIOLATION"},
    {ErrorCode::UnknownVersion, "UNKNOWN_VERSION"},
    {ErrorCode::MalformedFilter, "MALFORMED_FILTER"},
    {ErrorCode::EmptyTask, "EMPTY_TASK"},
    {ErrorCode::PreconditionNotMet, "PRECONDITION_NOT_MET"},
    {ErrorCode::AccessDenied, "ACCESS_DENIED"},
    {ErrorCode::ReadOnlyNamespace, "READ_ONLY_NAMESPACE"},
    {ErrorCode::UnknownCube, "UNKNOWN_CUBE"},
    {ErrorCode::UnknownNamespace, "UNKNOWN_NAMESPACE"},
    {ErrorCode::VersionConflict, "VERSION_CONFLICT"},
    {ErrorCode::IllegalTier, "ILLEGAL_TIER"},
    {ErrorCode::AdapterUnavailable, "ADAPTER_UNAVAILABLE"},
    {ErrorCode::CorruptLog, "CORRUPT_LOG"},
    {ErrorCode::EmptyPrompt, "EMPTY_PROMPT"},
    {ErrorCode::UnresolvableTime, "UNRESOLVABLE_TIME"},
    {ErrorCode::IllegalForPayloadKind, "ILLEGAL_FOR_PAYLOAD_KIND"},
    {ErrorCode::StepFailed, "STEP_FAILED"},
    {ErrorCode::AuthorizationFailed, "AUTHORIZATION_FAILED"},
    {ErrorCode::UnsupportedVersion, "UNSUPPORTED_VERSION"},
    {ErrorCode::ManifestMismatch, "MANIFEST_MISMATCH"},
    {ErrorCode::ValidationFailed, "VALIDATION_FAILED"},
    {ErrorCode::LicenseExhausted, "LICENSE_EXHAUSTED"},
    {ErrorCode::LicenseExpired, "LICENSE_EXPIRED"},
    {ErrorCode::UnknownListing, "UNKNOWN_LISTING"},
    {ErrorCode::UnknownSubscription, "UNKNOWN_SUBSCRIPTION"},
    {ErrorCode::DegenerateFit, "DEGENERATE_FIT"},
    {ErrorCode::TraceInvalid, "TRACE_INVALID"},
    {ErrorCode::InvalidConfig, "INVALID_CONFIG"},
    {ErrorCode::UnknownOp, "UNKNOWN_OP"},
    {ErrorCode::BadArgs, "BAD_ARGS"},
    {ErrorCode::Internal, "INTERNAL"},
}};

}  // namespace

std::string_view error_code_name(ErrorCode code) noexcept
{
    for (const auto& [c, name] : kNames) {
        if (c == code) {
            return name;
        }
    }
    return "INTERNAL";
}

std::optional<ErrorCode> error_code_from_name(std::string_view name) noexcept
{
    for (const auto& [c, n] : kNames) {
        if (n == name) {
            return c;
        }
    }
    return std::nullopt;
}

const std::vector<ErrorCode>& all_error_codes()
{
    static const std::vector<ErrorCode> codes = [] {
        std::vector<ErrorCode> out;
        for (const auto& entry : kNames) {
            out.push_back(entry.first);
        }
        return out;
    }();
    return codes;
}

}  // namespace memkernel
