// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/types.hpp"

#include "memkernel/core/errors.hpp"

#include <array>
#include <utility>

namespace memkernel {

AccessPolicy AccessPolicy::private_to(const Identity& owner)
{
    AccessPolicy p;
    p.owner = owner;
    p.writers.insert(owner);
    return p;
}

MemoryKind kind_of(const MemoryPayload& payload) noexcept
{
    switch (payload.index()) {
    case 0: return MemoryKind::Plaintext;
    case 1: return MemoryKind::Activation;
    default: return MemoryKind::Parameter;
    }
}

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<MemoryKind, 3> kMemoryKind{{
    {MemoryKind::Plaintext, "Plaintext"}, {MemoryKind::Activation, "Activation"}, {MemoryKind::Parameter, "Parameter"}}};

constexpr NameTable<OriginSignature, 4> kOrigin{{{OriginSignature::InferenceExtracted, "InferenceExtracted"},
                                                 {OriginSignature::UserProvided, "UserProvided"},
                                                 {OriginSignature::ExternalRetrieval, "ExternalRetrieval"},
                                                 {OriginSignature::ParameterFinetune, "ParameterFinetune"}}};

constexpr NameTable<MemoryLayer, 3> kLayer{
    {{MemoryLayer::Private, "Private"}, {MemoryLayer::Shared, "Shared"}, {MemoryLayer::Global, "Global"}}};

constexpr NameTable<StateKind, 6> kState{{{StateKind::Generated, "Generated"},
                                          {StateKind::Activated, "Activated"},
                                          {StateKind::Merged, "Merged"},
                                          {StateKind::Archived, "Archived"},
                                          {StateKind::Expired, "Expired"},
                                          {StateKind::Frozen, "Frozen"}}};

constexpr NameTable<ShareScope, 3> kScope{
    {{ShareScope::Private, "Private"}, {ShareScope::Shared, "Shared"}, {ShareScope::ReadOnly, "ReadOnly"}}};

constexpr NameTable<LifespanMode, 3> kLifespan{{{LifespanMode::TtlSeconds, "TtlSeconds"},
                                                {LifespanMode::DecayHalfLifeSeconds, "DecayHalfLifeSeconds"},
                                                {LifespanMode::Permanent, "Permanent"}}};

constexpr NameTable<VersionOp, 6> kVersionOp{{{VersionOp::Create, "Create"},
                                              {VersionOp::Append, "Append"},
                                              {VersionOp::Merge, "Merge"},
                                              {VersionOp::Overwrite, "Overwrite"},
                                              {VersionOp::Rollback, "Rollback"},
                                              {VersionOp::Import, "Import"}}};

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) noexcept
{
    for (const auto& [v, n] : table) {
        if (v == value) return n;
    }
    return "?";
}

template <typename E, std::size_t N>
E value_of(const NameTable<E, N>& table, std::string_view name, const char* what)
{
    for (const auto& [v, n] : table) {
        if (n == name) return v;
    }
    throw Error(ErrorCode::BadArgs, std::string("unknown ") + what + " '" + std::string(name) + "'");
}

}  // namespace

std::string_view to_string(MemoryKind v) noexcept { return name_of(kMemoryKind, v); }
std::string_view to_string(OriginSignature v) noexcept { return name_of(kOrigin, v); }
std::string_view to_string(MemoryLayer v) noexcept { return name_of(kLayer, v); }
std::string_view to_string(StateKind v) noexcept { return name_of(kState, v); }
std::string_view to_string(ShareScope v) noexcept { return name_of(kScope, v); }
std::string_view to_string(LifespanMode v) noexcept { return name_of(kLifespan, v); }
std::string_view to_string(VersionOp v) noexcept { return name_of(kVersionOp, v); }

MemoryKind parse_memory_kind(std::string_view s) { return value_of(kMemoryKind, s, "memory kind"); }
OriginSignature parse_origin(std::string_view s) { return value_of(kOrigin, s, "origin"); }
MemoryLayer parse_layer(std::string_view s) { return value_of(kLayer, s, "layer"); }
StateKind parse_state_kind(std::string_view s) { return value_of(kState, s, "state"); }
ShareScope parse_share_scope(std::string_view s) { return value_of(kScope, s, "share scope"); }
LifespanMode parse_lifespan_mode(std::string_view s) { return value_of(kLifespan, s, "lifespan mode"); }
VersionOp parse_version_op(std::string_view s) { return value_of(kVersionOp, s, "version op"); }

std::string state_name(const LifecycleState& s)
{
    if (s.is_frozen()) {
        return "Frozen(" + std::string(to_string(s.prior)) + ")";
    }
    return std::string(to_string(s.kind));
}

}  // namespace memkernel
