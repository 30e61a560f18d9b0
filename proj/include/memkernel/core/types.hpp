// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Shared domain types: the MemCube and everything it carries.

#include "memkernel/core/digest.hpp"
#include "memkernel/core/time.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace memkernel {

using CubeId = std::string;
using Identity = std::string;
using Fingerprint = std::vector<double>;

inline constexpr std::size_t kFingerprintDim = 256;

enum class MemoryKind { Plaintext, Activation, Parameter };

enum class OriginSignature { InferenceExtracted, UserProvided, ExternalRetrieval, ParameterFinetune };

enum class MemoryLayer { Private, Shared, Global };

enum class StateKind { Generated, Activated, Merged, Archived, Expired, Frozen };

// FSM position. A Frozen state remembers where Unfreeze returns to.
struct LifecycleState {
    StateKind kind = StateKind::Generated;
    StateKind prior = StateKind::Generated;  // meaningful only when kind == Frozen

    static constexpr LifecycleState of(StateKind k) { return LifecycleState{k, k}; }
    static constexpr LifecycleState frozen(StateKind prior) { return LifecycleState{StateKind::Frozen, prior}; }
    constexpr bool is_frozen() const { return kind == StateKind::Frozen; }

    friend constexpr bool operator==(const LifecycleState& a, const LifecycleState& b)
    {
        return a.kind == b.kind && (a.kind != StateKind::Frozen || a.prior == b.prior);
    }
};

enum class ShareScope { Private, Shared, ReadOnly };

struct AccessPolicy {
    Identity owner;
    bool readers_wildcard = false;
    std::set<Identity> readers;
    std::set<Identity> writers;  // always contains owner
    ShareScope share_scope = ShareScope::Private;

    static AccessPolicy private_to(const Identity& owner);

    bool operator==(const AccessPolicy&) const = default;
};

enum class LifespanMode { TtlSeconds, DecayHalfLifeSeconds, Permanent };

struct LifespanPolicy {
    LifespanMode mode = LifespanMode::Permanent;
    std::int64_t seconds = 0;  // TTL or half-life; > 0 unless Permanent
    std::optional<std::int64_t> archive_after_idle_seconds;

    static LifespanPolicy permanent() { return {}; }
    static LifespanPolicy ttl(std::int64_t seconds) { return {LifespanMode::TtlSeconds, seconds, std::nullopt}; }

    bool operator==(const LifespanPolicy&) const = default;
};

struct ProvenanceEvent {
    std::string trigger;
    std::string context;
    std::string model_id;
    std::vector<std::string> external_links;
    Identity actor;
    Timestamp at;

    bool operator==(const ProvenanceEvent&) const = default;
};

struct Watermark {
    Digest digest;
    std::string provider_id;
    std::string salt;

    bool operator==(const Watermark&) const = default;
};

struct Compliance {
    std::set<std::string> sensitivity;
    std::optional<Watermark> watermark;
    std::string provenance_id;  // empty until first provenance event
    std::vector<ProvenanceEvent> lineage;

    bool operator==(const Compliance&) const = default;
};

enum class VersionOp { Create, Append, Merge, Overwrite, Rollback, Import };

struct VersionRef {
    CubeId cube_id;
    std::uint64_t version = 0;

    auto operator<=>(const VersionRef&) const = default;
};

struct VersionRecord {
    std::uint64_t version = 1;
    std::vector<VersionRef> parents;
    VersionOp op = VersionOp::Create;
    Identity actor;
    Timestamp at;
    Digest snapshot_digest;
    std::string label;  // optional snapshot label, empty when unset

    bool operator==(const VersionRecord&) const = default;
};

struct GraphRef {
    std::string relation;
    CubeId target;

    auto operator<=>(const GraphRef&) const = default;
};

struct PlaintextPayload {
    std::string text;
    std::vector<GraphRef> graph_refs;

    bool operator==(const PlaintextPayload&) const = default;
};

struct ActivationPayload {
    CubeId source_cube;
    std::uint64_t token_count = 0;
    std::string engine_tag;
    std::vector<std::uint8_t> kv_state;

    bool operator==(const ActivationPayload&) const = default;
};

struct ParameterDeltaPayload {
    std::string target_module;
    std::uint32_t rank = 1;
    Digest blob_digest;
    std::string provenance_note;

    bool operator==(const ParameterDeltaPayload&) const = default;
};

using MemoryPayload = std::variant<PlaintextPayload, ActivationPayload, ParameterDeltaPayload>;

MemoryKind kind_of(const MemoryPayload& payload) noexcept;

struct MetadataHeader {
    // Descriptive identifiers
    Timestamp created_at;
    Timestamp updated_at;
    OriginSignature origin = OriginSignature::UserProvided;
    std::string semantic_type;
    std::set<std::string> tags;
    std::string namespace_name;
    MemoryLayer layer = MemoryLayer::Private;
    MemoryKind memory_kind = MemoryKind::Plaintext;  // tier tag; must agree with the payload
    // Governance attributes
    AccessPolicy acl;
    LifespanPolicy lifespan;
    int priority = 50;
    Compliance compliance;
    // Behavioral usage indicators
    std::uint64_t access_count = 0;
    Timestamp last_access;
    Fingerprint fingerprint;
    std::vector<VersionRecord> version_chain;
    LifecycleState state;

    bool operator==(const MetadataHeader&) const = default;
};

struct MemCube {
    CubeId cube_id;
    MetadataHeader header;
    MemoryPayload payload;

    std::uint64_t version() const { return header.version_chain.empty() ? 0 : header.version_chain.back().version; }
    const PlaintextPayload* plaintext() const { return std::get_if<PlaintextPayload>(&payload); }
    const ActivationPayload* activation() const { return std::get_if<ActivationPayload>(&payload); }
    const ParameterDeltaPayload* parameter() const { return std::get_if<ParameterDeltaPayload>(&payload); }

    bool operator==(const MemCube&) const = default;
};

// Enum <-> stable string names used by the canonical encoding and the CLI.
std::string_view to_string(MemoryKind v) noexcept;
std::string_view to_string(OriginSignature v) noexcept;
std::string_view to_string(MemoryLayer v) noexcept;
std::string_view to_string(StateKind v) noexcept;
std::string_view to_string(ShareScope v) noexcept;
std::string_view to_string(LifespanMode v) noexcept;
std::string_view to_string(VersionOp v) noexcept;

// Each parse_* throws Error(BadArgs) on unknown names.
MemoryKind parse_memory_kind(std::string_view s);
OriginSignature parse_origin(std::string_view s);
MemoryLayer parse_layer(std::string_view s);
StateKind parse_state_kind(std::string_view s);
ShareScope parse_share_scope(std::string_view s);
LifespanMode parse_lifespan_mode(std::string_view s);
VersionOp parse_version_op(std::string_view s);

std::string state_name(const LifecycleState& s);  // "Frozen(Activated)" for frozen states

}  // namespace memkernel
