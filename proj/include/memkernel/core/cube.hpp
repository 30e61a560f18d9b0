// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "memkernel/core/fingerprint.hpp"
#include "memkernel/core/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace memkernel {

// Caller-supplied header fields for create_cube.
struct CubeDraft {
    MemoryPayload payload;
    OriginSignature origin = OriginSignature::UserProvided;
    std::string semantic_type;
    std::set<std::string> tags;
    std::string namespace_name;
    MemoryLayer layer = MemoryLayer::Private;
    AccessPolicy acl;
    LifespanPolicy lifespan;
    int priority = 50;
    std::set<std::string> sensitivity;
};

struct CreateContext {
    CubeId cube_id;
    Timestamp now;
    Identity actor;
    const Embedder* embedder = nullptr;  // default_embedder() when null
    // Answers whether a Plaintext cube with this id exists (for Activation payloads).
    std::function<bool(const CubeId&)> plaintext_exists;
};

// Builds a Generated, version-1 cube. Throws Error(InvalidPayload) or
// Error(InvalidGovernance).
MemCube create_cube(CubeDraft draft, const CreateContext& ctx);

// Fingerprint source text: Plaintext text, Activation source id,
// ParameterDelta provenance note.
std::string fingerprint_source(const MemoryPayload& payload);
Fingerprint compute_fingerprint(const MemoryPayload& payload, const Embedder& embedder);

// Appends a version record for the cube's current payload (digest computed here)
// and bumps updated_at.
void append_version(MemCube& cube, VersionOp op, std::vector<VersionRef> parents, const Identity& actor,
                    Timestamp at, std::string label = {});

// Replaces the payload and refreshes the fingerprint (no version record).
void set_payload(MemCube& cube, MemoryPayload payload, const Embedder& embedder);

// Stable violation codes, in a fixed check order.
namespace violation {
inline constexpr const char* kIdLength = "ID_LENGTH";
inline constexpr const char* kEmptyNamespace = "EMPTY_NAMESPACE";
inline constexpr const char* kTimestampOrder = "TIMESTAMP_ORDER";
inline constexpr const char* kLastAccessOrder = "LAST_ACCESS_ORDER";
inline constexpr const char* kFingerprintDim = "FINGERPRINT_DIM";
inline constexpr const char* kFingerprintNotUnit = "FINGERPRINT_NOT_UNIT";
inline constexpr const char* kPriorityRange = "PRIORITY_RANGE";
inline constexpr const char* kPayloadKindMismatch = "PAYLOAD_KIND_MISMATCH";
inline constexpr const char* kEmptyText = "EMPTY_TEXT";
inline constexpr const char* kParameterRank = "PARAMETER_RANK";
inline constexpr const char* kEmptySource = "EMPTY_SOURCE";
inline constexpr const char* kLifespanInvalid = "LIFESPAN_INVALID";
inline constexpr const char* kAclOwnerNotWriter = "ACL_OWNER_NOT_WRITER";
inline constexpr const char* kAclReadOnlyWriters = "ACL_READONLY_WRITERS";
inline constexpr const char* kFrozenPrior = "FROZEN_PRIOR_INVALID";
inline constexpr const char* kChainEmpty = "VERSION_CHAIN_EMPTY";
inline constexpr const char* kVersionStart = "VERSION_START";
inline constexpr const char* kVersionGap = "VERSION_GAP";
inline constexpr const char* kCreateNotFirst = "CREATE_NOT_FIRST";
inline constexpr const char* kMergeParents = "MERGE_PARENTS";
inline constexpr const char* kParentCount = "PARENT_COUNT";
inline constexpr const char* kDigestMismatch = "DIGEST_MISMATCH";
}  // namespace violation

std::vector<std::string> validate(const MemCube& cube, std::size_t fingerprint_dim = kFingerprintDim);

}  // namespace memkernel
