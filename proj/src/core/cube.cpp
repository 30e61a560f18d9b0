// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/cube.hpp"

#include "memkernel/core/codec.hpp"
#include "memkernel/core/errors.hpp"

#include <cmath>

namespace memkernel {

namespace {

void check_governance(const AccessPolicy& acl, const LifespanPolicy& lifespan, int priority)
{
    if (priority < 0 || priority > 100) {
        throw Error(ErrorCode::InvalidGovernance, "priority " + std::to_string(priority) + " outside [0,100]");
    }
    if (acl.owner.empty()) {
        throw Error(ErrorCode::InvalidGovernance, "acl owner is empty");
    }
    if (lifespan.mode != LifespanMode::Permanent && lifespan.seconds <= 0) {
        throw Error(ErrorCode::InvalidGovernance, "lifespan seconds must be positive");
    }
    if (lifespan.archive_after_idle_seconds && *lifespan.archive_after_idle_seconds <= 0) {
        throw Error(ErrorCode::InvalidGovernance, "archive_after_idle_seconds must be positive");
    }
}

}  // namespace

std::string fingerprint_source(const MemoryPayload& payload)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, PlaintextPayload>) {
                return v.text;
            } else if constexpr (std::is_same_v<T, ActivationPayload>) {
                return v.source_cube;
            } else {
                return v.provenance_note;
            }
        },
        payload);
}

Fingerprint compute_fingerprint(const MemoryPayload& payload, const Embedder& embedder)
{
    return embedder.embed(fingerprint_source(payload));
}

MemCube create_cube(CubeDraft draft, const CreateContext& ctx)
{
    if (draft.namespace_name.empty()) {
        throw Error(ErrorCode::InvalidPayload, "namespace is empty");
    }
    if (const auto* p = std::get_if<PlaintextPayload>(&draft.payload)) {
        if (p->text.empty()) {
            throw Error(ErrorCode::InvalidPayload, "plaintext text is empty");
        }
    } else if (const auto* a = std::get_if<ActivationPayload>(&draft.payload)) {
        if (a->source_cube.empty() || !ctx.plaintext_exists || !ctx.plaintext_exists(a->source_cube)) {
            throw Error(ErrorCode::InvalidPayload, "activation source_cube '" + a->source_cube + "' is dangling");
        }
    } else if (const auto* d = std::get_if<ParameterDeltaPayload>(&draft.payload)) {
        if (d->rank == 0) {
            throw Error(ErrorCode::InvalidPayload, "parameter rank must be positive");
        }
    }
    draft.acl.writers.insert(draft.acl.owner);
    if (draft.acl.share_scope == ShareScope::ReadOnly) {
        draft.acl.writers = {draft.acl.owner};
    }
    check_governance(draft.acl, draft.lifespan, draft.priority);

    const Embedder& embedder = ctx.embedder != nullptr ? *ctx.embedder : default_embedder();
    MemCube cube;
    cube.cube_id = ctx.cube_id;
    auto& h = cube.header;
    h.created_at = ctx.now;
    h.updated_at = ctx.now;
    h.origin = draft.origin;
    h.semantic_type = std::move(draft.semantic_type);
    h.tags = std::move(draft.tags);
    h.namespace_name = std::move(draft.namespace_name);
    h.layer = draft.layer;
    h.memory_kind = kind_of(draft.payload);
    h.acl = std::move(draft.acl);
    h.lifespan = draft.lifespan;
    h.priority = draft.priority;
    h.compliance.sensitivity = std::move(draft.sensitivity);
    h.access_count = 0;
    h.last_access = ctx.now;
    h.fingerprint = compute_fingerprint(draft.payload, embedder);
    h.state = LifecycleState::of(StateKind::Generated);
    cube.payload = std::move(draft.payload);
    h.version_chain.push_back(VersionRecord{1, {}, VersionOp::Create, ctx.actor, ctx.now, payload_digest(cube.payload), {}});
    return cube;
}

void append_version(MemCube& cube, VersionOp op, std::vector<VersionRef> parents, const Identity& actor,
                    Timestamp at, std::string label)
{
    VersionRecord r;
    r.version = cube.version() + 1;
    r.parents = std::move(parents);
    r.op = op;
    r.actor = actor;
    r.at = at;
    r.snapshot_digest = payload_digest(cube.payload);
    r.label = std::move(label);
    cube.header.version_chain.push_back(std::move(r));
    if (at > cube.header.updated_at) {
        cube.header.updated_at = at;
    }
}

void set_payload(MemCube& cube, MemoryPayload payload, const Embedder& embedder)
{
    cube.payload = std::move(payload);
    cube.header.memory_kind = kind_of(cube.payload);
    cube.header.fingerprint = compute_fingerprint(cube.payload, embedder);
}

std::vector<std::string> validate(const MemCube& cube, std::size_t fingerprint_dim)
{
    namespace v = violation;
    std::vector<std::string> out;
    const auto& h = cube.header;

    if (cube.cube_id.size() < 26 || cube.cube_id.size() > 36) out.emplace_back(v::kIdLength);
    if (h.namespace_name.empty()) out.emplace_back(v::kEmptyNamespace);
    if (h.updated_at < h.created_at) out.emplace_back(v::kTimestampOrder);
    if (h.last_access < h.created_at) out.emplace_back(v::kLastAccessOrder);
    if (h.fingerprint.size() != fingerprint_dim) {
        out.emplace_back(v::kFingerprintDim);
    }
    if (std::abs(l2_norm(h.fingerprint) - 1.0) > 1e-9) out.emplace_back(v::kFingerprintNotUnit);
    if (h.priority < 0 || h.priority > 100) out.emplace_back(v::kPriorityRange);
    if (h.memory_kind != kind_of(cube.payload)) out.emplace_back(v::kPayloadKindMismatch);

    if (const auto* p = cube.plaintext(); p != nullptr && p->text.empty()) out.emplace_back(v::kEmptyText);
    if (const auto* d = cube.parameter(); d != nullptr && d->rank == 0) out.emplace_back(v::kParameterRank);
    if (const auto* a = cube.activation(); a != nullptr && a->source_cube.empty()) out.emplace_back(v::kEmptySource);

    const auto& life = h.lifespan;
    if ((life.mode != LifespanMode::Permanent && life.seconds <= 0) ||
        (life.archive_after_idle_seconds && *life.archive_after_idle_seconds <= 0)) {
        out.emplace_back(v::kLifespanInvalid);
    }
    if (!h.acl.writers.contains(h.acl.owner)) out.emplace_back(v::kAclOwnerNotWriter);
    if (h.acl.share_scope == ShareScope::ReadOnly &&
        !(h.acl.writers.size() == 1 && h.acl.writers.contains(h.acl.owner))) {
        out.emplace_back(v::kAclReadOnlyWriters);
    }
    if (h.state.is_frozen() && h.state.prior == StateKind::Frozen) out.emplace_back(v::kFrozenPrior);

    const auto& chain = h.version_chain;
    if (chain.empty()) {
        out.emplace_back(v::kChainEmpty);
        return out;
    }
    if (chain.front().version != 1) out.emplace_back(v::kVersionStart);
    for (std::size_t i = 1; i < chain.size(); ++i) {
        if (chain[i].version != chain[i - 1].version + 1) {
            out.emplace_back(v::kVersionGap);
            break;
        }
    }
    bool create_misplaced = false, merge_bad = false, parents_bad = false;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const auto& r = chain[i];
        switch (r.op) {
        case VersionOp::Create:
            if (i != 0 || r.version != 1) create_misplaced = true;
            if (!r.parents.empty()) parents_bad = true;
            break;
        case VersionOp::Merge:
            if (r.parents.size() < 2) merge_bad = true;
            break;
        default:
            if (r.parents.size() != 1) parents_bad = true;
            break;
        }
    }
    if (create_misplaced) out.emplace_back(v::kCreateNotFirst);
    if (merge_bad) out.emplace_back(v::kMergeParents);
    if (parents_bad) out.emplace_back(v::kParentCount);
    if (chain.back().snapshot_digest != payload_digest(cube.payload)) out.emplace_back(v::kDigestMismatch);
    return out;
}

}  // namespace memkernel
