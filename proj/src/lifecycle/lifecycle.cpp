// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/lifecycle/lifecycle.hpp"

#include "memkernel/core/codec.hpp"
#include "memkernel/core/errors.hpp"

#include <algorithm>
#include <charconv>

namespace memkernel {

namespace {

constexpr std::pair<EventKind, std::string_view> kEventNames[] = {
    {EventKind::Access, "Access"},
    {EventKind::MergeInto, "MergeInto"},
    {EventKind::UserConfirm, "UserConfirm"},
    {EventKind::ArchiveRequest, "ArchiveRequest"},
    {EventKind::RestoreRequest, "RestoreRequest"},
    {EventKind::Freeze, "Freeze"},
    {EventKind::Unfreeze, "Unfreeze"},
    {EventKind::Tick, "Tick"},
};

[[noreturn]] void illegal(const LifecycleState& s, EventKind e)
{
    throw Error(ErrorCode::IllegalTransition, state_name(s) + " --" + std::string(to_string(e)) + "--> (unlisted)");
}

}  // namespace

std::string_view to_string(EventKind e) noexcept
{
    for (const auto& [k, n] : kEventNames) {
        if (k == e) return n;
    }
    return "?";
}

EventKind parse_event_kind(std::string_view s)
{
    for (const auto& [k, n] : kEventNames) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::BadArgs, "unknown lifecycle event '" + std::string(s) + "'");
}

bool table_accepts(StateKind state, EventKind event) noexcept
{
    using S = StateKind;
    using E = EventKind;
    switch (event) {
    case E::Tick: return true;
    case E::Access: return state == S::Generated || state == S::Activated;
    case E::MergeInto: return state == S::Generated || state == S::Activated;
    case E::ArchiveRequest: return state == S::Generated || state == S::Activated || state == S::Merged;
    case E::RestoreRequest: return state == S::Archived;
    case E::Freeze: return state != S::Expired && state != S::Frozen;
    case E::Unfreeze: return state == S::Frozen;
    case E::UserConfirm: return false;
    }
    return false;
}

std::optional<StateKind> due_state(const MemCube& cube, Timestamp now) noexcept
{
    const auto& h = cube.header;
    const StateKind s = h.state.kind;
    if (s == StateKind::Frozen || s == StateKind::Expired || h.lifespan.mode == LifespanMode::Permanent) {
        return std::nullopt;
    }
    if (h.lifespan.mode == LifespanMode::TtlSeconds && now > h.created_at.plus_seconds(h.lifespan.seconds)) {
        return StateKind::Expired;
    }
    if (h.lifespan.archive_after_idle_seconds && s != StateKind::Archived &&
        now > h.last_access.plus_seconds(*h.lifespan.archive_after_idle_seconds)) {
        return StateKind::Archived;
    }
    return std::nullopt;
}

TransitionResult transition(const MemCube& cube, const LifecycleEvent& event, Timestamp now, const Identity& actor,
                            const PayloadHistory* history)
{
    const LifecycleState from = cube.header.state;
    TransitionResult result{cube, from, from, false};
    MemCube& out = result.cube;

    if (from.is_frozen() && event.kind != EventKind::Unfreeze && event.kind != EventKind::Tick) {
        throw Error(ErrorCode::FrozenViolation, "cube " + cube.cube_id + " is frozen");
    }
    if (!table_accepts(from.kind, event.kind)) {
        illegal(from, event.kind);
    }

    switch (event.kind) {
    case EventKind::Access:
        out.header.access_count += 1;
        out.header.last_access = std::max(out.header.last_access, now);
        out.header.state = LifecycleState::of(StateKind::Activated);
        break;
    case EventKind::MergeInto:
        out.header.state = LifecycleState::of(StateKind::Merged);
        break;
    case EventKind::ArchiveRequest:
        out.header.state = LifecycleState::of(StateKind::Archived);
        break;
    case EventKind::RestoreRequest: {
        if (history == nullptr) {
            throw Error(ErrorCode::UnknownVersion, "no history available for restore");
        }
        out = rollback(cube, event.restore_version, *history, actor, now);
        out.header.state = LifecycleState::of(StateKind::Activated);
        result.version_appended = true;
        break;
    }
    case EventKind::Freeze:
        out.header.state = LifecycleState::frozen(from.kind);
        break;
    case EventKind::Unfreeze:
        out.header.state = LifecycleState::of(from.prior);
        break;
    case EventKind::Tick:
        if (const auto due = due_state(cube, now)) {
            out.header.state = LifecycleState::of(*due);
        }
        break;
    case EventKind::UserConfirm:
        illegal(from, event.kind);
    }
    if (!(out.header.state == from) && now > out.header.updated_at) {
        out.header.updated_at = now;
    }
    result.to = out.header.state;
    return result;
}

SnapshotId SnapshotId::parse(std::string_view s)
{
    const auto at = s.rfind('@');
    if (at == std::string_view::npos || at == 0) {
        throw Error(ErrorCode::BadArgs, "snapshot id must be <cube>@<version>");
    }
    std::uint64_t v = 0;
    const auto tail = s.substr(at + 1);
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), v);
    if (ec != std::errc{} || ptr != tail.data() + tail.size() || v == 0) {
        throw Error(ErrorCode::BadArgs, "snapshot version is not a positive integer");
    }
    return SnapshotId{std::string(s.substr(0, at)), v};
}

SnapshotId snapshot(const MemCube& cube) { return SnapshotId{cube.cube_id, cube.version()}; }

MemCube rollback(const MemCube& cube, std::uint64_t version, const PayloadHistory& history, const Identity& actor,
                 Timestamp now, const Embedder& embedder)
{
    if (cube.header.state.is_frozen()) {
        throw Error(ErrorCode::FrozenViolation, "cube " + cube.cube_id + " is frozen");
    }
    if (cube.header.state.kind == StateKind::Expired) {
        throw Error(ErrorCode::IllegalTransition, "cannot roll back an expired cube");
    }
    if (version == 0 || version > cube.version()) {
        throw Error(ErrorCode::UnknownVersion, cube.cube_id + "@" + std::to_string(version));
    }
    std::optional<MemoryPayload> historic =
        version == cube.version() ? std::optional<MemoryPayload>(cube.payload) : history.payload_at(cube.cube_id, version);
    if (!historic) {
        throw Error(ErrorCode::UnknownVersion, cube.cube_id + "@" + std::to_string(version));
    }
    const Digest expected = cube.header.version_chain[version - 1].snapshot_digest;
    if (payload_digest(*historic) != expected) {
        throw Error(ErrorCode::Internal, "snapshot digest mismatch for " + cube.cube_id + "@" + std::to_string(version));
    }
    MemCube out = cube;
    set_payload(out, std::move(*historic), embedder);
    append_version(out, VersionOp::Rollback, {{cube.cube_id, version}}, actor, now);
    return out;
}

std::vector<TickChange> tick(std::span<const MemCube> cubes, Timestamp now)
{
    std::vector<TickChange> out;
    for (const auto& c : cubes) {
        if (const auto due = due_state(c, now)) {
            out.push_back(TickChange{c.cube_id, c.header.state, LifecycleState::of(*due)});
        }
    }
    std::sort(out.begin(), out.end(), [](const TickChange& a, const TickChange& b) { return a.cube_id < b.cube_id; });
    return out;
}

}  // namespace memkernel
