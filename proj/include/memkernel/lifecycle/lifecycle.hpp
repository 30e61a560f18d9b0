// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// MemLifecycle: the six-state machine, TTL/idle ticks, and the time machine.
//
//   Generated --Access--> Activated --Access--> Activated
//   Generated|Activated --MergeInto--> Merged
//   Generated|Activated|Merged --ArchiveRequest | idle Tick--> Archived
//   Archived --RestoreRequest(v)--> Activated      (appends a Rollback record)
//   Generated|Activated|Merged|Archived --TTL Tick--> Expired   (absorbing)
//   any non-Expired --Freeze--> Frozen(prior) --Unfreeze--> prior
//
// Every other (state, event) pair is rejected. Tick is a clock signal and is
// accepted in every state; it only moves a cube when a policy deadline passed.

#include "memkernel/core/cube.hpp"
#include "memkernel/core/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace memkernel {

enum class EventKind { Access, MergeInto, UserConfirm, ArchiveRequest, RestoreRequest, Freeze, Unfreeze, Tick };

inline constexpr EventKind kAllEvents[] = {EventKind::Access,         EventKind::MergeInto, EventKind::UserConfirm,
                                           EventKind::ArchiveRequest, EventKind::RestoreRequest, EventKind::Freeze,
                                           EventKind::Unfreeze,       EventKind::Tick};

std::string_view to_string(EventKind e) noexcept;
EventKind parse_event_kind(std::string_view s);  // throws Error(BadArgs)

struct LifecycleEvent {
    EventKind kind = EventKind::Tick;
    CubeId merge_target;               // MergeInto
    std::uint64_t restore_version = 0; // RestoreRequest

    static LifecycleEvent of(EventKind k) { return LifecycleEvent{k, {}, 0}; }
    static LifecycleEvent merge_into(CubeId target) { return LifecycleEvent{EventKind::MergeInto, std::move(target), 0}; }
    static LifecycleEvent restore(std::uint64_t version) { return LifecycleEvent{EventKind::RestoreRequest, {}, version}; }
};

// Historic payload lookup backing the time machine (the vault keeps every version).
class PayloadHistory {
public:
    virtual ~PayloadHistory() = default;
    virtual std::optional<MemoryPayload> payload_at(const CubeId& id, std::uint64_t version) const = 0;
};

// Whether the static table lists (state, event). Frozen is the frozen state
// itself; its prior does not matter for acceptance.
bool table_accepts(StateKind state, EventKind event) noexcept;

// State a Tick at `now` would move the cube to, if any. TTL expiry is strict
// (now > created_at + ttl) and wins over idle archiving. Frozen, Expired and
// Permanent cubes never move.
std::optional<StateKind> due_state(const MemCube& cube, Timestamp now) noexcept;

struct TransitionResult {
    MemCube cube;
    LifecycleState from;
    LifecycleState to;
    bool version_appended = false;
};

// Applies one event. Throws Error(IllegalTransition), Error(FrozenViolation)
// or Error(UnknownVersion). `history` is needed only for RestoreRequest.
TransitionResult transition(const MemCube& cube, const LifecycleEvent& event, Timestamp now, const Identity& actor,
                            const PayloadHistory* history = nullptr);

struct SnapshotId {
    CubeId cube_id;
    std::uint64_t version = 0;

    std::string str() const { return cube_id + "@" + std::to_string(version); }
    static SnapshotId parse(std::string_view s);  // throws Error(BadArgs)
    bool operator==(const SnapshotId&) const = default;
};

SnapshotId snapshot(const MemCube& cube);

// Additive rollback: appends a Rollback record whose payload equals the
// historic snapshot byte for byte. Throws FrozenViolation / UnknownVersion /
// IllegalTransition (Expired).
MemCube rollback(const MemCube& cube, std::uint64_t version, const PayloadHistory& history, const Identity& actor,
                 Timestamp now, const Embedder& embedder = default_embedder());

struct TickChange {
    CubeId cube_id;
    LifecycleState from;
    LifecycleState to;
    bool operator==(const TickChange&) const = default;
};

// Changes a sweep at `now` would make, sorted by cube id. Pure.
std::vector<TickChange> tick(std::span<const MemCube> cubes, Timestamp now);

}  // namespace memkernel
