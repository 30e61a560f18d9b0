// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// MemScheduler: candidate scoring, token-budgeted injection plans, and
// cross-type migration (promote / demote / distill / offload) plus eviction.
//
//   score = w_sim * max(0, cos)
//         + w_freq * min(1, log2(1 + access_count) / log2(1 + F_cap))
//         + w_rec * exp(-(now - last_access) / tau)
//         + w_pri * priority / 100

#include "memkernel/core/ids.hpp"
#include "memkernel/core/types.hpp"
#include "memkernel/harness/engine.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace memkernel {

struct ScheduleWeights {
    double w_sim = 0.5;
    double w_freq = 0.2;
    double w_rec = 0.2;
    double w_pri = 0.1;
    double tau_recency = 604800;
    double f_cap = 64;

    void check() const;  // throws Error(InvalidConfig)
    bool operator==(const ScheduleWeights&) const = default;
};

struct MigrationRule {
    double theta_promote = 5;      // accesses per window
    double theta_demote = 0.05;    // heat floor
    double theta_distill_sessions = 3;
    double window_seconds = 3600;

    void check() const;
    bool operator==(const MigrationRule&) const = default;
};

double score_terms(double cosine, std::uint64_t access_count, double dt_seconds, int priority,
                   const ScheduleWeights& w) noexcept;
// `query` null means the zero vector (frequency, recency and priority only).
double score(const MemCube& cube, const Fingerprint* query, Timestamp now, const ScheduleWeights& w);

struct Candidate {
    CubeId cube_id;
    MemoryKind kind = MemoryKind::Plaintext;
    std::uint64_t token_count = 0;
    double score = 0;
    Timestamp updated_at;
    CubeId twin_of;  // Activation candidates: the plaintext source
};

struct PlanItem {
    CubeId cube_id;
    std::uint64_t token_count = 0;
    double score = 0;
    bool operator==(const PlanItem&) const = default;
};

struct InjectionPlan {
    std::vector<PlanItem> plaintext_items;
    std::vector<PlanItem> activation_items;
    std::vector<PlanItem> parameter_modules;
    std::uint64_t total_tokens = 0;
    std::uint64_t budget = 0;

    std::size_t size() const { return plaintext_items.size() + activation_items.size() + parameter_modules.size(); }
    bool operator==(const InjectionPlan&) const = default;
};

inline constexpr std::size_t kMaxParameterModules = 4;

// Greedy pack by (score desc, updated_at desc, cube_id asc): accept while the
// budget holds, skip overflowing items, stop after k accepted. A plaintext
// candidate whose activation twin is also a candidate is dropped.
InjectionPlan select(std::vector<Candidate> candidates, std::uint64_t budget_tokens, std::size_t k);

// Access heat: sum of exp(-(now - t) / window) over accesses, divided by theta_promote.
double heat(std::span<const Timestamp> accesses, Timestamp now, const MigrationRule& rule);
std::size_t accesses_in_window(std::span<const Timestamp> accesses, Timestamp now, double window_seconds);

struct PromoteResult {
    MemCube twin;    // new Activation cube
    MemCube source;  // plaintext source with an Import record
};

struct Provenanced {
    MemCube derived;
    std::vector<MemCube> sources;  // updated sources (archived where applicable)
};

struct EvictionResult {
    std::vector<CubeId> evicted;  // archive in this order
    bool frozen_blocked = false;  // still over capacity because only Frozen cubes remain
};

class Scheduler {
public:
    explicit Scheduler(ScheduleWeights weights = {}, MigrationRule rule = {},
                       const InferenceEngine& engine = mock_engine());

    const ScheduleWeights& weights() const { return weights_; }
    const MigrationRule& rule() const { return rule_; }
    const InferenceEngine& engine() const { return *engine_; }

    Candidate candidate(const MemCube& cube, const Fingerprint* query, Timestamp now) const;

    // Throws PreconditionNotMet / FrozenViolation / IllegalForPayloadKind.
    PromoteResult promote(const MemCube& source, std::span<const Timestamp> accesses, Timestamp now, const CubeId& new_id,
                          const Identity& actor) const;
    MemCube demote(const MemCube& twin, std::span<const Timestamp> accesses, Timestamp now, const Identity& actor) const;
    // `sessions` are the distinct session ids that accessed the sources.
    Provenanced distill(std::span<const MemCube> sources, const std::set<std::string>& sessions, Timestamp now,
                        const CubeId& new_id, const Identity& actor) const;
    Provenanced offload(const MemCube& param, bool is_cold, Timestamp now, const CubeId& new_id,
                        const Identity& actor) const;

    EvictionResult evict(std::span<const MemCube> cubes, std::size_t capacity, Timestamp now) const;

private:
    ScheduleWeights weights_;
    MigrationRule rule_;
    const InferenceEngine* engine_;
};

// Digest over the concatenated canonical payloads, in the given order.
Digest distill_digest(std::span<const MemCube> sources);

}  // namespace memkernel
