// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Workload replay. A trace is canonical JSON:
//
//   {"epoch": "2025-01-01T00:00:00Z",
//    "sessions": [{"id": "s1", "actor": "alice", "turns": [
//      {"at": 0,  "remember": {"label": "c1", "text": "...", "tags": ["x"]}},
//      {"at": 60, "prompt": "...", "relevant": ["c1"]}]}]}
//
// `at` is seconds from the epoch, non-decreasing within a session. Turns of
// all sessions run in (at, session, turn) order against one kernel on a
// manual clock. Latency is simulated from a CostModel and covers the
// kernel-side injection path only; no generator model is involved.

#include "memkernel/core/codec.hpp"
#include "memkernel/core/time.hpp"
#include "memkernel/harness/cost_model.hpp"
#include "memkernel/scheduler/scheduler.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace memkernel {

struct TraceTurn {
    double at = 0;
    // remember
    std::string label;
    std::string text;
    std::set<std::string> tags;
    // prompt
    std::string prompt;
    std::vector<std::string> relevant;

    bool is_prompt() const { return !prompt.empty(); }
};

struct TraceSession {
    std::string id;
    std::string actor = "user";
    std::vector<TraceTurn> turns;
};

struct WorkloadTrace {
    Timestamp epoch = Timestamp::from_seconds(1'735'689'600);
    std::vector<TraceSession> sessions;
};

// Throws Error(TraceInvalid) with the offending path.
WorkloadTrace parse_trace(const Json& j);
Json trace_to_json(const WorkloadTrace& t);

struct ReplayConfig {
    std::size_t k = 20;
    std::uint64_t budget_tokens = 4096;
    bool migration = true;
    ScheduleWeights weights;
    MigrationRule rule;
    std::optional<std::size_t> capacity;  // namespace capacity; evict after each turn when set
    std::optional<CostModel> cost;        // defaults to the Qwen3-8B fit
    std::uint64_t seed = 1;
};

struct TurnMetrics {
    std::string session;
    std::size_t turn = 0;
    bool prompt = false;
    double recall = 0;  // prompt turns with ground truth
    std::size_t retrieved = 0;
    std::size_t plaintext_items = 0;
    std::size_t activation_items = 0;
    std::uint64_t prefill_tokens = 0;
    double latency_s = 0;
    std::vector<std::string> promoted;  // labels
    std::size_t evicted = 0;
};

struct ReplayReport {
    std::vector<TurnMetrics> turns;
    std::size_t prompts = 0;
    double recall_at_k = 0;     // mean over prompt turns with ground truth
    double cache_hit_rate = 0;  // activation items / injected items
    std::size_t promotions = 0;
    std::size_t evictions = 0;
    double mean_latency_s = 0;
    std::size_t k = 0;
};

Json to_json(const ReplayReport& r);
// Canonical JSON text; identical trace + config gives identical bytes.
std::string report_text(const ReplayReport& r);

ReplayReport replay(const WorkloadTrace& trace, const ReplayConfig& config = {});

}  // namespace memkernel
