// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// MemReader: a deterministic rule grammar from a prompt to a MemoryCall.
//
// Time phrases: today, yesterday, last/this week|month|year, past N days|weeks,
// ISO dates ("on 2025-03-04"), ranges ("from D1 to D2", "between D1 and D2",
// "D1..D2"; the end date is inclusive), and "the day|week|month|year before",
// which shifts the previous call's window one unit back. Weeks start Monday.
// Calendar units are UTC.

#include "memkernel/core/codec.hpp"
#include "memkernel/core/time.hpp"
#include "memkernel/core/types.hpp"

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memkernel {

enum class Intent { Retrieve, Summarize, Update, Archive, Export };
std::string_view to_string(Intent i) noexcept;
Intent parse_intent(std::string_view s);  // throws Error(BadArgs)

struct TimeWindow {
    Timestamp from;  // inclusive
    Timestamp to;    // exclusive
    bool operator==(const TimeWindow&) const = default;
};

struct MemoryCall {
    Identity caller_id;
    std::string context_scope;
    std::set<MemoryKind> memory_types;  // empty: every kind
    Intent intent = Intent::Retrieve;
    std::optional<TimeWindow> time_window;
    std::set<std::string> topic_tags;
    std::set<std::string> anchors;  // quoted phrases and cube ids
    std::optional<std::string> output_target;

    bool operator==(const MemoryCall&) const = default;
};

void to_json(Json& j, const TimeWindow& w);
void from_json(const Json& j, TimeWindow& w);
void to_json(Json& j, const MemoryCall& c);
void from_json(const Json& j, MemoryCall& c);

struct ReaderInput {
    std::string_view prompt;
    std::span<const MemoryCall> dialogue;  // oldest first
    const Clock* clock = nullptr;          // required for phrases relative to now
    Identity caller_id;
    std::string context_scope;
};

// Throws Error(EmptyPrompt) or Error(UnresolvableTime).
MemoryCall parse(const ReaderInput& input);

// Extension point for model-backed parsers.
class PromptParser {
public:
    virtual ~PromptParser() = default;
    virtual MemoryCall parse(const ReaderInput& input) const = 0;
};

class GrammarParser final : public PromptParser {
public:
    MemoryCall parse(const ReaderInput& input) const override { return memkernel::parse(input); }
};

}  // namespace memkernel
