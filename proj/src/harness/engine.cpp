// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/harness/engine.hpp"

#include "memkernel/core/errors.hpp"
#include "memkernel/core/fingerprint.hpp"

namespace memkernel {

namespace {

constexpr std::uint64_t mix(std::uint64_t h, std::uint64_t x) noexcept
{
    h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdULL;
    return h ^ (h >> 33);
}

std::uint64_t splitmix64(std::uint64_t& s) noexcept
{
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Output vocabulary for generated tokens.
constexpr std::array<std::string_view, 32> kOutputVocab{
    "the",   "memory", "patient", "note",  "review", "dose",   "plan",   "risk",  "clause", "budget", "meeting",
    "today", "follow", "up",      "check", "record", "update", "summary", "next", "step",   "with",   "and",
    "for",   "is",     "was",     "will",  "be",     "shared", "archive", "kv",   "cache",  "done"};

void put_be64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_be64(std::span<const std::uint8_t> b)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

}  // namespace

EngineState MockEngine::encode(std::span<const std::string> tokens) const
{
    return extend(EngineState{kSeed, 0}, tokens);
}

EngineState MockEngine::extend(EngineState state, std::span<const std::string> tokens) const
{
    for (const auto& t : tokens) {
        state.hash = mix(state.hash, fnv1a64(t));
        ++state.tokens;
    }
    return state;
}

std::vector<std::string> MockEngine::generate(const EngineState& state, std::size_t max_tokens) const
{
    std::uint64_t s = state.hash ^ (state.tokens * 0x9e3779b97f4a7c15ULL);
    std::vector<std::string> out;
    out.reserve(max_tokens);
    for (std::size_t i = 0; i < max_tokens; ++i) {
        out.emplace_back(kOutputVocab[splitmix64(s) % kOutputVocab.size()]);
    }
    return out;
}

std::vector<std::uint8_t> MockEngine::serialize(const EngineState& state) const
{
    std::vector<std::uint8_t> out;
    out.reserve(16);
    put_be64(out, state.hash);
    put_be64(out, state.tokens);
    return out;
}

EngineState MockEngine::deserialize(std::span<const std::uint8_t> bytes) const
{
    if (bytes.size() != 16) {
        throw Error(ErrorCode::InvalidPayload, "mock KV state must be 16 bytes, got " + std::to_string(bytes.size()));
    }
    return EngineState{get_be64(bytes.first(8)), get_be64(bytes.subspan(8))};
}

const MockEngine& mock_engine()
{
    static const MockEngine engine;
    return engine;
}

DualPathResult run_dual_path(std::string_view memory_text, std::string_view query_text, const InferenceEngine& engine,
                             std::size_t max_tokens)
{
    const auto memory = whitespace_tokens(memory_text);
    const auto query = whitespace_tokens(query_text);
    std::vector<std::string> prompt = memory;
    prompt.insert(prompt.end(), query.begin(), query.end());

    DualPathResult r;
    r.memory_tokens = memory.size();
    r.query_tokens = query.size();
    r.prompt_output = engine.generate(engine.encode(prompt), max_tokens);
    const auto cached = engine.serialize(engine.encode(memory));
    r.kv_output = engine.generate(engine.extend(engine.deserialize(cached), query), max_tokens);
    return r;
}

}  // namespace memkernel
