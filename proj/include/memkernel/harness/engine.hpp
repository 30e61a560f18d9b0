// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Inference engine contract (encode / extend / generate) and a deterministic
// mock whose state is a rolling hash over whitespace tokens. Because the
// state after m||q is by construction extend(state(m), q), direct prompt
// injection and KV-cache injection produce identical outputs.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memkernel {

struct EngineState {
    std::uint64_t hash = 0;
    std::uint64_t tokens = 0;
    bool operator==(const EngineState&) const = default;
};

class InferenceEngine {
public:
    virtual ~InferenceEngine() = default;
    virtual std::string tag() const = 0;
    virtual EngineState encode(std::span<const std::string> tokens) const = 0;
    virtual EngineState extend(EngineState state, std::span<const std::string> tokens) const = 0;
    virtual std::vector<std::string> generate(const EngineState& state, std::size_t max_tokens) const = 0;

    // Opaque KV bytes stored in Activation payloads.
    virtual std::vector<std::uint8_t> serialize(const EngineState& state) const = 0;
    virtual EngineState deserialize(std::span<const std::uint8_t> bytes) const = 0;  // throws Error(InvalidPayload)
};

class MockEngine final : public InferenceEngine {
public:
    static constexpr std::uint64_t kSeed = 0x6d656d6b65726e6cULL;

    std::string tag() const override { return "mock-rolling-v1"; }
    EngineState encode(std::span<const std::string> tokens) const override;
    EngineState extend(EngineState state, std::span<const std::string> tokens) const override;
    std::vector<std::string> generate(const EngineState& state, std::size_t max_tokens) const override;
    std::vector<std::uint8_t> serialize(const EngineState& state) const override;
    EngineState deserialize(std::span<const std::uint8_t> bytes) const override;
};

const MockEngine& mock_engine();

struct DualPathResult {
    std::vector<std::string> prompt_output;
    std::vector<std::string> kv_output;
    std::size_t memory_tokens = 0;
    std::size_t query_tokens = 0;
    bool equal() const { return prompt_output == kv_output; }
};

inline constexpr std::size_t kDefaultGenerateTokens = 16;

// Prompt path: encode(memory || query). KV path: extend(deserialize(serialize(
// encode(memory))), query). Both then generate.
DualPathResult run_dual_path(std::string_view memory_text, std::string_view query_text,
                             const InferenceEngine& engine = mock_engine(),
                             std::size_t max_tokens = kDefaultGenerateTokens);

}  // namespace memkernel
