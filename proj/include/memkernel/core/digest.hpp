// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memkernel {

inline constexpr std::string_view kDigestAlgorithm = "sha256";

struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    std::string hex() const;
    static Digest from_hex(std::string_view hex);  // throws Error(BadArgs)

    constexpr auto operator<=>(const Digest&) const = default;
};

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

// Incremental hashing over several pieces.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::string_view data);
    Sha256& update(std::span<const std::uint8_t> data);
    Digest finish();

private:
    void* ctx_;
};

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // throws Error(BadArgs)

}  // namespace memkernel
