// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "memkernel/core/time.hpp"

#include <cstdint>
#include <mutex>
#include <random>
#include <string>

namespace memkernel {

// Time-ordered 26-character identifiers (ULID layout: 48-bit millisecond
// timestamp + 80 random bits, Crockford base32). Lexicographic order follows
// creation order; ids minted within the same millisecond are strictly
// increasing.
class IdGenerator {
public:
    explicit IdGenerator(std::uint64_t seed);
    IdGenerator();  // seeded from std::random_device

    std::string next(Timestamp now);

private:
    std::mutex mu_;
    std::mt19937_64 rng_;
    std::uint64_t last_ms_ = 0;
    std::uint64_t hi_ = 0;  // top 16 random bits
    std::uint64_t lo_ = 0;  // low 64 random bits
};

inline constexpr std::size_t kIdLength = 26;

}  // namespace memkernel
