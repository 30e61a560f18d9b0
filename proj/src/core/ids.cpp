// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/ids.hpp"

namespace memkernel {

namespace {
constexpr char kCrockford[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
}

IdGenerator::IdGenerator(std::uint64_t seed) : rng_(seed) {}

IdGenerator::IdGenerator() : rng_(std::random_device{}()) {}

std::string IdGenerator::next(Timestamp now)
{
    std::lock_guard lock(mu_);
    auto ms = static_cast<std::uint64_t>(now.micros < 0 ? 0 : now.micros / 1000) & ((1ULL << 48) - 1);
    if (ms <= last_ms_ && last_ms_ != 0) {
        ms = last_ms_;
        // Monotonic increment of the 80-bit random part.
        if (++lo_ == 0) {
            hi_ = (hi_ + 1) & 0xFFFF;
        }
    } else {
        last_ms_ = ms;
        hi_ = rng_() & 0xFFFF;
        lo_ = rng_();
    }

    std::string out(kIdLength, '0');
    // 48 time bits -> 10 chars, 80 random bits -> 16 chars (130 bits total, top 2 zero).
    std::uint64_t t = ms;
    for (int i = 9; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kCrockford[t & 31];
        t >>= 5;
    }
    std::uint64_t lo = lo_;
    std::uint64_t hi = hi_;
    for (int i = 25; i >= 10; --i) {
        out[static_cast<std::size_t>(i)] = kCrockford[lo & 31];
        lo = (lo >> 5) | ((hi & 31) << 59);
        hi >>= 5;
    }
    return out;
}

}  // namespace memkernel
