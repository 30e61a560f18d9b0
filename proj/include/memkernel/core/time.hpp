// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace memkernel {

inline constexpr std::int64_t kMicrosPerSecond = 1'000'000;

// UTC instant with microsecond precision.
struct Timestamp {
    std::int64_t micros = 0;

    static constexpr Timestamp from_seconds(std::int64_t s) { return Timestamp{s * kMicrosPerSecond}; }
    constexpr Timestamp plus_seconds(std::int64_t s) const { return Timestamp{micros + s * kMicrosPerSecond}; }
    constexpr double seconds_since(Timestamp earlier) const
    {
        return static_cast<double>(micros - earlier.micros) / static_cast<double>(kMicrosPerSecond);
    }

    constexpr auto operator<=>(const Timestamp&) const = default;
};

struct CivilDate {
    std::int64_t year = 1970;
    unsigned month = 1;  // 1..12
    unsigned day = 1;    // 1..31
    constexpr auto operator<=>(const CivilDate&) const = default;
};

std::int64_t days_from_civil(CivilDate date) noexcept;
CivilDate civil_from_days(std::int64_t days) noexcept;

Timestamp start_of_day(CivilDate date) noexcept;
CivilDate date_of(Timestamp t) noexcept;

// "2025-01-01T00:00:00.000000Z"
std::string format_iso8601(Timestamp t);

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS[.ffffff]Z" (the "Z" is optional).
// Throws Error(BadArgs) on malformed input.
Timestamp parse_iso8601(std::string_view text);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() const override;
};

// Test and replay clock; time only moves when told to.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp start = {}) : now_(start.micros) {}

    Timestamp now() const override { return Timestamp{now_.load()}; }
    void set(Timestamp t) { now_.store(t.micros); }
    void advance_seconds(std::int64_t s) { now_.fetch_add(s * kMicrosPerSecond); }

private:
    std::atomic<std::int64_t> now_;
};

}  // namespace memkernel
