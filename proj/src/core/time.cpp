// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/time.hpp"

#include "memkernel/core/errors.hpp"

#include <chrono>
#include <cstdio>

namespace memkernel {

// Howard Hinnant's proleptic Gregorian day algorithms.
std::int64_t days_from_civil(CivilDate date) noexcept
{
    std::int64_t y = date.year;
    const unsigned m = date.month;
    const unsigned d = date.day;
    y -= m <= 2 ? 1 : 0;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) noexcept
{
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return CivilDate{y + (m <= 2 ? 1 : 0), m, d};
}

Timestamp start_of_day(CivilDate date) noexcept
{
    return Timestamp::from_seconds(days_from_civil(date) * 86400);
}

CivilDate date_of(Timestamp t) noexcept
{
    std::int64_t secs = t.micros / kMicrosPerSecond;
    if (t.micros % kMicrosPerSecond < 0) {
        --secs;
    }
    std::int64_t days = secs / 86400;
    if (secs % 86400 < 0) {
        --days;
    }
    return civil_from_days(days);
}

std::string format_iso8601(Timestamp t)
{
    std::int64_t micros = t.micros;
    std::int64_t secs = micros / kMicrosPerSecond;
    std::int64_t frac = micros % kMicrosPerSecond;
    if (frac < 0) {
        frac += kMicrosPerSecond;
        --secs;
    }
    std::int64_t days = secs / 86400;
    std::int64_t sod = secs % 86400;
    if (sod < 0) {
        sod += 86400;
        --days;
    }
    const CivilDate date = civil_from_days(days);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%06lldZ",
                  static_cast<long long>(date.year), date.month, date.day,
                  static_cast<long long>(sod / 3600), static_cast<long long>((sod / 60) % 60),
                  static_cast<long long>(sod % 60), static_cast<long long>(frac));
    return buf;
}

namespace {

bool read_digits(std::string_view text, std::size_t& pos, std::size_t count, std::int64_t& out)
{
    if (pos + count > text.size()) {
        return false;
    }
    std::int64_t value = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const char c = text[pos + i];
        if (c < '0' || c > '9') {
            return false;
        }
        value = value * 10 + (c - '0');
    }
    pos += count;
    out = value;
    return true;
}

bool expect(std::string_view text, std::size_t& pos, char c)
{
    if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
    }
    return false;
}

unsigned days_in_month(std::int64_t year, unsigned month)
{
    static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return month == 2 && leap ? 29 : kDays[month - 1];
}

}  // namespace

Timestamp parse_iso8601(std::string_view text)
{
    const auto fail = [&] { return Error(ErrorCode::BadArgs, "malformed timestamp '" + std::string(text) + "'"); };
    std::size_t pos = 0;
    std::int64_t year = 0, month = 0, day = 0;
    if (!read_digits(text, pos, 4, year) || !expect(text, pos, '-') || !read_digits(text, pos, 2, month) ||
        !expect(text, pos, '-') || !read_digits(text, pos, 2, day)) {
        throw fail();
    }
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, static_cast<unsigned>(month))) {
        throw fail();
    }
    std::int64_t micros = days_from_civil({year, static_cast<unsigned>(month), static_cast<unsigned>(day)}) *
                          86400 * kMicrosPerSecond;
    if (pos == text.size()) {
        return Timestamp{micros};
    }
    std::int64_t hh = 0, mm = 0, ss = 0;
    if (!(expect(text, pos, 'T') || expect(text, pos, ' ')) || !read_digits(text, pos, 2, hh) ||
        !expect(text, pos, ':') || !read_digits(text, pos, 2, mm) || !expect(text, pos, ':') ||
        !read_digits(text, pos, 2, ss)) {
        throw fail();
    }
    if (hh > 23 || mm > 59 || ss > 59) {
        throw fail();
    }
    std::int64_t frac = 0;
    if (expect(text, pos, '.')) {
        std::size_t digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            if (digits < 6) {
                frac = frac * 10 + (text[pos] - '0');
            }
            ++digits;
            ++pos;
        }
        if (digits == 0) {
            throw fail();
        }
        for (std::size_t i = digits; i < 6; ++i) {
            frac *= 10;
        }
    }
    expect(text, pos, 'Z');
    if (pos != text.size()) {
        throw fail();
    }
    micros += ((hh * 60 + mm) * 60 + ss) * kMicrosPerSecond + frac;
    return Timestamp{micros};
}

Timestamp SystemClock::now() const
{
    const auto d = std::chrono::system_clock::now().time_since_epoch();
    return Timestamp{std::chrono::duration_cast<std::chrono::microseconds>(d).count()};
}

}  // namespace memkernel
