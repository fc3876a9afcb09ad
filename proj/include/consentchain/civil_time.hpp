#pragma once

// consentchain/civil_time.hpp — civil dates and date-times on a logical clock.
//
// All module clocks are logical: ledger timestamps are milliseconds derived
// from civil date-times supplied by the caller (scenario files, CLI flags).
// Nothing in the library reads the wall clock.

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>

#include "consentchain/errors.hpp"

namespace consentchain {

// Milliseconds since the civil epoch 1970-01-01T00:00.
using LogicalTime = std::int64_t;

enum class Weekday : std::uint8_t { Mon = 0, Tue, Wed, Thu, Fri, Sat, Sun };

inline const char* weekday_name(Weekday d) {
    static const char* names[] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
    return names[static_cast<int>(d)];
}

inline Weekday weekday_from_name(const std::string& s) {
    for (int i = 0; i < 7; ++i) {
        if (s == weekday_name(static_cast<Weekday>(i))) return static_cast<Weekday>(i);
    }
    throw Error(Errc::ParseError, "unknown weekday '" + s + "'");
}

struct CivilDate {
    int year = 1970;
    unsigned month = 1; // 1..12
    unsigned day = 1;   // 1..31

    auto operator<=>(const CivilDate&) const = default;

    std::chrono::year_month_day ymd() const {
        return std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day};
    }

    bool valid() const { return ymd().ok(); }

    Weekday weekday() const {
        std::chrono::weekday wd{std::chrono::sys_days{ymd()}};
        return static_cast<Weekday>(wd.iso_encoding() - 1);
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
        return buf;
    }

    // "YYYY-MM-DD"
    static CivilDate parse(const std::string& s) {
        CivilDate d;
        if (std::sscanf(s.c_str(), "%d-%u-%u", &d.year, &d.month, &d.day) != 3 || !d.valid()) {
            throw Error(Errc::ParseError, "bad civil date '" + s + "'");
        }
        return d;
    }
};

struct CivilDateTime {
    CivilDate date;
    unsigned hour = 0;   // 0..23
    unsigned minute = 0; // 0..59

    auto operator<=>(const CivilDateTime&) const = default;

    unsigned minute_of_day() const { return hour * 60 + minute; }
    Weekday weekday() const { return date.weekday(); }

    LogicalTime epoch_ms() const {
        auto days = std::chrono::sys_days{date.ymd()}.time_since_epoch();
        std::int64_t ms = std::chrono::duration_cast<std::chrono::milliseconds>(days).count();
        return ms + static_cast<std::int64_t>(minute_of_day()) * 60'000;
    }

    std::string str() const {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%sT%02u:%02u", date.str().c_str(), hour, minute);
        return buf;
    }

    static CivilDateTime from_epoch_ms(LogicalTime ms) {
        std::int64_t day_ms = 86'400'000;
        std::int64_t days = ms / day_ms;
        if (ms < 0 && ms % day_ms != 0) --days;
        std::int64_t rem = ms - days * day_ms;
        auto ymd = std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
        CivilDateTime t;
        t.date = {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day())};
        t.hour = static_cast<unsigned>(rem / 3'600'000);
        t.minute = static_cast<unsigned>((rem % 3'600'000) / 60'000);
        return t;
    }

    // "YYYY-MM-DDTHH:MM"
    static CivilDateTime parse(const std::string& s) {
        CivilDateTime t;
        char sep = 0;
        if (std::sscanf(s.c_str(), "%d-%u-%u%c%u:%u", &t.date.year, &t.date.month, &t.date.day,
                        &sep, &t.hour, &t.minute) != 6 ||
            (sep != 'T' && sep != ' ') || !t.date.valid() || t.hour > 23 || t.minute > 59) {
            throw Error(Errc::ParseError, "bad civil date-time '" + s + "'");
        }
        return t;
    }
};

} // namespace consentchain
