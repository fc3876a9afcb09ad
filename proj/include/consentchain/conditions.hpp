#pragma once

// consentchain/conditions.hpp — the six consent condition kinds and their
// evaluation against a request context.
//
// Semantics pinned here:
//   TimeWindow      half-open [start, end) on minutes of the day
//   CalendarExpiry  inclusive of the expiry date itself
//   DayOfWeek       request weekday must be in the allowed set
//   GeoFence        request zone must be in the allowed set
//   IpAllowlist     some allowed prefix is a string prefix of the source address
//   AccessFrequency satisfied while prior_use_count < max_uses, Exhausted after
//
// CalendarExpiry and AccessFrequency are terminal: once violated/exhausted the
// consent can never become satisfiable again and is eligible for expiry sweep.
// The other four depend on the per-request context and only deny the request.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include "consentchain/civil_time.hpp"
#include "consentchain/encode.hpp"
#include "consentchain/errors.hpp"

namespace consentchain {

struct TimeWindow {
    std::uint16_t start_minute = 0; // inclusive, 0..1439
    std::uint16_t end_minute = 1440; // exclusive, 1..1440
    auto operator<=>(const TimeWindow&) const = default;
};

struct CalendarExpiry {
    CivilDate expiry_date; // last day on which access is allowed
    auto operator<=>(const CalendarExpiry&) const = default;
};

struct DayOfWeek {
    std::set<Weekday> allowed_days;
    auto operator<=>(const DayOfWeek&) const = default;
};

struct GeoFence {
    std::set<std::string> allowed_zones;
    auto operator<=>(const GeoFence&) const = default;
};

struct IpAllowlist {
    std::set<std::string> allowed_prefixes;
    auto operator<=>(const IpAllowlist&) const = default;
};

struct AccessFrequency {
    std::uint32_t max_uses = 1;
    auto operator<=>(const AccessFrequency&) const = default;
};

using Condition = std::variant<TimeWindow, CalendarExpiry, DayOfWeek, GeoFence, IpAllowlist, AccessFrequency>;

inline const char* condition_kind_name(const Condition& c) {
    static const char* names[] = {"TimeWindow", "CalendarExpiry", "DayOfWeek",
                                  "GeoFence",   "IpAllowlist",    "AccessFrequency"};
    return names[c.index()];
}

// Structural well-formedness. Findings are reported through validate_consent.
inline bool condition_well_formed(const Condition& c) {
    return std::visit(
        [](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TimeWindow>) {
                return v.start_minute < v.end_minute && v.end_minute <= 1440;
            } else if constexpr (std::is_same_v<T, CalendarExpiry>) {
                return v.expiry_date.valid();
            } else if constexpr (std::is_same_v<T, DayOfWeek>) {
                return !v.allowed_days.empty();
            } else if constexpr (std::is_same_v<T, GeoFence>) {
                return !v.allowed_zones.empty();
            } else if constexpr (std::is_same_v<T, IpAllowlist>) {
                return !v.allowed_prefixes.empty();
            } else {
                return v.max_uses >= 1;
            }
        },
        c);
}

// Canonical encoding: variant tag byte, then operands. Sets encode sorted.
inline void encode_condition(Encoder& e, const Condition& c) {
    e.u8(static_cast<std::uint8_t>(c.index()));
    std::visit(
        [&e](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TimeWindow>) {
                e.u16(v.start_minute).u16(v.end_minute);
            } else if constexpr (std::is_same_v<T, CalendarExpiry>) {
                e.u16(static_cast<std::uint16_t>(v.expiry_date.year));
                e.u8(static_cast<std::uint8_t>(v.expiry_date.month));
                e.u8(static_cast<std::uint8_t>(v.expiry_date.day));
            } else if constexpr (std::is_same_v<T, DayOfWeek>) {
                e.count(v.allowed_days.size());
                for (Weekday d : v.allowed_days) e.u8(static_cast<std::uint8_t>(d));
            } else if constexpr (std::is_same_v<T, GeoFence>) {
                e.count(v.allowed_zones.size());
                for (const auto& z : v.allowed_zones) e.str(z);
            } else if constexpr (std::is_same_v<T, IpAllowlist>) {
                e.count(v.allowed_prefixes.size());
                for (const auto& p : v.allowed_prefixes) e.str(p);
            } else {
                e.u32(v.max_uses);
            }
        },
        c);
}

// Short human/machine rendering, used in deny reasons and provenance nodes.
inline std::string condition_str(const Condition& c) {
    return std::visit(
        [&c](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            std::string out = condition_kind_name(c);
            if constexpr (std::is_same_v<T, TimeWindow>) {
                out += "[" + std::to_string(v.start_minute) + "," + std::to_string(v.end_minute) + ")";
            } else if constexpr (std::is_same_v<T, CalendarExpiry>) {
                out += "(" + v.expiry_date.str() + ")";
            } else if constexpr (std::is_same_v<T, DayOfWeek>) {
                out += "{";
                bool first = true;
                for (Weekday d : v.allowed_days) {
                    if (!first) out += ",";
                    out += weekday_name(d);
                    first = false;
                }
                out += "}";
            } else if constexpr (std::is_same_v<T, GeoFence>) {
                out += "{";
                bool first = true;
                for (const auto& z : v.allowed_zones) {
                    if (!first) out += ",";
                    out += z;
                    first = false;
                }
                out += "}";
            } else if constexpr (std::is_same_v<T, IpAllowlist>) {
                out += "{";
                bool first = true;
                for (const auto& p : v.allowed_prefixes) {
                    if (!first) out += ",";
                    out += p;
                    first = false;
                }
                out += "}";
            } else {
                out += "(" + std::to_string(v.max_uses) + ")";
            }
            return out;
        },
        c);
}

// The facts a condition is evaluated against. prior_use_count comes from the
// ledger's sealed AccessGranted events, never from the condition itself.
struct RequestContext {
    CivilDateTime timestamp;
    std::optional<std::string> zone;
    std::optional<std::string> source_address;
    std::uint32_t prior_use_count = 0;
};

enum class ConditionStatus : std::uint8_t { Satisfied, Violated, Exhausted };

struct ConditionOutcome {
    ConditionStatus status = ConditionStatus::Satisfied;
    std::string reason; // set when Violated/Exhausted

    bool satisfied() const { return status == ConditionStatus::Satisfied; }
};

inline ConditionOutcome evaluate_condition(const Condition& cond, const RequestContext& ctx) {
    return std::visit(
        [&](const auto& v) -> ConditionOutcome {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TimeWindow>) {
                unsigned m = ctx.timestamp.minute_of_day();
                if (m >= v.start_minute && m < v.end_minute) return {};
                return {ConditionStatus::Violated,
                        "minute " + std::to_string(m) + " outside [" + std::to_string(v.start_minute) +
                            "," + std::to_string(v.end_minute) + ")"};
            } else if constexpr (std::is_same_v<T, CalendarExpiry>) {
                if (ctx.timestamp.date <= v.expiry_date) return {};
                return {ConditionStatus::Violated,
                        "date " + ctx.timestamp.date.str() + " past expiry " + v.expiry_date.str()};
            } else if constexpr (std::is_same_v<T, DayOfWeek>) {
                Weekday wd = ctx.timestamp.weekday();
                if (v.allowed_days.count(wd)) return {};
                return {ConditionStatus::Violated, std::string(weekday_name(wd)) + " not an allowed day"};
            } else if constexpr (std::is_same_v<T, GeoFence>) {
                if (!ctx.zone) throw Error(Errc::MissingContextField, "GeoFence requires ctx.zone");
                if (v.allowed_zones.count(*ctx.zone)) return {};
                return {ConditionStatus::Violated, "zone '" + *ctx.zone + "' outside fence"};
            } else if constexpr (std::is_same_v<T, IpAllowlist>) {
                if (!ctx.source_address) {
                    throw Error(Errc::MissingContextField, "IpAllowlist requires ctx.source_address");
                }
                for (const auto& p : v.allowed_prefixes) {
                    if (ctx.source_address->rfind(p, 0) == 0) return {};
                }
                return {ConditionStatus::Violated, "address '" + *ctx.source_address + "' not allowlisted"};
            } else {
                if (ctx.prior_use_count < v.max_uses) return {};
                return {ConditionStatus::Exhausted,
                        std::to_string(ctx.prior_use_count) + " uses >= limit " + std::to_string(v.max_uses)};
            }
        },
        cond);
}

// True for the condition kinds whose violation can never heal (calendar and
// frequency). Only these cause sweep-expiry; the rest deny per request.
inline bool condition_is_terminal_kind(const Condition& c) {
    return std::holds_alternative<CalendarExpiry>(c) || std::holds_alternative<AccessFrequency>(c);
}

} // namespace consentchain
