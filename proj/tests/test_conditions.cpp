// Condition evaluation: boundary pairs for all six kinds, missing-context
// errors, and the frequency monotonicity property.

#include <catch2/catch_amalgamated.hpp>

#include "consentchain/conditions.hpp"

using namespace consentchain;

namespace {

RequestContext ctx_at(const std::string& when) {
    RequestContext ctx;
    ctx.timestamp = CivilDateTime::parse(when);
    return ctx;
}

} // namespace

TEST_CASE("time window is half-open over office hours", "[conditions]") {
    Condition office = TimeWindow{480, 1020}; // 8 AM .. 5 PM

    CHECK(evaluate_condition(office, ctx_at("2025-06-02T09:30")).satisfied());
    // 6 PM request against office hours is denied
    CHECK_FALSE(evaluate_condition(office, ctx_at("2025-06-02T18:00")).satisfied());
    // boundary: start minute allowed, end minute not
    CHECK(evaluate_condition(office, ctx_at("2025-06-02T08:00")).satisfied());
    CHECK_FALSE(evaluate_condition(office, ctx_at("2025-06-02T17:00")).satisfied());
    CHECK(evaluate_condition(office, ctx_at("2025-06-02T16:59")).satisfied());
    CHECK_FALSE(evaluate_condition(office, ctx_at("2025-06-02T07:59")).satisfied());
}

TEST_CASE("calendar expiry includes the expiry date and denies from the next day", "[conditions]") {
    Condition until_june30 = CalendarExpiry{CivilDate::parse("2025-06-30")};

    CHECK(evaluate_condition(until_june30, ctx_at("2025-06-30T23:59")).satisfied());
    auto july1 = evaluate_condition(until_june30, ctx_at("2025-07-01T00:00"));
    CHECK(july1.status == ConditionStatus::Violated);
    CHECK(evaluate_condition(until_june30, ctx_at("2025-01-15T12:00")).satisfied());
}

TEST_CASE("day-of-week gates on the request weekday", "[conditions]") {
    Condition weekdays = DayOfWeek{{Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri}};

    CHECK(ctx_at("2025-06-02T10:00").timestamp.weekday() == Weekday::Mon);
    CHECK(evaluate_condition(weekdays, ctx_at("2025-06-02T10:00")).satisfied());
    CHECK(ctx_at("2025-06-07T10:00").timestamp.weekday() == Weekday::Sat);
    CHECK_FALSE(evaluate_condition(weekdays, ctx_at("2025-06-07T10:00")).satisfied());
}

TEST_CASE("geofence requires zone membership", "[conditions]") {
    Condition er_only = GeoFence{{"ER"}};

    RequestContext in_er = ctx_at("2025-06-02T10:00");
    in_er.zone = "ER";
    CHECK(evaluate_condition(er_only, in_er).satisfied());

    RequestContext in_ward = ctx_at("2025-06-02T10:00");
    in_ward.zone = "WARD-3";
    CHECK_FALSE(evaluate_condition(er_only, in_ward).satisfied());

    RequestContext no_zone = ctx_at("2025-06-02T10:00");
    CHECK_THROWS_AS(evaluate_condition(er_only, no_zone), Error);
    try {
        evaluate_condition(er_only, no_zone);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingContextField);
    }
}

TEST_CASE("ip allowlist matches by prefix", "[conditions]") {
    Condition hospital_net = IpAllowlist{{"10.20.", "192.168.5."}};

    RequestContext inside = ctx_at("2025-06-02T10:00");
    inside.source_address = "10.20.3.44";
    CHECK(evaluate_condition(hospital_net, inside).satisfied());

    RequestContext outside = ctx_at("2025-06-02T10:00");
    outside.source_address = "172.16.0.9";
    CHECK_FALSE(evaluate_condition(hospital_net, outside).satisfied());

    RequestContext no_source = ctx_at("2025-06-02T10:00");
    CHECK_THROWS_AS(evaluate_condition(hospital_net, no_source), Error);
}

TEST_CASE("access frequency: five uses allowed, the sixth exhausts", "[conditions]") {
    Condition five = AccessFrequency{5};

    RequestContext ctx = ctx_at("2025-06-02T10:00");
    ctx.prior_use_count = 4;
    CHECK(evaluate_condition(five, ctx).satisfied());
    ctx.prior_use_count = 5;
    CHECK(evaluate_condition(five, ctx).status == ConditionStatus::Exhausted);
    ctx.prior_use_count = 0;
    CHECK(evaluate_condition(five, ctx).satisfied());
}

TEST_CASE("frequency exhaustion is monotone in the use count", "[conditions][property]") {
    for (std::uint32_t limit : {1u, 3u, 5u, 17u}) {
        Condition cond = AccessFrequency{limit};
        bool exhausted_seen = false;
        for (std::uint32_t n = 0; n < limit + 20; ++n) {
            RequestContext ctx = ctx_at("2025-06-02T10:00");
            ctx.prior_use_count = n;
            const bool exhausted = evaluate_condition(cond, ctx).status == ConditionStatus::Exhausted;
            if (exhausted_seen) {
                CHECK(exhausted); // once exhausted, exhausted forever
            }
            exhausted_seen = exhausted_seen || exhausted;
            CHECK(exhausted == (n >= limit));
        }
        CHECK(exhausted_seen);
    }
}

TEST_CASE("structural bounds on condition operands", "[conditions]") {
    CHECK(condition_well_formed(TimeWindow{0, 1440}));
    CHECK_FALSE(condition_well_formed(TimeWindow{600, 600}));
    CHECK_FALSE(condition_well_formed(TimeWindow{600, 1441}));
    CHECK_FALSE(condition_well_formed(DayOfWeek{}));
    CHECK_FALSE(condition_well_formed(GeoFence{}));
    CHECK_FALSE(condition_well_formed(IpAllowlist{}));
    CHECK_FALSE(condition_well_formed(AccessFrequency{0}));
    CHECK(condition_well_formed(AccessFrequency{1}));
}

TEST_CASE("only calendar and frequency are terminal kinds", "[conditions]") {
    CHECK(condition_is_terminal_kind(CalendarExpiry{CivilDate::parse("2025-06-30")}));
    CHECK(condition_is_terminal_kind(AccessFrequency{5}));
    CHECK_FALSE(condition_is_terminal_kind(TimeWindow{480, 1020}));
    CHECK_FALSE(condition_is_terminal_kind(DayOfWeek{{Weekday::Mon}}));
    CHECK_FALSE(condition_is_terminal_kind(GeoFence{{"ER"}}));
    CHECK_FALSE(condition_is_terminal_kind(IpAllowlist{{"10."}}));
}
