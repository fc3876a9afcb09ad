// Authorization module: consent matching, condition evaluation with
// ledger-derived use counts, decision logging and replay.

#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "consentchain/authorize.hpp"

using namespace consentchain;

namespace {

struct Rig {
    std::unique_ptr<ConsentEngine> engine;
    std::unique_ptr<AuthorizationModule> authz;
};

Rig make_rig(std::set<RoleCode> required = {}) {
    ConsentEngine::Options opts;
    opts.required_roles = std::move(required);
    Rig rig;
    rig.engine = std::make_unique<ConsentEngine>(PhiCatalog::load("data/phi_catalog.json"),
                                                 PermissionMatrix::load("data/permission_matrix.json"),
                                                 std::move(opts));
    rig.authz = std::make_unique<AuthorizationModule>(*rig.engine);
    return rig;
}

InformedConsent grant(RoleCode role, std::string user, std::string phi, OperationKind op) {
    InformedConsent ic;
    ic.users = {UserRef{role, std::move(user)}};
    ic.objects = {std::move(phi)};
    ic.operations = {op};
    return ic;
}

LogicalTime at(const std::string& s) { return CivilDateTime::parse(s).epoch_ms(); }

AccessRequest request(const std::string& rid, RoleCode role, const std::string& user,
                      const std::string& phi, OperationKind op, const std::string& when) {
    AccessRequest req;
    req.request_id = rid;
    req.subject = {role, user};
    req.patient_id = "jordan";
    req.phi_id = phi;
    req.operation = op;
    req.context.timestamp = CivilDateTime::parse(when);
    return req;
}

bool has_reason(const AccessDecision& d, ReasonCode code) {
    for (const auto& r : d.reasons) {
        if (r.code == code) return true;
    }
    return false;
}

} // namespace

TEST_CASE("unconditioned cover grants; uncovered subject denies NoConsent", "[authorize]") {
    Rig rig = make_rig();
    rig.engine->create_consent("jordan", grant(RoleCode::NRS, "nina", "PHI1005", OperationKind::Read),
                               at("2025-06-01T08:00"));

    auto granted = rig.authz->authorize(
        request("r1", RoleCode::NRS, "nina", "PHI1005", OperationKind::Read, "2025-06-02T09:00"));
    CHECK(granted.granted());
    CHECK(granted.matched_consent.has_value());
    CHECK(granted.reasons.empty());

    auto denied = rig.authz->authorize(
        request("r2", RoleCode::PHR, "phil", "PHI1005", OperationKind::Read, "2025-06-02T09:05"));
    CHECK_FALSE(denied.granted());
    CHECK(has_reason(denied, ReasonCode::NoConsent));
    CHECK_FALSE(denied.matched_consent.has_value());
}

TEST_CASE("matching is exact on the (role, user) pair", "[authorize]") {
    Rig rig = make_rig();
    rig.engine->create_consent("jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read),
                               at("2025-06-01T08:00"));
    // same user id under a different role is a different subject
    auto d = rig.authz->authorize(
        request("r1", RoleCode::NRS, "david", "PHI1005", OperationKind::Read, "2025-06-02T09:00"));
    CHECK_FALSE(d.granted());
}

TEST_CASE("after-hours request denies with the violated window and is still logged", "[authorize]") {
    Rig rig = make_rig();
    InformedConsent ic = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    ic.conditions = {TimeWindow{480, 1020}}; // 8 AM .. 5 PM
    rig.engine->create_consent("jordan", ic, at("2025-06-01T08:00"));

    auto d = rig.authz->authorize(
        request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read, "2025-06-02T18:00"));
    CHECK_FALSE(d.granted());
    REQUIRE(has_reason(d, ReasonCode::ConditionViolated));
    CHECK(d.reasons[0].detail == "TimeWindow[480,1020)");

    // the denied attempt lands in the audit trail once sealed
    rig.engine->seal(at("2025-06-02T18:01"));
    EventFilter f;
    f.kind = EventKind::AccessDenied;
    CHECK(rig.engine->chain().count_events(f) == 1);
}

TEST_CASE("all conditions must hold together", "[authorize]") {
    Rig rig = make_rig();
    InformedConsent ic = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    ic.conditions = {TimeWindow{480, 1020}, GeoFence{{"ER"}}};
    rig.engine->create_consent("jordan", ic, at("2025-06-01T08:00"));

    AccessRequest ok = request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read,
                               "2025-06-02T09:00");
    ok.context.zone = "ER";
    CHECK(rig.authz->authorize(ok).granted());

    AccessRequest wrong_zone = ok;
    wrong_zone.request_id = "r2";
    wrong_zone.context.zone = "WARD-3";
    auto d = rig.authz->authorize(wrong_zone);
    CHECK_FALSE(d.granted());
    CHECK(has_reason(d, ReasonCode::ConditionViolated));
}

TEST_CASE("five uses grant, the sixth denies exhausted, the sweep archives", "[authorize][frequency]") {
    Rig rig = make_rig();
    InformedConsent ic = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    ic.conditions = {AccessFrequency{5}};
    std::string id = rig.engine->create_consent("jordan", ic, at("2025-06-01T08:00"));

    for (int i = 1; i <= 5; ++i) {
        auto d = rig.authz->authorize(request("r" + std::to_string(i), RoleCode::DOC, "david", "PHI1005",
                                              OperationKind::Read,
                                              "2025-06-02T0" + std::to_string(i) + ":00"));
        INFO("request " << i);
        CHECK(d.granted());
    }
    auto sixth = rig.authz->authorize(
        request("r6", RoleCode::DOC, "david", "PHI1005", OperationKind::Read, "2025-06-02T09:00"));
    CHECK_FALSE(sixth.granted());
    CHECK(has_reason(sixth, ReasonCode::FrequencyExhausted));

    rig.engine->expire_sweep(CivilDateTime::parse("2025-06-02T10:00"));
    REQUIRE(rig.engine->container("jordan").has_archived(id));
    const ArchiveEntry& entry = rig.engine->container("jordan").archive.at(id);
    CHECK(entry.reason.cause == ArchiveCause::Expired);

    // a later identical request still reports the frequency story
    auto seventh = rig.authz->authorize(
        request("r7", RoleCode::DOC, "david", "PHI1005", OperationKind::Read, "2025-06-02T11:00"));
    CHECK_FALSE(seventh.granted());
    CHECK(has_reason(seventh, ReasonCode::FrequencyExhausted));
}

TEST_CASE("use_count sees sealed grants only", "[authorize][frequency]") {
    Rig rig = make_rig();
    std::string id = rig.engine->create_consent(
        "jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read), at("2025-06-01T08:00"));
    CHECK(rig.authz->use_count(id) == 0);

    auto d = rig.authz->authorize(
        request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read, "2025-06-02T09:00"));
    CHECK(d.granted());
    // submitted but not sealed
    CHECK(rig.authz->use_count(id) == 0);
    rig.engine->seal(at("2025-06-02T09:01"));
    CHECK(rig.authz->use_count(id) == 1);

    for (int i = 2; i <= 3; ++i) {
        rig.authz->authorize(request("r" + std::to_string(i), RoleCode::DOC, "david", "PHI1005",
                                     OperationKind::Read, "2025-06-02T09:0" + std::to_string(i)));
    }
    rig.engine->seal(at("2025-06-02T09:10"));
    CHECK(rig.authz->use_count(id) == 3);
    CHECK(rig.engine->grant_count(id) == 3);
}

TEST_CASE("a grant consumes a use on the matched consent only", "[authorize][frequency]") {
    Rig rig = make_rig();
    // two consents cover the same triple via different consents' conditions
    InformedConsent first = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    first.conditions = {AccessFrequency{2}};
    std::string id1 = rig.engine->create_consent("jordan", first, at("2025-06-01T08:00"));
    InformedConsent second = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Write);
    std::string id2 = rig.engine->create_consent("jordan", second, at("2025-06-01T08:01"));

    rig.authz->authorize(request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read,
                                 "2025-06-02T09:00"));
    rig.engine->seal(at("2025-06-02T09:01"));
    CHECK(rig.authz->use_count(id1) == 1);
    CHECK(rig.authz->use_count(id2) == 0);
}

TEST_CASE("terminated consents never match afterwards", "[authorize]") {
    Rig rig = make_rig();
    std::string id = rig.engine->create_consent(
        "jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read), at("2025-06-01T08:00"));
    CHECK(rig.authz
              ->authorize(request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read,
                                  "2025-06-02T09:00"))
              .granted());
    rig.engine->terminate_consent(id, at("2025-06-02T10:00"));

    auto d = rig.authz->authorize(
        request("r2", RoleCode::DOC, "david", "PHI1005", OperationKind::Read, "2025-06-02T11:00"));
    CHECK_FALSE(d.granted());
    CHECK((has_reason(d, ReasonCode::ConsentArchived) || has_reason(d, ReasonCode::NoConsent)));
}

TEST_CASE("matching is deterministic: the covering consent wins every replay", "[authorize]") {
    // The duplicate-grant rule keeps request triples covered by at most one
    // active consent, so the ascending-id scan always lands on the same one.
    Rig rig = make_rig();
    InformedConsent a = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    a.conditions = {GeoFence{{"ER"}}};
    std::string id1 = rig.engine->create_consent("jordan", a, at("2025-06-01T08:00"));
    InformedConsent b = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Update);
    std::string id2 = rig.engine->create_consent("jordan", b, at("2025-06-01T08:01"));
    CHECK(id1 < id2);

    for (int i = 0; i < 3; ++i) {
        AccessRequest req = request("r" + std::to_string(i), RoleCode::DOC, "david", "PHI1005",
                                    OperationKind::Read, "2025-06-02T09:0" + std::to_string(i));
        req.context.zone = "ER";
        auto d = rig.authz->authorize(req);
        REQUIRE(d.granted());
        CHECK(*d.matched_consent == id1);
    }
}

TEST_CASE("decisions replay exactly from the sealed event stream", "[authorize][replay]") {
    Rig rig = make_rig();
    InformedConsent ic = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    ic.conditions = {TimeWindow{480, 1020}};
    rig.engine->create_consent("jordan", ic, at("2025-06-01T08:00"));

    CHECK(rig.authz->replay_decisions("jordan").empty());

    std::vector<DecisionSummary> live;
    const char* times[] = {"2025-06-02T09:00", "2025-06-02T10:00", "2025-06-02T18:30",
                           "2025-06-03T09:00", "2025-06-03T19:00", "2025-06-04T08:30",
                           "2025-06-04T12:00"};
    for (int i = 0; i < 7; ++i) {
        live.push_back(summarize(rig.authz->authorize(request(
            "r" + std::to_string(i), RoleCode::DOC, "david", "PHI1005", OperationKind::Read, times[i]))));
    }
    rig.engine->seal(at("2025-06-04T13:00"));

    auto replayed = rig.authz->replay_decisions("jordan");
    REQUIRE(replayed.size() == 7);
    CHECK(replayed == live);
    CHECK(rig.authz->replay_decisions("jordan") == replayed);

    // line-oriented export diffs clean against the live log
    std::string live_lines, replay_lines;
    for (const auto& s : live) live_lines += s.line() + "\n";
    for (const auto& s : replayed) replay_lines += s.line() + "\n";
    CHECK(live_lines == replay_lines);
    CHECK(live_lines.find("Grant consent=") != std::string::npos);
    CHECK(live_lines.find("ConditionViolated(TimeWindow[480,1020))") != std::string::npos);

    // 5 grants + 2 denies, all logged
    EventFilter grants, denies;
    grants.kind = EventKind::AccessGranted;
    denies.kind = EventKind::AccessDenied;
    CHECK(rig.engine->chain().count_events(grants) == 5);
    CHECK(rig.engine->chain().count_events(denies) == 2);
}

TEST_CASE("every decision is logged: grants plus denies equals calls", "[authorize][logging]") {
    Rig rig = make_rig();
    rig.engine->create_consent("jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read),
                               at("2025-06-01T08:00"));
    const int calls = 9;
    for (int i = 0; i < calls; ++i) {
        const RoleCode role = i % 3 == 0 ? RoleCode::DOC : RoleCode::PHR;
        const std::string user = role == RoleCode::DOC ? "david" : "phil";
        rig.authz->authorize(request("r" + std::to_string(i), role, user, "PHI1005", OperationKind::Read,
                                     "2025-06-02T09:0" + std::to_string(i)));
    }
    rig.engine->seal(at("2025-06-02T10:00"));
    EventFilter grants, denies;
    grants.kind = EventKind::AccessGranted;
    denies.kind = EventKind::AccessDenied;
    CHECK(rig.engine->chain().count_events(grants) + rig.engine->chain().count_events(denies) == calls);
}

TEST_CASE("unknown patient and unknown phi are caller errors", "[authorize]") {
    Rig rig = make_rig();
    rig.engine->create_consent("jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read),
                               at("2025-06-01T08:00"));
    AccessRequest req = request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read,
                                "2025-06-02T09:00");
    req.patient_id = "nobody";
    CHECK_THROWS_AS(rig.authz->authorize(req), Error);

    AccessRequest bad_phi = request("r2", RoleCode::DOC, "david", "PHI4242", OperationKind::Read,
                                    "2025-06-02T09:00");
    CHECK_THROWS_AS(rig.authz->authorize(bad_phi), Error);
}

TEST_CASE("use counts and decision history survive a chain restore", "[authorize][rebuild]") {
    Rig rig = make_rig();
    InformedConsent ic = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    ic.conditions = {AccessFrequency{5}};
    std::string id = rig.engine->create_consent("jordan", ic, at("2025-06-01T08:00"));
    for (int i = 0; i < 3; ++i) {
        rig.authz->authorize(request("r" + std::to_string(i), RoleCode::DOC, "david", "PHI1005",
                                     OperationKind::Read, "2025-06-02T09:0" + std::to_string(i)));
    }
    rig.engine->seal(at("2025-06-02T10:00"));
    const std::string dump = rig.engine->chain().dump();
    auto live = rig.authz->replay_decisions("jordan");

    Rig restored = make_rig();
    restored.engine->adopt_chain(Chain::restore(rig.engine->chain().config(), dump));
    CHECK(restored.authz->use_count(id) == 3);
    CHECK(restored.engine->grant_count(id) == 3);
    CHECK(restored.authz->replay_decisions("jordan") == live);

    // the restored engine keeps authorizing with correct counts
    for (int i = 3; i < 6; ++i) {
        auto d = restored.authz->authorize(request("r" + std::to_string(i), RoleCode::DOC, "david",
                                                   "PHI1005", OperationKind::Read,
                                                   "2025-06-02T11:0" + std::to_string(i)));
        CHECK(d.granted() == (i < 5));
    }
}

TEST_CASE("a zoneless request against a geofenced consent is a context error", "[authorize]") {
    Rig rig = make_rig();
    InformedConsent ic = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    ic.conditions = {GeoFence{{"ER"}}};
    rig.engine->create_consent("jordan", ic, at("2025-06-01T08:00"));
    AccessRequest req = request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read,
                                "2025-06-02T09:00");
    REQUIRE_FALSE(req.context.zone.has_value());
    try {
        rig.authz->authorize(req);
        FAIL("expected MissingContextField");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingContextField);
    }
}

TEST_CASE("a refusing policy hook denies before consent lookup", "[authorize][policy]") {
    Rig rig = make_rig();
    rig.engine->create_consent("jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read),
                               at("2025-06-01T08:00"));
    rig.authz->set_policy_hook([](const AccessRequest&) { return false; });
    auto d = rig.authz->authorize(
        request("r1", RoleCode::DOC, "david", "PHI1005", OperationKind::Read, "2025-06-02T09:00"));
    CHECK_FALSE(d.granted());
    CHECK(has_reason(d, ReasonCode::MatrixViolation));
}
