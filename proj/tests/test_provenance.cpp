// Provenance graph: ingestion from events, the four query orientations,
// exports, and ledger-graph consistency.

#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "consentchain/authorize.hpp"
#include "consentchain/provenance.hpp"

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

LogicalTime at(const std::string& s) { return CivilDateTime::parse(s).epoch_ms(); }

InformedConsent grant(RoleCode role, std::string user, std::string phi, OperationKind op) {
    InformedConsent ic;
    ic.users = {UserRef{role, std::move(user)}};
    ic.objects = {std::move(phi)};
    ic.operations = {op};
    return ic;
}

ProvenanceGraph graph_of(const ConsentEngine& engine) {
    ProvenanceGraph g;
    g.ingest(engine.chain().events());
    return g;
}

} // namespace

TEST_CASE("empty stream builds an empty graph and a header-only dot document", "[provenance]") {
    ProvenanceGraph g;
    CHECK(g.node_count() == 0);
    CHECK(g.edge_count() == 0);
    const std::string dot = g.export_dot();
    CHECK(dot == "digraph consent_provenance {\n  rankdir=LR;\n}\n");
}

TEST_CASE("the five-resource fixture answers user-oriented queries", "[provenance][jordan]") {
    // Jordan grants doctor David five resources; this hospital's catalog
    // labels them Visit Notes, Prescription, Radiology Lab Report,
    // Pathology Lab Report and Immunization History.
    PhiCatalog catalog = PhiCatalog::load("data/jordan/catalog.json");
    ConsentEngine::Options opts;
    opts.required_roles = {RoleCode::DOC};
    ConsentEngine engine(catalog, PermissionMatrix::load("data/permission_matrix.json"), opts);

    Ppa ppa;
    ppa.ppa_id = "PPA-JORDAN";
    ppa.patient_id = "jordan";
    ppa.pc = {"name: Jordan Mills"};
    ppa.prc = {"attending: Dr. David"};
    ppa.roc = {"hipaa-v2"};
    for (const char* phi : {"PHI1005", "PHI1006", "PHI1008", "PHI1007", "PHI1003"}) {
        InformedConsent ic = grant(RoleCode::DOC, "david", phi, OperationKind::Read);
        ic.conditions = {TimeWindow{480, 1020}, AccessFrequency{5}};
        ppa.icc.push_back(std::move(ic));
    }
    ppa.validity_end = CivilDate::parse("2026-06-30");
    engine.create_ppa(ppa, at("2025-06-01T08:00"));
    engine.deploy_consents("PPA-JORDAN", at("2025-06-01T08:05"));

    ProvenanceGraph g = graph_of(engine);
    auto rows = g.query({Orientation::UserOriented, "david", QueryMode::Given});
    REQUIRE(rows.size() == 5);
    std::set<std::string> resources;
    for (const auto& row : rows) {
        REQUIRE(row.counterparts.size() == 1);
        resources.insert(row.counterparts[0]);
        CHECK(row.operations == std::vector<std::string>{"Read"});
        CHECK(row.conditions.size() == 2);
    }
    CHECK(resources == std::set<std::string>{"Visit Notes", "Prescription", "Radiology Lab Report",
                                             "Pathology Lab Report", "Immunization History"});

    // resource-oriented flips the counterpart
    auto by_resource = g.query({Orientation::ResourceOriented, "Visit Notes", QueryMode::Given});
    REQUIRE(by_resource.size() == 1);
    CHECK(by_resource[0].counterparts == std::vector<std::string>{"david"});

    // every created consent carries exactly one GAVE edge here
    for (const auto& row : rows) {
        CHECK(g.gave_count(row.consent_id) == 1);
    }
}

TEST_CASE("executed mode reports grant ordinals and denial outcomes", "[provenance]") {
    Rig rig = make_rig();
    InformedConsent ic = grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read);
    ic.conditions = {AccessFrequency{5}};
    std::string id = rig.engine->create_consent("jordan", ic, at("2025-06-01T08:00"));

    for (int i = 1; i <= 5; ++i) {
        AccessRequest req;
        req.request_id = "r" + std::to_string(i);
        req.subject = {RoleCode::DOC, "david"};
        req.patient_id = "jordan";
        req.phi_id = "PHI1005";
        req.operation = OperationKind::Read;
        req.context.timestamp = CivilDateTime::parse("2025-06-02T0" + std::to_string(i) + ":00");
        REQUIRE(rig.authz->authorize(req).granted());
    }
    rig.engine->seal(at("2025-06-02T06:00"));

    ProvenanceGraph g = graph_of(*rig.engine);
    auto rows = g.query({Orientation::ConditionOriented, "AccessFrequency", QueryMode::Executed});
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].outcome == "Grant");
        CHECK(rows[i].ordinal == i + 1);
        CHECK(rows[i].consent_id == id);
    }
    CHECK(g.executed_count(id, "Grant") == rig.authz->use_count(id));
}

TEST_CASE("operation-oriented queries on a read-only fixture", "[provenance]") {
    Rig rig = make_rig();
    rig.engine->create_consent("jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read),
                               at("2025-06-01T08:00"));
    ProvenanceGraph g = graph_of(*rig.engine);
    CHECK(g.query({Orientation::OperationOriented, "Update", QueryMode::Given}).empty());
    CHECK(g.query({Orientation::OperationOriented, "Read", QueryMode::Given}).size() == 1);
    CHECK_THROWS_AS(g.query({Orientation::OperationOriented, "Delete", QueryMode::Given}), Error);
    CHECK_THROWS_AS(g.query({Orientation::UserOriented, "nobody", QueryMode::Given}), Error);
}

TEST_CASE("prefix-then-suffix ingestion equals whole-stream ingestion", "[provenance][property]") {
    Rig rig = make_rig();
    std::string id = rig.engine->create_consent(
        "jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read), at("2025-06-01T08:00"));
    for (int i = 0; i < 3; ++i) {
        AccessRequest req;
        req.request_id = "r" + std::to_string(i);
        req.subject = {RoleCode::DOC, "david"};
        req.patient_id = "jordan";
        req.phi_id = "PHI1005";
        req.operation = OperationKind::Read;
        req.context.timestamp = CivilDateTime::parse("2025-06-02T09:0" + std::to_string(i));
        rig.authz->authorize(req);
    }
    rig.engine->terminate_consent(id, at("2025-06-03T08:00"));

    auto events = rig.engine->chain().events();
    REQUIRE(events.size() > 4);

    ProvenanceGraph whole;
    whole.ingest(events);
    for (std::size_t split = 0; split <= events.size(); split += 2) {
        ProvenanceGraph pieces;
        pieces.ingest({events.begin(), events.begin() + split});
        pieces.ingest({events.begin() + split, events.end()});
        CHECK(pieces.export_json().dump() == whole.export_json().dump());
    }

    // archived consents stay, flagged historical
    auto rows = whole.query({Orientation::UserOriented, "david", QueryMode::Given});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].historical);
}

TEST_CASE("dot export is stable and carries one GAVE edge per consent", "[provenance][export]") {
    Rig rig = make_rig();
    rig.engine->create_consent("jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read),
                               at("2025-06-01T08:00"));
    rig.engine->create_consent("jordan", grant(RoleCode::NRS, "nina", "PHI1004", OperationKind::Read),
                               at("2025-06-01T08:01"));
    ProvenanceGraph g = graph_of(*rig.engine);

    const std::string dot = g.export_dot();
    CHECK(dot == g.export_dot());
    CHECK(dot.rfind("digraph", 0) == 0);
    std::size_t gave_edges = 0;
    for (std::size_t pos = 0; (pos = dot.find("label=\"GAVE", pos)) != std::string::npos; ++pos) {
        ++gave_edges;
    }
    CHECK(gave_edges == 2);
}

// Minimal graphviz-text validator: brace structure, node declarations first,
// every edge endpoint declared.
namespace {
bool validate_dot(const std::string& dot, std::string& why) {
    std::istringstream in(dot);
    std::string line;
    std::set<std::string> declared;
    bool saw_header = false, saw_close = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            saw_header = line.rfind("digraph", 0) == 0 && line.find('{') != std::string::npos;
            if (!saw_header) {
                why = "missing digraph header";
                return false;
            }
            continue;
        }
        if (line == "}") {
            saw_close = true;
            continue;
        }
        if (saw_close) {
            why = "content after closing brace";
            return false;
        }
        auto quoted = [&line](std::size_t from, std::string& out, std::size_t& end) {
            std::size_t a = line.find('"', from);
            if (a == std::string::npos) return false;
            std::size_t b = line.find('"', a + 1);
            if (b == std::string::npos) return false;
            out = line.substr(a + 1, b - a - 1);
            end = b + 1;
            return true;
        };
        std::string first;
        std::size_t after = 0;
        if (line.find("->") != std::string::npos) {
            std::string to;
            std::size_t arrow = line.find("->");
            if (!quoted(0, first, after) || after > arrow || !quoted(arrow, to, after)) {
                why = "unparseable edge at line " + std::to_string(lineno);
                return false;
            }
            if (!declared.count(first) || !declared.count(to)) {
                why = "edge references undeclared node at line " + std::to_string(lineno);
                return false;
            }
        } else if (line.find('[') != std::string::npos) {
            if (!quoted(0, first, after)) {
                why = "unparseable node at line " + std::to_string(lineno);
                return false;
            }
            declared.insert(first);
        } else if (line.find("rankdir") == std::string::npos && !line.empty()) {
            why = "unrecognized line " + std::to_string(lineno);
            return false;
        }
    }
    if (!saw_close) why = "missing closing brace";
    return saw_close;
}
} // namespace

TEST_CASE("dot export passes a graph-text validator", "[provenance][export]") {
    Rig rig = make_rig();
    std::string id = rig.engine->create_consent(
        "jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read), at("2025-06-01T08:00"));
    AccessRequest req;
    req.request_id = "r1";
    req.subject = {RoleCode::DOC, "david"};
    req.patient_id = "jordan";
    req.phi_id = "PHI1005";
    req.operation = OperationKind::Read;
    req.context.timestamp = CivilDateTime::parse("2025-06-02T09:00");
    rig.authz->authorize(req);
    rig.engine->terminate_consent(id, at("2025-06-03T08:00"));

    ProvenanceGraph g = graph_of(*rig.engine);
    std::string why;
    const bool ok = validate_dot(g.export_dot(), why);
    INFO(why);
    CHECK(ok);

    // empty graph validates too
    ProvenanceGraph empty;
    CHECK(validate_dot(empty.export_dot(), why));
}

TEST_CASE("json export parses back and re-exports byte-identically", "[provenance][export]") {
    Rig rig = make_rig();
    std::string id = rig.engine->create_consent(
        "jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read), at("2025-06-01T08:00"));
    AccessRequest req;
    req.request_id = "r1";
    req.subject = {RoleCode::DOC, "david"};
    req.patient_id = "jordan";
    req.phi_id = "PHI1005";
    req.operation = OperationKind::Read;
    req.context.timestamp = CivilDateTime::parse("2025-06-02T09:00");
    rig.authz->authorize(req);
    rig.engine->seal(at("2025-06-02T10:00"));

    ProvenanceGraph g = graph_of(*rig.engine);
    const std::string exported = g.export_json().dump();
    ProvenanceGraph back = ProvenanceGraph::from_json(json::parse(exported));
    CHECK(back.export_json().dump() == exported);
    CHECK(back.executed_count(id, "Grant") == 1);
}

TEST_CASE("rebuilding the graph from scratch reproduces query outputs", "[provenance][rebuild]") {
    Rig rig = make_rig();
    std::string id = rig.engine->create_consent(
        "jordan", grant(RoleCode::DOC, "david", "PHI1005", OperationKind::Read), at("2025-06-01T08:00"));
    for (int i = 0; i < 4; ++i) {
        AccessRequest req;
        req.request_id = "r" + std::to_string(i);
        req.subject = {RoleCode::DOC, "david"};
        req.patient_id = "jordan";
        req.phi_id = "PHI1005";
        req.operation = i % 2 ? OperationKind::Write : OperationKind::Read;
        req.context.timestamp = CivilDateTime::parse("2025-06-02T09:0" + std::to_string(i));
        rig.authz->authorize(req);
    }
    rig.engine->seal(at("2025-06-02T10:00"));

    ProvenanceGraph first = graph_of(*rig.engine);
    ProvenanceGraph second = graph_of(*rig.engine);
    OrientationQuery q{Orientation::UserOriented, "david", QueryMode::Executed};
    auto rows1 = first.query(q);
    auto rows2 = second.query(q);
    REQUIRE(rows1.size() == rows2.size());
    for (std::size_t i = 0; i < rows1.size(); ++i) {
        CHECK(rows1[i].to_json().dump() == rows2[i].to_json().dump());
    }
    CHECK(first.executed_count(id, "Grant") == 2);
    // the write denials had no covering consent, so they anchor to the patient
    CHECK(first.executed_count(id, "Deny") == 0);
    std::size_t executed_edges = 0;
    for (const GraphEdge& e : first.edges()) {
        if (e.type == EdgeType::EXECUTED) ++executed_edges;
    }
    CHECK(executed_edges == 4);
}

TEST_CASE("malformed events are rejected", "[provenance]") {
    ProvenanceGraph g;
    EventRecord ev;
    ev.event_id = "ev1";
    ev.kind = EventKind::ConsentCreated;
    ev.payload = json{{"patient_id", "jordan"}}; // missing the consent body
    CHECK_THROWS_AS(g.ingest_one(ev), Error);
    try {
        g.ingest_one(ev);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MalformedEvent);
    }
}
