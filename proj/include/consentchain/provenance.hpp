#pragma once

// consentchain/provenance.hpp — the consent provenance graph and the four
// query orientations (user, resource, operation, condition) over given and
// executed consents.
//
// The graph is an in-process adjacency structure rebuilt deterministically
// from the sealed event stream: the same events always produce the same graph
// with identical identifiers, and ingesting a prefix then the suffix equals
// ingesting the whole. Archived consents stay in the graph flagged historical.
// Denied accesses appear as EXECUTED edges too (outcome Deny); a denial that
// matched no consent at all anchors to the patient node so that every decision
// event has exactly one EXECUTED edge.

#include <json.hpp>

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "consentchain/catalog.hpp"
#include "consentchain/consent.hpp"
#include "consentchain/ledger.hpp"

namespace consentchain {

enum class NodeType : std::uint8_t { Patient, User, Consent, Resource, Operation, Condition, Event };

inline const char* node_type_name(NodeType t) {
    static const char* names[] = {"Patient", "User", "Consent", "Resource", "Operation", "Condition", "Event"};
    return names[static_cast<int>(t)];
}

inline NodeType node_type_from_name(const std::string& s) {
    for (int i = 0; i < 7; ++i) {
        if (s == node_type_name(static_cast<NodeType>(i))) return static_cast<NodeType>(i);
    }
    throw Error(Errc::ParseError, "unknown node type '" + s + "'");
}

struct GraphNode {
    NodeType type = NodeType::Consent;
    std::string id;    // namespaced, e.g. "consent:IC-000001"
    std::string label; // display name
    bool historical = false;

    bool operator==(const GraphNode&) const = default;
};

enum class EdgeType : std::uint8_t { GAVE, COVERS, PERMITS, GUARDED_BY, EXECUTED };

inline const char* edge_type_name(EdgeType t) {
    static const char* names[] = {"GAVE", "COVERS", "PERMITS", "GUARDED_BY", "EXECUTED"};
    return names[static_cast<int>(t)];
}

inline EdgeType edge_type_from_name(const std::string& s) {
    for (int i = 0; i < 5; ++i) {
        if (s == edge_type_name(static_cast<EdgeType>(i))) return static_cast<EdgeType>(i);
    }
    throw Error(Errc::ParseError, "unknown edge type '" + s + "'");
}

struct GraphEdge {
    EdgeType type = EdgeType::GAVE;
    std::string from; // node id
    std::string to;   // node id
    std::string consent_id;
    // EXECUTED attributes
    std::string outcome;   // "Grant" | "Deny"
    std::string at;        // civil timestamp text
    std::uint32_t ordinal = 0; // grant use ordinal, 1-based; 0 for denials
    std::string user;
    std::string operation;

    auto key() const { return std::tie(type, from, to, consent_id, at, outcome, ordinal, user, operation); }
    bool operator<(const GraphEdge& o) const { return key() < o.key(); }
    bool operator==(const GraphEdge& o) const { return key() == o.key(); }
};

enum class Orientation : std::uint8_t { UserOriented, ResourceOriented, OperationOriented, ConditionOriented };

inline const char* orientation_name(Orientation o) {
    static const char* names[] = {"UserOriented", "ResourceOriented", "OperationOriented", "ConditionOriented"};
    return names[static_cast<int>(o)];
}

inline Orientation orientation_from_name(const std::string& s) {
    for (int i = 0; i < 4; ++i) {
        if (s == orientation_name(static_cast<Orientation>(i))) return static_cast<Orientation>(i);
    }
    throw Error(Errc::ParseError, "unknown orientation '" + s + "'");
}

enum class QueryMode : std::uint8_t { Given, Executed };

struct OrientationQuery {
    Orientation orientation = Orientation::UserOriented;
    std::string key;
    QueryMode mode = QueryMode::Given;
};

struct ReportRow {
    std::string consent_id;
    std::vector<std::string> counterparts;
    std::vector<std::string> operations;
    std::vector<std::string> conditions;
    bool historical = false;
    // Executed mode only
    std::string outcome;
    std::string at;
    std::uint32_t ordinal = 0;

    json to_json() const {
        json j{{"consent_id", consent_id},
               {"counterparts", counterparts},
               {"operations", operations},
               {"conditions", conditions},
               {"historical", historical}};
        if (!outcome.empty()) {
            j["outcome"] = outcome;
            j["at"] = at;
            j["ordinal"] = ordinal;
        }
        return j;
    }
};

inline const char* shape_of(NodeType t) {
    switch (t) {
        case NodeType::Patient: return "doubleoctagon";
        case NodeType::User: return "ellipse";
        case NodeType::Consent: return "box";
        case NodeType::Resource: return "folder";
        case NodeType::Operation: return "diamond";
        case NodeType::Condition: return "hexagon";
        case NodeType::Event: return "note";
    }
    return "ellipse";
}

class ProvenanceGraph {
public:
    // ------------------------------------------------------------------
    // Ingestion
    // ------------------------------------------------------------------

    void ingest(const std::vector<EventRecord>& events) {
        for (const EventRecord& ev : events) ingest_one(ev);
    }

    void ingest_one(const EventRecord& ev) {
        switch (ev.kind) {
            case EventKind::ConsentCreated: ingest_created(ev); break;
            case EventKind::ConsentArchived: {
                auto it = nodes_.find("consent:" + ev.payload_str("consent_id"));
                if (it != nodes_.end()) it->second.historical = true;
                break;
            }
            case EventKind::AccessGranted:
            case EventKind::AccessDenied: ingest_decision(ev); break;
            case EventKind::PpaIntegrityStored:
            case EventKind::ConsentAltered:
            case EventKind::ConsentTerminated:
            case EventKind::ConsentExpired:
                break; // structure arrives via Created/Archived events
        }
    }

    // ------------------------------------------------------------------
    // Queries
    // ------------------------------------------------------------------

    std::vector<ReportRow> query(const OrientationQuery& q) const {
        std::vector<std::string> seeds = seed_consents(q);
        std::vector<ReportRow> rows;
        for (const std::string& cid : seeds) {
            if (q.mode == QueryMode::Given) {
                rows.push_back(given_row(q, cid));
            } else {
                for (const GraphEdge& e : edges_) {
                    if (e.type != EdgeType::EXECUTED || e.consent_id != cid) continue;
                    ReportRow row;
                    row.consent_id = cid;
                    row.counterparts = {e.user};
                    row.operations = {e.operation};
                    row.conditions = conditions_of(cid);
                    row.historical = node_historical("consent:" + cid);
                    row.outcome = e.outcome;
                    row.at = e.at;
                    row.ordinal = e.ordinal;
                    rows.push_back(std::move(row));
                }
            }
        }
        return rows;
    }

    // ------------------------------------------------------------------
    // Export
    // ------------------------------------------------------------------

    // Valid graphviz text; node types rendered as shapes, edge labels carry
    // consent ids. Canonically ordered, so exports are byte-stable.
    std::string export_dot() const {
        std::ostringstream out;
        out << "digraph consent_provenance {\n";
        out << "  rankdir=LR;\n";
        for (const auto& [id, n] : nodes_) {
            out << "  \"" << id << "\" [shape=" << shape_of(n.type) << ", label=\"" << n.label << "\"";
            if (n.historical) out << ", style=dashed";
            out << "];\n";
        }
        for (const GraphEdge& e : edges_) {
            out << "  \"" << e.from << "\" -> \"" << e.to << "\" [label=\"" << edge_type_name(e.type);
            if (e.type == EdgeType::GAVE) out << " " << e.consent_id;
            if (e.type == EdgeType::EXECUTED) {
                out << " " << e.outcome;
                if (e.ordinal > 0) out << " #" << e.ordinal;
                out << " @" << e.at;
            }
            out << "\"];\n";
        }
        out << "}\n";
        return out.str();
    }

    json export_json() const {
        auto nodes = json::array();
        for (const auto& [id, n] : nodes_) {
            nodes.push_back(json{{"historical", n.historical},
                                 {"id", n.id},
                                 {"label", n.label},
                                 {"type", node_type_name(n.type)}});
        }
        auto edges = json::array();
        for (const GraphEdge& e : edges_) {
            json je{{"consent_id", e.consent_id},
                    {"from", e.from},
                    {"to", e.to},
                    {"type", edge_type_name(e.type)}};
            if (e.type == EdgeType::EXECUTED) {
                je["at"] = e.at;
                je["operation"] = e.operation;
                je["ordinal"] = e.ordinal;
                je["outcome"] = e.outcome;
                je["user"] = e.user;
            }
            edges.push_back(std::move(je));
        }
        return json{{"edges", edges}, {"nodes", nodes}};
    }

    static ProvenanceGraph from_json(const json& j) {
        ProvenanceGraph g;
        for (const auto& jn : j.at("nodes")) {
            GraphNode n;
            n.type = node_type_from_name(jn.at("type").get<std::string>());
            n.id = jn.at("id").get<std::string>();
            n.label = jn.at("label").get<std::string>();
            n.historical = jn.at("historical").get<bool>();
            g.nodes_.emplace(n.id, std::move(n));
        }
        for (const auto& je : j.at("edges")) {
            GraphEdge e;
            e.type = edge_type_from_name(je.at("type").get<std::string>());
            e.from = je.at("from").get<std::string>();
            e.to = je.at("to").get<std::string>();
            e.consent_id = je.at("consent_id").get<std::string>();
            if (e.type == EdgeType::EXECUTED) {
                e.at = je.at("at").get<std::string>();
                e.operation = je.at("operation").get<std::string>();
                e.ordinal = je.at("ordinal").get<std::uint32_t>();
                e.outcome = je.at("outcome").get<std::string>();
                e.user = je.at("user").get<std::string>();
                // keep grant numbering continuous if ingestion resumes
                if (e.outcome == "Grant" && !e.consent_id.empty()) {
                    auto& next = g.grant_ordinals_[e.consent_id];
                    next = std::max(next, e.ordinal);
                }
            }
            g.edges_.insert(std::move(e));
        }
        return g;
    }

    // ------------------------------------------------------------------
    // Consistency views
    // ------------------------------------------------------------------

    std::size_t executed_count(const std::string& consent_id, const std::string& outcome) const {
        std::size_t n = 0;
        for (const GraphEdge& e : edges_) {
            if (e.type == EdgeType::EXECUTED && e.consent_id == consent_id && e.outcome == outcome) ++n;
        }
        return n;
    }

    std::size_t gave_count(const std::string& consent_id) const {
        std::size_t n = 0;
        for (const GraphEdge& e : edges_) {
            if (e.type == EdgeType::GAVE && e.consent_id == consent_id) ++n;
        }
        return n;
    }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::map<std::string, GraphNode>& nodes() const { return nodes_; }
    const std::set<GraphEdge>& edges() const { return edges_; }

private:
    void touch_node(NodeType type, const std::string& id, const std::string& label) {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) {
            nodes_.emplace(id, GraphNode{type, id, label, false});
        }
    }

    void ingest_created(const EventRecord& ev) {
        if (!ev.payload.contains("consent")) {
            throw Error(Errc::MalformedEvent, "ConsentCreated missing key consent");
        }
        InformedConsent ic = consent_from_json(ev.payload.at("consent"));
        const json names = ev.payload.value("object_names", json::object());
        const std::string cid = "consent:" + ic.consent_id;
        touch_node(NodeType::Patient, "patient:" + ic.patient_id, ic.patient_id);
        touch_node(NodeType::Consent, cid, ic.consent_id);
        for (const auto& u : ic.users) {
            touch_node(NodeType::User, "user:" + u.user_id, u.user_id);
            GraphEdge e;
            e.type = EdgeType::GAVE;
            e.from = "patient:" + ic.patient_id;
            e.to = "user:" + u.user_id;
            e.consent_id = ic.consent_id;
            edges_.insert(std::move(e));
        }
        for (const auto& phi : ic.objects) {
            const std::string label = names.contains(phi) ? names.at(phi).get<std::string>() : phi;
            touch_node(NodeType::Resource, "resource:" + phi, label);
            GraphEdge e;
            e.type = EdgeType::COVERS;
            e.from = cid;
            e.to = "resource:" + phi;
            e.consent_id = ic.consent_id;
            edges_.insert(std::move(e));
        }
        for (OperationKind op : ic.operations) {
            touch_node(NodeType::Operation, std::string("operation:") + operation_name(op), operation_name(op));
            GraphEdge e;
            e.type = EdgeType::PERMITS;
            e.from = cid;
            e.to = std::string("operation:") + operation_name(op);
            e.consent_id = ic.consent_id;
            edges_.insert(std::move(e));
        }
        for (const Condition& c : ic.conditions) {
            const std::string text = condition_str(c);
            touch_node(NodeType::Condition, "condition:" + text, text);
            GraphEdge e;
            e.type = EdgeType::GUARDED_BY;
            e.from = cid;
            e.to = "condition:" + text;
            e.consent_id = ic.consent_id;
            edges_.insert(std::move(e));
        }
    }

    void ingest_decision(const EventRecord& ev) {
        const bool granted = ev.kind == EventKind::AccessGranted;
        const std::string consent_id = ev.payload_str("consent_id");
        const std::string patient_id = ev.payload_str("patient_id");
        const std::string user = ev.payload_str("user");
        touch_node(NodeType::Event, "event:" + ev.event_id, ev.event_id);
        GraphEdge e;
        e.type = EdgeType::EXECUTED;
        e.from = "event:" + ev.event_id;
        std::string anchor = consent_id;
        if (anchor.empty() && ev.payload.contains("candidates") && !ev.payload.at("candidates").empty()) {
            // Denial with evaluated candidates: anchor to the first implicated
            // consent so condition-oriented executed queries surface it.
            anchor = ev.payload.at("candidates").front().get<std::string>();
        }
        if (!anchor.empty()) {
            touch_node(NodeType::Consent, "consent:" + anchor, anchor);
            e.to = "consent:" + anchor;
            e.consent_id = anchor;
        } else {
            // No consent ever covered this request; anchor the audit record
            // to the patient so every decision has exactly one EXECUTED edge.
            touch_node(NodeType::Patient, "patient:" + patient_id, patient_id);
            e.to = "patient:" + patient_id;
        }
        e.outcome = granted ? "Grant" : "Deny";
        e.at = ev.payload_str("decided_at");
        e.user = user;
        e.operation = ev.payload_str("operation");
        if (granted) {
            e.ordinal = ++grant_ordinals_[consent_id];
        }
        edges_.insert(std::move(e));
    }

    bool node_historical(const std::string& id) const {
        auto it = nodes_.find(id);
        return it != nodes_.end() && it->second.historical;
    }

    std::vector<std::string> conditions_of(const std::string& consent_id) const {
        std::vector<std::string> out;
        for (const GraphEdge& e : edges_) {
            if (e.type == EdgeType::GUARDED_BY && e.consent_id == consent_id) {
                out.push_back(label_of(e.to));
            }
        }
        return out;
    }

    std::string label_of(const std::string& node_id) const {
        auto it = nodes_.find(node_id);
        return it == nodes_.end() ? node_id : it->second.label;
    }

    ReportRow given_row(const OrientationQuery& q, const std::string& cid) const {
        ReportRow row;
        row.consent_id = cid;
        row.historical = node_historical("consent:" + cid);
        row.conditions = conditions_of(cid);
        std::vector<std::string> users, resources;
        for (const GraphEdge& e : edges_) {
            if (e.consent_id != cid) continue;
            if (e.type == EdgeType::GAVE) users.push_back(label_of(e.to));
            if (e.type == EdgeType::COVERS) resources.push_back(label_of(e.to));
            if (e.type == EdgeType::PERMITS) row.operations.push_back(label_of(e.to));
        }
        switch (q.orientation) {
            case Orientation::UserOriented: row.counterparts = resources; break;
            case Orientation::ResourceOriented: row.counterparts = users; break;
            case Orientation::OperationOriented:
            case Orientation::ConditionOriented: {
                row.counterparts = users;
                row.counterparts.insert(row.counterparts.end(), resources.begin(), resources.end());
                break;
            }
        }
        return row;
    }

    // Consents implicated by the query key, ascending. Throws UnknownKey for
    // keys that name nothing resolvable in this graph.
    std::vector<std::string> seed_consents(const OrientationQuery& q) const {
        std::set<std::string> seeds;
        switch (q.orientation) {
            case Orientation::UserOriented: {
                if (!nodes_.count("user:" + q.key)) {
                    throw Error(Errc::UnknownKey, "no user '" + q.key + "' in graph");
                }
                for (const GraphEdge& e : edges_) {
                    if (e.type == EdgeType::GAVE && e.to == "user:" + q.key) seeds.insert(e.consent_id);
                }
                break;
            }
            case Orientation::ResourceOriented: {
                std::string node_id;
                for (const auto& [id, n] : nodes_) {
                    if (n.type != NodeType::Resource) continue;
                    if (id == "resource:" + q.key || n.label == q.key) {
                        node_id = id;
                        break;
                    }
                }
                if (node_id.empty()) throw Error(Errc::UnknownKey, "no resource '" + q.key + "' in graph");
                for (const GraphEdge& e : edges_) {
                    if (e.type == EdgeType::COVERS && e.to == node_id) seeds.insert(e.consent_id);
                }
                break;
            }
            case Orientation::OperationOriented: {
                try {
                    operation_from_name(q.key);
                } catch (const Error&) {
                    throw Error(Errc::UnknownKey, "no operation '" + q.key + "'");
                }
                for (const GraphEdge& e : edges_) {
                    if (e.type == EdgeType::PERMITS && e.to == "operation:" + q.key) seeds.insert(e.consent_id);
                }
                break;
            }
            case Orientation::ConditionOriented: {
                static const std::set<std::string> kinds = {"TimeWindow", "CalendarExpiry", "DayOfWeek",
                                                            "GeoFence",   "IpAllowlist",    "AccessFrequency"};
                const bool is_kind = kinds.count(q.key) != 0;
                if (!is_kind && !nodes_.count("condition:" + q.key)) {
                    throw Error(Errc::UnknownKey, "no condition '" + q.key + "' in graph");
                }
                for (const GraphEdge& e : edges_) {
                    if (e.type != EdgeType::GUARDED_BY) continue;
                    const std::string label = label_of(e.to);
                    if (is_kind ? label.rfind(q.key, 0) == 0 : e.to == "condition:" + q.key) {
                        seeds.insert(e.consent_id);
                    }
                }
                break;
            }
        }
        return {seeds.begin(), seeds.end()};
    }

    std::map<std::string, GraphNode> nodes_;
    std::set<GraphEdge> edges_;
    std::map<std::string, std::uint32_t> grant_ordinals_;
};

} // namespace consentchain
