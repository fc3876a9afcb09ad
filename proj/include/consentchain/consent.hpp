#pragma once

// consentchain/consent.hpp — informed consents, patient-provider agreements,
// canonical encoding and integrity digests.
//
// An informed consent is the four-part grant (users, objects, operations,
// conditions) plus lifecycle status. A PPA bundles four component lists
// (patient, provider, regulatory, informed-consent components); only its
// composite digest is ever anchored on chain.

#include <json.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "consentchain/bytes.hpp"
#include "consentchain/conditions.hpp"
#include "consentchain/domain.hpp"
#include "consentchain/encode.hpp"
#include "consentchain/errors.hpp"
#include "consentchain/sha256.hpp"

namespace consentchain {

enum class ArchiveCause : std::uint8_t { Altered, Terminated, Expired };

inline const char* archive_cause_name(ArchiveCause c) {
    static const char* names[] = {"Altered", "Terminated", "Expired"};
    return names[static_cast<int>(c)];
}

inline ArchiveCause archive_cause_from_name(const std::string& s) {
    for (int i = 0; i < 3; ++i) {
        if (s == archive_cause_name(static_cast<ArchiveCause>(i))) return static_cast<ArchiveCause>(i);
    }
    throw Error(Errc::ParseError, "unknown archive cause '" + s + "'");
}

// Lifecycle status. An archived consent never becomes active again.
struct ConsentStatus {
    bool archived = false;
    ArchiveCause cause = ArchiveCause::Terminated; // meaningful only when archived
    LogicalTime archived_at = 0;

    static ConsentStatus active() { return {}; }
    static ConsentStatus archived_as(ArchiveCause c, LogicalTime at) { return {true, c, at}; }

    bool operator==(const ConsentStatus&) const = default;
};

struct InformedConsent {
    std::string consent_id;
    std::string patient_id;
    std::set<UserRef> users;            // U
    std::set<std::string> objects;      // O, phi ids
    std::set<OperationKind> operations; // OP
    std::vector<Condition> conditions;  // CON, may be empty
    ConsentStatus status;

    bool covers(const UserRef& subject, const std::string& phi_id, OperationKind op) const {
        return users.count(subject) && objects.count(phi_id) && operations.count(op);
    }
};

// Grant identity encoding: status is lifecycle metadata and stays out, so the
// digest of a consent is stable across archival.
inline void encode_consent(Encoder& e, const InformedConsent& ic) {
    e.str(ic.consent_id);
    e.str(ic.patient_id);
    e.count(ic.users.size());
    for (const auto& u : ic.users) e.u8(static_cast<std::uint8_t>(u.role)).str(u.user_id);
    e.count(ic.objects.size());
    for (const auto& o : ic.objects) e.str(o);
    e.count(ic.operations.size());
    for (OperationKind op : ic.operations) e.u8(static_cast<std::uint8_t>(op));
    // Conditions form a set but carry no identifier; sort by their own
    // encodings and drop repeats so equal logical values encode equally.
    std::vector<Bytes> encoded;
    encoded.reserve(ic.conditions.size());
    for (const auto& c : ic.conditions) {
        Encoder ce;
        encode_condition(ce, c);
        encoded.push_back(ce.take());
    }
    std::sort(encoded.begin(), encoded.end());
    encoded.erase(std::unique(encoded.begin(), encoded.end()), encoded.end());
    e.count(encoded.size());
    for (const auto& b : encoded) e.blob(b);
}

inline Bytes canonical_encode(const InformedConsent& ic) {
    Encoder e;
    encode_consent(e, ic);
    return e.take();
}

struct Ppa {
    std::string ppa_id;
    std::string patient_id;
    std::vector<std::string> pc;  // patient components, opaque
    std::vector<std::string> prc; // provider components, opaque
    std::vector<std::string> roc; // regulatory components, opaque
    std::vector<InformedConsent> icc;
    CivilDate validity_end;

    // Complete: all four component lists present and non-empty.
    bool complete() const { return !pc.empty() && !prc.empty() && !roc.empty() && !icc.empty(); }
};

inline Bytes canonical_encode(const std::vector<std::string>& components) {
    Encoder e;
    e.count(components.size());
    for (const auto& c : components) e.str(c);
    return e.take();
}

inline Bytes canonical_encode_icc(const std::vector<InformedConsent>& icc) {
    Encoder e;
    e.count(icc.size());
    for (const auto& ic : icc) e.blob(canonical_encode(ic));
    return e.take();
}

inline Bytes canonical_encode(const Ppa& ppa) {
    Encoder e;
    e.str(ppa.ppa_id);
    e.str(ppa.patient_id);
    e.blob(canonical_encode(ppa.pc));
    e.blob(canonical_encode(ppa.prc));
    e.blob(canonical_encode(ppa.roc));
    e.blob(canonical_encode_icc(ppa.icc));
    e.u16(static_cast<std::uint16_t>(ppa.validity_end.year));
    e.u8(static_cast<std::uint8_t>(ppa.validity_end.month));
    e.u8(static_cast<std::uint8_t>(ppa.validity_end.day));
    return e.take();
}

// Component digests and the composite anchored on chain. The composite hash
// covers exactly the four component digests, concatenated in order.
struct PpaIntegrity {
    Digest h_pc, h_prc, h_roc, h_icc;
    Digest h_ppa;

    bool operator==(const PpaIntegrity&) const = default;
};

inline PpaIntegrity hash_ppa(const Ppa& ppa) {
    if (!ppa.complete()) {
        throw Error(Errc::IncompletePpa, "PPA " + ppa.ppa_id + " is missing component lists");
    }
    PpaIntegrity out;
    out.h_pc = sha256(canonical_encode(ppa.pc));
    out.h_prc = sha256(canonical_encode(ppa.prc));
    out.h_roc = sha256(canonical_encode(ppa.roc));
    out.h_icc = sha256(canonical_encode_icc(ppa.icc));
    Encoder e;
    e.digest(out.h_pc).digest(out.h_prc).digest(out.h_roc).digest(out.h_icc);
    out.h_ppa = sha256(e.bytes());
    return out;
}

// ---------------------------------------------------------------------------
// JSON forms, used by fixture files, scenario files and event payloads.
// nlohmann::json keeps object keys sorted, so dumps are canonical.
// ---------------------------------------------------------------------------

using json = nlohmann::json;

inline json condition_to_json(const Condition& c) {
    json j;
    j["kind"] = condition_kind_name(c);
    std::visit(
        [&j](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TimeWindow>) {
                j["start"] = v.start_minute;
                j["end"] = v.end_minute;
            } else if constexpr (std::is_same_v<T, CalendarExpiry>) {
                j["expiry"] = v.expiry_date.str();
            } else if constexpr (std::is_same_v<T, DayOfWeek>) {
                auto arr = json::array();
                for (Weekday d : v.allowed_days) arr.push_back(weekday_name(d));
                j["days"] = arr;
            } else if constexpr (std::is_same_v<T, GeoFence>) {
                j["zones"] = v.allowed_zones;
            } else if constexpr (std::is_same_v<T, IpAllowlist>) {
                j["prefixes"] = v.allowed_prefixes;
            } else {
                j["max_uses"] = v.max_uses;
            }
        },
        c);
    return j;
}

inline Condition condition_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "TimeWindow") {
        return TimeWindow{j.at("start").get<std::uint16_t>(), j.at("end").get<std::uint16_t>()};
    }
    if (kind == "CalendarExpiry") {
        return CalendarExpiry{CivilDate::parse(j.at("expiry").get<std::string>())};
    }
    if (kind == "DayOfWeek") {
        DayOfWeek d;
        for (const auto& s : j.at("days")) d.allowed_days.insert(weekday_from_name(s.get<std::string>()));
        return d;
    }
    if (kind == "GeoFence") {
        return GeoFence{j.at("zones").get<std::set<std::string>>()};
    }
    if (kind == "IpAllowlist") {
        return IpAllowlist{j.at("prefixes").get<std::set<std::string>>()};
    }
    if (kind == "AccessFrequency") {
        return AccessFrequency{j.at("max_uses").get<std::uint32_t>()};
    }
    throw Error(Errc::ParseError, "unknown condition kind '" + kind + "'");
}

inline json consent_to_json(const InformedConsent& ic) {
    json j;
    j["consent_id"] = ic.consent_id;
    j["patient_id"] = ic.patient_id;
    auto users = json::array();
    for (const auto& u : ic.users) users.push_back({{"role", role_name(u.role)}, {"user_id", u.user_id}});
    j["users"] = users;
    j["objects"] = ic.objects;
    auto ops = json::array();
    for (OperationKind op : ic.operations) ops.push_back(operation_name(op));
    j["operations"] = ops;
    auto conds = json::array();
    for (const auto& c : ic.conditions) conds.push_back(condition_to_json(c));
    j["conditions"] = conds;
    if (ic.status.archived) {
        j["status"] = {{"state", "Archived"},
                       {"cause", archive_cause_name(ic.status.cause)},
                       {"at", ic.status.archived_at}};
    } else {
        j["status"] = {{"state", "Active"}};
    }
    return j;
}

inline InformedConsent consent_from_json(const json& j) {
    InformedConsent ic;
    ic.consent_id = j.value("consent_id", "");
    ic.patient_id = j.value("patient_id", "");
    for (const auto& u : j.at("users")) {
        ic.users.insert(UserRef{role_from_name(u.at("role").get<std::string>()),
                                u.at("user_id").get<std::string>()});
    }
    ic.objects = j.at("objects").get<std::set<std::string>>();
    for (const auto& s : j.at("operations")) ic.operations.insert(operation_from_name(s.get<std::string>()));
    if (j.contains("conditions")) {
        for (const auto& c : j.at("conditions")) ic.conditions.push_back(condition_from_json(c));
    }
    if (j.contains("status") && j.at("status").at("state") == "Archived") {
        const auto& s = j.at("status");
        ic.status = ConsentStatus::archived_as(archive_cause_from_name(s.at("cause").get<std::string>()),
                                               s.at("at").get<LogicalTime>());
    }
    return ic;
}

inline json ppa_to_json(const Ppa& p) {
    json j;
    j["ppa_id"] = p.ppa_id;
    j["patient_id"] = p.patient_id;
    j["pc"] = p.pc;
    j["prc"] = p.prc;
    j["roc"] = p.roc;
    auto icc = json::array();
    for (const auto& ic : p.icc) icc.push_back(consent_to_json(ic));
    j["icc"] = icc;
    j["validity_end"] = p.validity_end.str();
    return j;
}

inline Ppa ppa_from_json(const json& j) {
    Ppa p;
    p.ppa_id = j.at("ppa_id").get<std::string>();
    p.patient_id = j.at("patient_id").get<std::string>();
    p.pc = j.at("pc").get<std::vector<std::string>>();
    p.prc = j.at("prc").get<std::vector<std::string>>();
    p.roc = j.at("roc").get<std::vector<std::string>>();
    for (const auto& ic : j.at("icc")) p.icc.push_back(consent_from_json(ic));
    p.validity_end = CivilDate::parse(j.at("validity_end").get<std::string>());
    return p;
}

} // namespace consentchain
