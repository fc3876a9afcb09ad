#pragma once

// consentchain/container.hpp — the per-patient consent container (active
// repository + read-only archive) and repository conflict detection.
//
// INVARIANTS:
//   - repository and archive key sets are disjoint
//   - repository holds only Active consents; archive entries are frozen
//   - archive entries are never modified or removed once written

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "consentchain/catalog.hpp"
#include "consentchain/consent.hpp"
#include "consentchain/domain.hpp"

namespace consentchain {

struct ArchiveReason {
    ArchiveCause cause = ArchiveCause::Terminated;
    std::string replaced_by;             // set when Altered
    std::optional<Condition> violated;   // set when Expired

    std::string str() const {
        switch (cause) {
            case ArchiveCause::Altered: return "Altered(" + replaced_by + ")";
            case ArchiveCause::Terminated: return "Terminated";
            case ArchiveCause::Expired:
                return "Expired(" + (violated ? condition_str(*violated) : std::string("?")) + ")";
        }
        return "?";
    }

    json to_json() const {
        json j{{"cause", archive_cause_name(cause)}};
        if (cause == ArchiveCause::Altered) j["replaced_by"] = replaced_by;
        if (cause == ArchiveCause::Expired && violated) j["violated"] = condition_to_json(*violated);
        return j;
    }

    static ArchiveReason from_json(const json& j) {
        ArchiveReason r;
        r.cause = archive_cause_from_name(j.at("cause").get<std::string>());
        if (j.contains("replaced_by")) r.replaced_by = j.at("replaced_by").get<std::string>();
        if (j.contains("violated")) r.violated = condition_from_json(j.at("violated"));
        return r;
    }
};

struct ArchiveEntry {
    InformedConsent consent; // frozen, status Archived
    ArchiveReason reason;
    LogicalTime archived_at = 0;
    Digest tx_id;
};

struct ConsentContainer {
    std::string patient_id;
    std::map<std::string, InformedConsent> repository; // consent_id -> Active consent
    std::map<std::string, ArchiveEntry> archive;       // consent_id -> frozen entry

    bool has_active(const std::string& consent_id) const { return repository.count(consent_id) != 0; }
    bool has_archived(const std::string& consent_id) const { return archive.count(consent_id) != 0; }

    std::vector<const InformedConsent*> active_consents() const {
        std::vector<const InformedConsent*> out;
        out.reserve(repository.size());
        for (const auto& [id, ic] : repository) out.push_back(&ic);
        return out;
    }

    // Canonical state document; acceptance tests digest this before/after
    // operations to check atomicity.
    json to_json() const {
        auto repo = json::array();
        for (const auto& [id, ic] : repository) repo.push_back(consent_to_json(ic));
        auto arch = json::array();
        for (const auto& [id, e] : archive) {
            arch.push_back(json{{"archived_at", e.archived_at},
                                {"consent", consent_to_json(e.consent)},
                                {"reason", e.reason.to_json()},
                                {"tx_id", e.tx_id.hex()}});
        }
        return json{{"archive", arch}, {"patient_id", patient_id}, {"repository", repo}};
    }
};

enum class ConflictCode : std::uint8_t { IncompleteTeam, DuplicateGrant, MatrixViolation, UnknownConsent };

inline const char* conflict_code_name(ConflictCode c) {
    static const char* names[] = {"IncompleteTeam", "DuplicateGrant", "MatrixViolation", "UnknownConsent"};
    return names[static_cast<int>(c)];
}

struct ConflictFinding {
    ConflictCode code;
    std::string detail;
    std::vector<std::string> implicated; // consent ids
};

struct ConflictReport {
    std::vector<ConflictFinding> findings;

    bool empty() const { return findings.empty(); }
    bool has(ConflictCode c) const {
        for (const auto& f : findings) {
            if (f.code == c) return true;
        }
        return false;
    }

    std::string str() const {
        std::string out;
        for (const auto& f : findings) {
            if (!out.empty()) out += "; ";
            out += conflict_code_name(f.code);
            if (!f.detail.empty()) out += "(" + f.detail + ")";
        }
        return out.empty() ? "none" : out;
    }
};

// The three repository conflict rules:
//   DuplicateGrant  — a (user, object, operation) triple granted by two
//                     distinct consents in the proposed set
//   MatrixViolation — a triple outside the permission matrix
//   IncompleteTeam  — a required role with no consent granting it anything
// An empty report means the proposed repository state is admissible.
inline ConflictReport detect_conflicts(const std::vector<const InformedConsent*>& proposed,
                                       const std::set<RoleCode>& required_roles,
                                       const PhiCatalog& catalog, const PermissionMatrix& matrix) {
    ConflictReport report;

    std::map<std::tuple<UserRef, std::string, OperationKind>, std::string> seen;
    std::set<RoleCode> granted_roles;
    for (const InformedConsent* ic : proposed) {
        for (const auto& user : ic->users) {
            if (!ic->objects.empty() && !ic->operations.empty()) granted_roles.insert(user.role);
            for (const auto& phi : ic->objects) {
                for (OperationKind op : ic->operations) {
                    auto key = std::make_tuple(user, phi, op);
                    auto [it, inserted] = seen.emplace(key, ic->consent_id);
                    if (!inserted && it->second != ic->consent_id) {
                        report.findings.push_back({ConflictCode::DuplicateGrant,
                                                   user.str() + " " + operation_name(op) + " " + phi,
                                                   {it->second, ic->consent_id}});
                    }
                    const bool known = catalog.contains(phi) && matrix.phi_ids().count(phi) != 0;
                    if (!known || !matrix.permits(user.role, phi, op)) {
                        report.findings.push_back({ConflictCode::MatrixViolation,
                                                   user.str() + " " + operation_name(op) + " " + phi,
                                                   {ic->consent_id}});
                    }
                }
            }
        }
    }
    for (RoleCode role : required_roles) {
        if (!granted_roles.count(role)) {
            report.findings.push_back({ConflictCode::IncompleteTeam, role_name(role), {}});
        }
    }
    return report;
}

} // namespace consentchain
