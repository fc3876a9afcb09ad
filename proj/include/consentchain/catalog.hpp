#pragma once

// consentchain/catalog.hpp — PHI catalog, role/operation permission matrix,
// and consent structural validation.
//
// Both the catalog and the matrix live in human-editable JSON fixture files;
// the loaded matrix is the single source of truth for matrix_permits.

#include <json.hpp>

#include <array>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "consentchain/consent.hpp"
#include "consentchain/domain.hpp"
#include "consentchain/errors.hpp"

namespace consentchain {

struct PhiCatalogEntry {
    std::string phi_id; // "PHI####"
    std::string name;
    std::string description;
};

class PhiCatalog {
public:
    PhiCatalog() = default;

    explicit PhiCatalog(std::vector<PhiCatalogEntry> entries) {
        for (auto& e : entries) {
            if (by_id_.count(e.phi_id)) {
                throw Error(Errc::ParseError, "duplicate catalog entry " + e.phi_id);
            }
            by_id_.emplace(e.phi_id, std::move(e));
        }
    }

    static PhiCatalog from_json(const json& j) {
        std::vector<PhiCatalogEntry> entries;
        for (const auto& e : j.at("entries")) {
            entries.push_back({e.at("phi_id").get<std::string>(), e.at("name").get<std::string>(),
                               e.value("description", "")});
        }
        return PhiCatalog(std::move(entries));
    }

    static PhiCatalog load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(Errc::ParseError, "cannot open catalog file " + path);
        return from_json(json::parse(in));
    }

    bool contains(const std::string& phi_id) const { return by_id_.count(phi_id) != 0; }

    const PhiCatalogEntry& at(const std::string& phi_id) const {
        auto it = by_id_.find(phi_id);
        if (it == by_id_.end()) throw Error(Errc::UnknownPhi, phi_id + " not in catalog");
        return it->second;
    }

    std::string name_of(const std::string& phi_id) const {
        auto it = by_id_.find(phi_id);
        return it == by_id_.end() ? phi_id : it->second.name;
    }

    std::size_t size() const { return by_id_.size(); }

    const std::map<std::string, PhiCatalogEntry>& entries() const { return by_id_; }

private:
    std::map<std::string, PhiCatalogEntry> by_id_;
};

// Role-oriented PHI operation matrix. A cell (phi, op) lists the roles allowed
// to perform op on phi; everything absent is denied.
class PermissionMatrix {
public:
    PermissionMatrix() = default;

    static PermissionMatrix from_json(const json& j) {
        PermissionMatrix m;
        for (const auto& row : j.at("rows")) {
            const std::string phi = row.at("phi_id").get<std::string>();
            static const std::array<std::pair<const char*, OperationKind>, 3> cols = {
                {{"read", OperationKind::Read}, {"write", OperationKind::Write}, {"update", OperationKind::Update}}};
            for (const auto& [key, op] : cols) {
                for (const auto& role : row.at(key)) {
                    m.allowed_[phi][static_cast<int>(op)].insert(role_from_name(role.get<std::string>()));
                }
            }
            m.phis_.insert(phi);
        }
        return m;
    }

    static PermissionMatrix load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(Errc::ParseError, "cannot open matrix file " + path);
        return from_json(json::parse(in));
    }

    // Exact cell membership; throws UnknownPhi outside the matrix rows.
    bool permits(RoleCode role, const std::string& phi_id, OperationKind op) const {
        auto it = allowed_.find(phi_id);
        if (it == allowed_.end()) throw Error(Errc::UnknownPhi, phi_id + " not in matrix");
        return it->second[static_cast<int>(op)].count(role) != 0;
    }

    const std::set<std::string>& phi_ids() const { return phis_; }

private:
    std::map<std::string, std::array<std::set<RoleCode>, 3>> allowed_;
    std::set<std::string> phis_;
};

enum class FindingCode : std::uint8_t {
    EmptyUserSet,
    EmptyObjectSet,
    EmptyOperationSet,
    UnknownPhi,
    InvalidCondition,
    MatrixViolation,
};

inline const char* finding_code_name(FindingCode c) {
    static const char* names[] = {"EmptyUserSet",  "EmptyObjectSet",   "EmptyOperationSet",
                                  "UnknownPhi",    "InvalidCondition", "MatrixViolation"};
    return names[static_cast<int>(c)];
}

struct ValidationFinding {
    FindingCode code;
    std::string detail;
};

// Structural validation of a consent against the catalog and matrix. Pure;
// an empty result means the consent is admissible structure-wise.
inline std::vector<ValidationFinding> validate_consent(const InformedConsent& ic,
                                                       const PhiCatalog& catalog,
                                                       const PermissionMatrix& matrix) {
    std::vector<ValidationFinding> findings;
    if (ic.users.empty()) findings.push_back({FindingCode::EmptyUserSet, ic.consent_id});
    if (ic.objects.empty()) findings.push_back({FindingCode::EmptyObjectSet, ic.consent_id});
    if (ic.operations.empty()) findings.push_back({FindingCode::EmptyOperationSet, ic.consent_id});
    for (const auto& phi : ic.objects) {
        if (!catalog.contains(phi)) {
            findings.push_back({FindingCode::UnknownPhi, phi});
        }
    }
    for (const auto& c : ic.conditions) {
        if (!condition_well_formed(c)) {
            findings.push_back({FindingCode::InvalidCondition, condition_str(c)});
        }
    }
    for (const auto& user : ic.users) {
        for (const auto& phi : ic.objects) {
            if (!catalog.contains(phi)) continue;
            for (OperationKind op : ic.operations) {
                if (!matrix.permits(user.role, phi, op)) {
                    findings.push_back({FindingCode::MatrixViolation,
                                        user.str() + " " + operation_name(op) + " " + phi});
                }
            }
        }
    }
    return findings;
}

} // namespace consentchain
