#pragma once

// consentchain/domain.hpp — treatment-team roles, PHI operations, user references.

#include <cstdint>
#include <string>

#include "consentchain/errors.hpp"

namespace consentchain {

// Treatment-team member codes plus the patient and the external (non-team)
// user class. EXTERNAL is never a treatment-team member and never appears in
// the permission matrix.
enum class RoleCode : std::uint8_t {
    DOC,
    NRS,
    STF,
    BLO,
    RLT,
    PLT,
    EMC,
    PHR,
    INA,
    PATIENT,
    EXTERNAL,
};

inline constexpr int kRoleCount = 11;

inline const char* role_name(RoleCode r) {
    static const char* names[] = {"DOC", "NRS", "STF", "BLO", "RLT",     "PLT",
                                  "EMC", "PHR", "INA", "PATIENT", "EXTERNAL"};
    return names[static_cast<int>(r)];
}

inline RoleCode role_from_name(const std::string& s) {
    for (int i = 0; i < kRoleCount; ++i) {
        if (s == role_name(static_cast<RoleCode>(i))) return static_cast<RoleCode>(i);
    }
    throw Error(Errc::ParseError, "unknown role '" + s + "'");
}

enum class OperationKind : std::uint8_t { Read, Write, Update };

inline constexpr int kOperationCount = 3;

// Read never mutates object state; Write and Update do.
inline bool is_mutating(OperationKind op) { return op != OperationKind::Read; }

inline const char* operation_name(OperationKind op) {
    static const char* names[] = {"Read", "Write", "Update"};
    return names[static_cast<int>(op)];
}

inline OperationKind operation_from_name(const std::string& s) {
    for (int i = 0; i < kOperationCount; ++i) {
        if (s == operation_name(static_cast<OperationKind>(i))) return static_cast<OperationKind>(i);
    }
    throw Error(Errc::ParseError, "unknown operation '" + s + "'");
}

// A role-qualified user identifier, the element type of a consent's user set.
struct UserRef {
    RoleCode role = RoleCode::DOC;
    std::string user_id;

    auto operator<=>(const UserRef&) const = default;

    std::string str() const { return std::string(role_name(role)) + ":" + user_id; }
};

} // namespace consentchain
