#pragma once

// consentchain/errors.hpp — machine-readable error taxonomy shared by all modules.

#include <stdexcept>
#include <string>

namespace consentchain {

enum class Errc {
    // domain / conditions
    MissingContextField,
    UnknownPhi,
    // ledger
    DuplicateTxId,
    UnknownTarget,
    NotYetDue,
    // ppa / contract
    IncompletePpa,
    PpaConflict,
    DuplicatePpaId,
    UnknownPpa,
    TamperedPpa,
    ValidationFailed,
    ConsentConflict,
    UnknownConsent,
    // authorization
    UnknownPatient,
    // provenance
    MalformedEvent,
    UnknownKey,
    // scenario / io
    ParseError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::MissingContextField: return "MissingContextField";
        case Errc::UnknownPhi: return "UnknownPhi";
        case Errc::DuplicateTxId: return "DuplicateTxId";
        case Errc::UnknownTarget: return "UnknownTarget";
        case Errc::NotYetDue: return "NotYetDue";
        case Errc::IncompletePpa: return "IncompletePpa";
        case Errc::PpaConflict: return "PpaConflict";
        case Errc::DuplicatePpaId: return "DuplicatePpaId";
        case Errc::UnknownPpa: return "UnknownPpa";
        case Errc::TamperedPpa: return "TamperedPpa";
        case Errc::ValidationFailed: return "ValidationFailed";
        case Errc::ConsentConflict: return "ConsentConflict";
        case Errc::UnknownConsent: return "UnknownConsent";
        case Errc::UnknownPatient: return "UnknownPatient";
        case Errc::MalformedEvent: return "MalformedEvent";
        case Errc::UnknownKey: return "UnknownKey";
        case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

} // namespace consentchain
