#pragma once

// consentchain/authorize.hpp — the authorization module: resolves an access
// request against the patient's active consents, evaluates every attached
// condition against the request context and ledger-derived use counts, and
// logs the decision on chain.
//
// The module owns no mutable state; everything it reads lives in the ledger
// and the consent containers, so an instance can be recreated from chain data
// at any time. Decision logging is synchronous-submit, asynchronous-seal:
// the decision returns before its event is sealed, and frequency counting
// sees sealed events only.

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "consentchain/engine.hpp"

namespace consentchain {

struct AccessRequest {
    std::string request_id;
    UserRef subject;
    std::string patient_id;
    std::string phi_id;
    OperationKind operation = OperationKind::Read;
    RequestContext context;
};

enum class ReasonCode : std::uint8_t {
    NoConsent,
    ConditionViolated,
    FrequencyExhausted,
    ConsentArchived,
    MatrixViolation,
};

inline const char* reason_code_name(ReasonCode c) {
    static const char* names[] = {"NoConsent", "ConditionViolated", "FrequencyExhausted",
                                  "ConsentArchived", "MatrixViolation"};
    return names[static_cast<int>(c)];
}

inline ReasonCode reason_code_from_name(const std::string& s) {
    for (int i = 0; i < 5; ++i) {
        if (s == reason_code_name(static_cast<ReasonCode>(i))) return static_cast<ReasonCode>(i);
    }
    throw Error(Errc::ParseError, "unknown reason code '" + s + "'");
}

struct DenyReason {
    ReasonCode code;
    std::string detail; // condition rendering / implicated consent id

    bool operator==(const DenyReason&) const = default;

    std::string str() const {
        return detail.empty() ? reason_code_name(code)
                              : std::string(reason_code_name(code)) + "(" + detail + ")";
    }
};

enum class DecisionOutcome : std::uint8_t { Grant, Deny };

struct AccessDecision {
    std::string request_id;
    DecisionOutcome outcome = DecisionOutcome::Deny;
    std::optional<std::string> matched_consent;
    std::vector<DenyReason> reasons; // empty exactly when Grant
    CivilDateTime decided_at;
    Digest logged_tx;

    bool granted() const { return outcome == DecisionOutcome::Grant; }
};

// What the on-chain decision log preserves; replayable bit-for-bit.
struct DecisionSummary {
    std::string request_id;
    std::string outcome; // "Grant" | "Deny"
    std::string consent_id; // empty when none matched
    std::vector<DenyReason> reasons;
    std::string decided_at;

    bool operator==(const DecisionSummary&) const = default;

    // One line per decision, stable field order, for diffing in tests.
    std::string line() const {
        std::string out = decided_at + " " + request_id + " " + outcome;
        if (!consent_id.empty()) out += " consent=" + consent_id;
        for (const auto& r : reasons) out += " " + r.str();
        return out;
    }
};

inline DecisionSummary summarize(const AccessDecision& d) {
    DecisionSummary s;
    s.request_id = d.request_id;
    s.outcome = d.granted() ? "Grant" : "Deny";
    s.consent_id = d.matched_consent.value_or("");
    s.reasons = d.reasons;
    s.decided_at = d.decided_at.str();
    return s;
}

class AuthorizationModule {
public:
    explicit AuthorizationModule(ConsentEngine& engine) : engine_(engine) {}

    // Organizational/regulatory policy gate consulted before consent lookup;
    // the default permits everything.
    using PolicyHook = std::function<bool(const AccessRequest&)>;
    void set_policy_hook(PolicyHook hook) { policy_ = std::move(hook); }

    // Grant on the first active consent (ascending consent_id) covering the
    // (subject, object, operation) triple with every condition satisfied;
    // Deny with aggregated reasons otherwise. Runs the expiry sweep first and
    // always submits a decision event, grant or deny.
    AccessDecision authorize(const AccessRequest& req) {
        if (!engine_.catalog().contains(req.phi_id)) {
            throw Error(Errc::UnknownPhi, req.phi_id);
        }
        const ConsentContainer* container = engine_.find_container(req.patient_id);
        if (!container) {
            throw Error(Errc::UnknownPatient, req.patient_id);
        }

        // Bring the ledger current: seal pending decision logs and let the
        // block finalizer archive terminally expired consents.
        if (engine_.chain().pending_count() > 0 || engine_.has_sweepable(req.context.timestamp)) {
            engine_.seal(req.context.timestamp.epoch_ms());
        }

        AccessDecision decision;
        decision.request_id = req.request_id;
        decision.decided_at = req.context.timestamp;

        if (policy_ && !policy_(req)) {
            decision.reasons.push_back({ReasonCode::MatrixViolation, "organizational policy"});
            log_decision(req, decision, {});
            return decision;
        }

        bool had_candidate = false;
        std::vector<std::string> candidates;
        for (const auto& [id, ic] : container->repository) {
            if (!ic.covers(req.subject, req.phi_id, req.operation)) continue;
            had_candidate = true;
            candidates.push_back(id);
            RequestContext ctx = req.context;
            ctx.prior_use_count = engine_.grant_count(id);
            bool all_ok = true;
            std::vector<DenyReason> local;
            for (const Condition& cond : ic.conditions) {
                ConditionOutcome out = evaluate_condition(cond, ctx);
                if (out.satisfied()) continue;
                all_ok = false;
                if (out.status == ConditionStatus::Exhausted) {
                    local.push_back({ReasonCode::FrequencyExhausted, id});
                } else {
                    local.push_back({ReasonCode::ConditionViolated, condition_str(cond)});
                }
            }
            if (all_ok) {
                decision.outcome = DecisionOutcome::Grant;
                decision.matched_consent = id;
                decision.reasons.clear();
                break;
            }
            decision.reasons.insert(decision.reasons.end(), local.begin(), local.end());
        }

        if (!decision.granted() && !had_candidate) {
            // No active cover; report archived covers distinctly so a consent
            // that expired on its fifth use still denies as FrequencyExhausted.
            bool had_archived = false;
            for (const auto& [id, entry] : container->archive) {
                if (!entry.consent.covers(req.subject, req.phi_id, req.operation)) continue;
                had_archived = true;
                candidates.push_back(id);
                const bool freq_expired = entry.reason.cause == ArchiveCause::Expired &&
                                          entry.reason.violated &&
                                          std::holds_alternative<AccessFrequency>(*entry.reason.violated);
                decision.reasons.push_back(freq_expired
                                               ? DenyReason{ReasonCode::FrequencyExhausted, id}
                                               : DenyReason{ReasonCode::ConsentArchived, id});
            }
            if (!had_archived) {
                decision.reasons.push_back({ReasonCode::NoConsent, ""});
            }
        }

        log_decision(req, decision, candidates);
        return decision;
    }

    // Sealed AccessGranted events for the consent; the frequency operand.
    std::uint32_t use_count(const std::string& consent_id) const { return engine_.use_count(consent_id); }

    // Reconstructs every historical decision for a patient purely from the
    // sealed event stream, in block order.
    std::vector<DecisionSummary> replay_decisions(const std::string& patient_id) const {
        std::vector<DecisionSummary> out;
        EventFilter filter;
        filter.patient_id = patient_id;
        for (const EventRecord& ev : engine_.chain().events(filter)) {
            if (ev.kind != EventKind::AccessGranted && ev.kind != EventKind::AccessDenied) continue;
            DecisionSummary s;
            s.request_id = ev.payload_str("request_id");
            s.outcome = ev.payload_str("outcome");
            s.consent_id = ev.payload_str("consent_id");
            s.decided_at = ev.payload_str("decided_at");
            for (const auto& r : ev.payload.at("reasons")) {
                s.reasons.push_back({reason_code_from_name(r.at("code").get<std::string>()),
                                     r.value("detail", "")});
            }
            out.push_back(std::move(s));
        }
        return out;
    }

private:
    void log_decision(const AccessRequest& req, AccessDecision& decision,
                      const std::vector<std::string>& candidates) {
        auto reasons = json::array();
        for (const auto& r : decision.reasons) {
            json jr{{"code", reason_code_name(r.code)}};
            if (!r.detail.empty()) jr["detail"] = r.detail;
            reasons.push_back(std::move(jr));
        }
        json payload{{"candidates", candidates},
                     {"consent_id", decision.matched_consent.value_or("")},
                     {"decided_at", decision.decided_at.str()},
                     {"operation", operation_name(req.operation)},
                     {"outcome", decision.granted() ? "Grant" : "Deny"},
                     {"patient_id", req.patient_id},
                     {"phi_id", req.phi_id},
                     {"reasons", reasons},
                     {"request_id", req.request_id},
                     {"role", role_name(req.subject.role)},
                     {"user", req.subject.user_id}};
        decision.logged_tx = engine_.submit_decision_log(std::move(payload), decision.granted(),
                                                         req.context.timestamp.epoch_ms());
    }

    ConsentEngine& engine_;
    PolicyHook policy_;
};

} // namespace consentchain
