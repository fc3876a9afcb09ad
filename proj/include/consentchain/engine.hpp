#pragma once

// consentchain/engine.hpp — the consent container contract hosted on the
// embedded ledger: PPA registry with on-chain integrity anchoring, consent
// deployment, and the administration operations (create, alter, terminate,
// expire, archive) with conflict detection.
//
// Call shape: every administration operation pre-validates against sealed
// state, then submits a transaction and seals it immediately, so mutations
// apply serially in block order and errors leave state untouched. Access
// decision logging is the one asynchronous path: its transaction stays in
// the pool until the next seal.
//
// Expiry sweeps run automatically at the end of every sealed block (via the
// ledger's block finalizer) and before every authorization, bounding the
// staleness of calendar/frequency expiry to one block.

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "consentchain/catalog.hpp"
#include "consentchain/consent.hpp"
#include "consentchain/container.hpp"
#include "consentchain/ledger.hpp"

namespace consentchain {

// Account the consent contract lives at, and the trusted caller identities.
inline constexpr const char* kContractAccount = "consent-contract";
inline constexpr const char* kSystemSender = "system";
inline constexpr const char* kAuthzSender = "authorization-module";
inline constexpr const char* kScduSender = "scdu";

enum class IntegrityStatus : std::uint8_t { Intact, Tampered };

struct PpaRegistryEntry {
    std::string ppa_id;
    std::string patient_id;
    Digest h_ppa;
    LogicalTime stored_at = 0;
};

struct PatientProfile {
    std::string patient_id;
    std::vector<std::string> ppa_ids;
    std::vector<std::string> consent_ids;
};

class ConsentEngine {
public:
    struct Options {
        ChainConfig chain;
        std::set<RoleCode> required_roles = {RoleCode::DOC, RoleCode::NRS};
    };

    ConsentEngine(PhiCatalog catalog, PermissionMatrix matrix, Options opts)
        : catalog_(std::move(catalog)),
          matrix_(std::move(matrix)),
          opts_(std::move(opts)),
          chain_(opts_.chain) {
        wire_contract();
    }

    ConsentEngine(PhiCatalog catalog, PermissionMatrix matrix)
        : ConsentEngine(std::move(catalog), std::move(matrix), Options()) {}

    // The chain's contract handler captures `this`.
    ConsentEngine(const ConsentEngine&) = delete;
    ConsentEngine& operator=(const ConsentEngine&) = delete;
    ConsentEngine(ConsentEngine&&) = delete;
    ConsentEngine& operator=(ConsentEngine&&) = delete;

    // ------------------------------------------------------------------
    // PPA registry
    // ------------------------------------------------------------------

    // Validates completeness and conflict-freedom of the embedded consents,
    // stores the agreement in the local registry store, and anchors the
    // composite digest on chain.
    PpaIntegrity create_ppa(const Ppa& ppa, LogicalTime at) {
        if (!ppa.complete()) {
            throw Error(Errc::IncompletePpa, "PPA " + ppa.ppa_id + " cannot be created");
        }
        if (ppa_store_.count(ppa.ppa_id) || registry_.count(ppa.ppa_id)) {
            throw Error(Errc::DuplicatePpaId, ppa.ppa_id);
        }
        for (const auto& ic : ppa.icc) {
            auto findings = validate_consent(ic, catalog_, matrix_);
            if (!findings.empty()) {
                throw Error(Errc::PpaConflict, "PPA revision required: " + findings_str(findings));
            }
        }
        std::vector<const InformedConsent*> batch;
        for (const auto& ic : ppa.icc) batch.push_back(&ic);
        ConflictReport report = detect_conflicts(batch, roles_for(ppa.patient_id), catalog_, matrix_);
        if (!report.empty()) {
            throw Error(Errc::PpaConflict, "PPA revision required: " + report.str());
        }

        PpaIntegrity integrity = hash_ppa(ppa);
        ppa_store_.emplace(ppa.ppa_id, ppa);
        profiles_[ppa.patient_id].patient_id = ppa.patient_id;
        profiles_[ppa.patient_id].ppa_ids.push_back(ppa.ppa_id);

        json args{{"h_ppa", integrity.h_ppa.hex()}, {"patient_id", ppa.patient_id}, {"ppa_id", ppa.ppa_id}};
        try {
            run_tx(kScduSender, "ppa.store_integrity", args, at);
        } catch (...) {
            ppa_store_.erase(ppa.ppa_id);
            profiles_[ppa.patient_id].ppa_ids.pop_back();
            throw;
        }
        return integrity;
    }

    // Recomputes the composite digest of `current` and compares it with the
    // digest anchored on chain. Gas-free read.
    IntegrityStatus verify_ppa_integrity(const std::string& ppa_id, const Ppa& current) const {
        auto it = registry_.find(ppa_id);
        if (it == registry_.end()) throw Error(Errc::UnknownPpa, ppa_id);
        return hash_ppa(current).h_ppa == it->second.h_ppa ? IntegrityStatus::Intact
                                                           : IntegrityStatus::Tampered;
    }

    // Writes every embedded consent of an intact PPA into the patient's
    // container, one transaction per consent, creating the container first
    // if the patient has none.
    std::vector<std::string> deploy_consents(const std::string& ppa_id, LogicalTime at) {
        auto stored = ppa_store_.find(ppa_id);
        if (stored == ppa_store_.end() || !registry_.count(ppa_id)) {
            throw Error(Errc::UnknownPpa, ppa_id);
        }
        const Ppa& ppa = stored->second;
        if (verify_ppa_integrity(ppa_id, ppa) != IntegrityStatus::Intact) {
            throw Error(Errc::TamperedPpa, "stored copy of " + ppa_id + " no longer matches on-chain digest");
        }

        // Admission of the whole batch against the live repository.
        std::vector<InformedConsent> staged;
        staged.reserve(ppa.icc.size());
        for (const auto& ic : ppa.icc) {
            InformedConsent copy = ic;
            copy.patient_id = ppa.patient_id;
            copy.consent_id = peek_consent_id(staged.size());
            copy.status = ConsentStatus::active();
            staged.push_back(std::move(copy));
        }
        std::vector<const InformedConsent*> proposed;
        if (const ConsentContainer* c = find_container(ppa.patient_id)) {
            for (const auto& [id, ic] : c->repository) proposed.push_back(&ic);
        }
        for (const auto& ic : staged) proposed.push_back(&ic);
        ConflictReport report = detect_conflicts(proposed, roles_for(ppa.patient_id), catalog_, matrix_);
        if (!report.empty()) {
            throw Error(Errc::ConsentConflict, report.str());
        }

        ensure_container_tx(ppa.patient_id, at);
        std::vector<std::string> ids;
        std::vector<Digest> tx_ids;
        for (auto& ic : staged) {
            ic.consent_id = next_consent_id();
            ids.push_back(ic.consent_id);
            tx_ids.push_back(
                submit_tx(kScduSender, "consent.create", json{{"consent", consent_to_json(ic)}}, at).tx_id);
        }
        seal(at);
        for (const Digest& tid : tx_ids) {
            const Receipt& r = chain_.receipt(tid);
            if (r.status == TxStatus::Failed) {
                throw Error(Errc::ConsentConflict, "deployment execution failed: " + r.error);
            }
        }
        return ids;
    }

    // The stored agreement document (tamper-check target for tests and the
    // integrity-verification CLI path).
    const Ppa& stored_ppa(const std::string& ppa_id) const {
        auto it = ppa_store_.find(ppa_id);
        if (it == ppa_store_.end()) throw Error(Errc::UnknownPpa, ppa_id);
        return it->second;
    }

    Ppa& stored_ppa_mut(const std::string& ppa_id) {
        auto it = ppa_store_.find(ppa_id);
        if (it == ppa_store_.end()) throw Error(Errc::UnknownPpa, ppa_id);
        return it->second;
    }

    const std::map<std::string, PpaRegistryEntry>& registry() const { return registry_; }

    // ------------------------------------------------------------------
    // Consent administration
    // ------------------------------------------------------------------

    std::string create_consent(const std::string& patient_id, InformedConsent ic, LogicalTime at) {
        ic.patient_id = patient_id;
        ic.status = ConsentStatus::active();
        auto findings = validate_consent(ic, catalog_, matrix_);
        if (!findings.empty()) {
            throw Error(Errc::ValidationFailed, findings_str(findings));
        }
        std::vector<const InformedConsent*> proposed;
        if (const ConsentContainer* c = find_container(patient_id)) {
            for (const auto& [id, cur] : c->repository) proposed.push_back(&cur);
        }
        ic.consent_id = peek_consent_id(0);
        proposed.push_back(&ic);
        ConflictReport report = detect_conflicts(proposed, roles_for(patient_id), catalog_, matrix_);
        if (!report.empty()) {
            throw Error(Errc::ConsentConflict, "must be modified and tested to be added: " + report.str());
        }
        ensure_container_tx(patient_id, at);
        ic.consent_id = next_consent_id();
        run_tx(patient_id, "consent.create", json{{"consent", consent_to_json(ic)}}, at);
        return ic.consent_id;
    }

    // Two-stage check per the alteration algorithm: the repository must stay
    // conflict-free both after removing the old consent and after inserting
    // the replacement. All-or-nothing; the old consent archives as Altered.
    std::string alter_consent(const std::string& old_id, InformedConsent next, LogicalTime at) {
        ConsentContainer& c = container_of_active(old_id);
        next.patient_id = c.patient_id;
        next.status = ConsentStatus::active();
        auto findings = validate_consent(next, catalog_, matrix_);
        if (!findings.empty()) {
            throw Error(Errc::ValidationFailed, findings_str(findings));
        }
        std::vector<const InformedConsent*> without_old;
        for (const auto& [id, cur] : c.repository) {
            if (id != old_id) without_old.push_back(&cur);
        }
        ConflictReport removal = detect_conflicts(without_old, roles_for(c.patient_id), catalog_, matrix_);
        if (!removal.empty()) {
            throw Error(Errc::ConsentConflict, old_id + " cannot be modified: " + removal.str());
        }
        next.consent_id = peek_consent_id(0);
        without_old.push_back(&next);
        ConflictReport insertion = detect_conflicts(without_old, roles_for(c.patient_id), catalog_, matrix_);
        if (!insertion.empty()) {
            throw Error(Errc::ConsentConflict, "replacement conflicts: " + insertion.str());
        }
        next.consent_id = next_consent_id();
        run_tx(c.patient_id, "consent.alter",
               json{{"consent", consent_to_json(next)}, {"old_id", old_id}}, at);
        return next.consent_id;
    }

    void terminate_consent(const std::string& consent_id, LogicalTime at) {
        ConsentContainer& c = container_of_active(consent_id);
        check_removal(c, consent_id, consent_id + " contains conflict on removal");
        run_tx(c.patient_id, "consent.terminate", json{{"consent_id", consent_id}}, at);
    }

    // The shared archival step (also reachable directly): conflict check on
    // removal, then an atomic repository-to-archive move.
    void archive_consent(const std::string& consent_id, ArchiveReason reason, LogicalTime at) {
        ConsentContainer& c = container_of_active(consent_id);
        check_removal(c, consent_id, consent_id + " cannot be removed");
        run_tx(c.patient_id, "consent.archive",
               json{{"consent_id", consent_id}, {"reason", reason.to_json()}}, at);
    }

    // Archives every consent whose terminal conditions (calendar expiry,
    // frequency exhaustion) fail against `now`, provided removal keeps the
    // repository conflict-free. Idempotent: a second immediate sweep is empty.
    std::vector<std::string> expire_sweep(const CivilDateTime& now) {
        const Block& b = seal(now.epoch_ms());
        std::vector<std::string> swept;
        for (const EventRecord& ev : b.events) {
            if (ev.kind == EventKind::ConsentExpired) swept.push_back(ev.payload_str("consent_id"));
        }
        return swept;
    }

    // ------------------------------------------------------------------
    // Views
    // ------------------------------------------------------------------

    Chain& chain() { return chain_; }
    const Chain& chain() const { return chain_; }
    const PhiCatalog& catalog() const { return catalog_; }
    const PermissionMatrix& matrix() const { return matrix_; }
    const Options& options() const { return opts_; }

    const ConsentContainer* find_container(const std::string& patient_id) const {
        auto it = containers_.find(patient_id);
        return it == containers_.end() ? nullptr : &it->second;
    }

    const ConsentContainer& container(const std::string& patient_id) const {
        const ConsentContainer* c = find_container(patient_id);
        if (!c) throw Error(Errc::UnknownPatient, patient_id);
        return *c;
    }

    json export_container(const std::string& patient_id) const { return container(patient_id).to_json(); }

    const std::map<std::string, ConsentContainer>& containers() const { return containers_; }

    const PatientProfile* find_profile(const std::string& patient_id) const {
        auto it = profiles_.find(patient_id);
        return it == profiles_.end() ? nullptr : &it->second;
    }

    std::set<RoleCode> roles_for(const std::string& patient_id) const {
        auto it = required_roles_override_.find(patient_id);
        return it == required_roles_override_.end() ? opts_.required_roles : it->second;
    }

    void set_required_roles(const std::string& patient_id, std::set<RoleCode> roles) {
        required_roles_override_[patient_id] = std::move(roles);
    }

    // Sealed AccessGranted events referencing the consent. Pool entries do
    // not count until their block seals.
    std::uint32_t use_count(const std::string& consent_id) const {
        EventFilter f;
        f.kind = EventKind::AccessGranted;
        f.consent_id = consent_id;
        return static_cast<std::uint32_t>(chain_.count_events(f));
    }

    // Fast path for authorization and the sweep finalizer; tracks executed
    // AccessGranted events and equals use_count() between seals.
    std::uint32_t grant_count(const std::string& consent_id) const {
        auto it = grant_counts_.find(consent_id);
        return it == grant_counts_.end() ? 0 : it->second;
    }

    // Submits a decision-log transaction without sealing; the decision is
    // visible in sealed events only after the next block.
    Digest submit_decision_log(json payload, bool granted, LogicalTime at) {
        payload["granted"] = granted;
        Receipt r = submit_tx(kAuthzSender, "access.log", payload, at);
        return r.tx_id;
    }

    // Seals a block at `at`; the finalizer appends an expiry sweep when due.
    const Block& seal(LogicalTime at) { return chain_.seal_block(at); }

    // True when some active consent is terminally expired at `now` and can be
    // archived without breaking the repository.
    bool has_sweepable(const CivilDateTime& now) const { return !collect_sweepable(now).empty(); }

    // ------------------------------------------------------------------
    // Rebuild from chain data (event fold). The engine carries no state that
    // cannot be reconstructed from sealed events plus the off-chain PPA store.
    // ------------------------------------------------------------------

    // Replaces the chain with restored content and refolds every container,
    // registry entry, profile and use count from its sealed events.
    void adopt_chain(Chain chain) {
        chain_ = std::move(chain);
        containers_.clear();
        registry_.clear();
        ppa_store_.clear();
        profiles_.clear();
        grant_counts_.clear();
        consent_seq_ = 1;
        wire_contract();
        for (const EventRecord& ev : chain_.events()) {
            fold_event(ev);
        }
    }

    // Off-chain agreement documents are not chain data; reattach them after
    // adopt_chain when integrity verification or redeploys are needed.
    void restore_ppa_document(Ppa ppa) { ppa_store_[ppa.ppa_id] = std::move(ppa); }

private:
    // --- helpers -------------------------------------------------------

    static std::string findings_str(const std::vector<ValidationFinding>& findings) {
        std::string out;
        for (const auto& f : findings) {
            if (!out.empty()) out += "; ";
            out += finding_code_name(f.code);
            if (!f.detail.empty()) out += "(" + f.detail + ")";
        }
        return out;
    }

    ConsentContainer& container_of_active(const std::string& consent_id) {
        for (auto& [patient, c] : containers_) {
            if (c.has_active(consent_id)) return c;
        }
        throw Error(Errc::UnknownConsent, consent_id + " does not exist in any repository");
    }

    void check_removal(const ConsentContainer& c, const std::string& consent_id, const std::string& msg) {
        std::vector<const InformedConsent*> without;
        for (const auto& [id, cur] : c.repository) {
            if (id != consent_id) without.push_back(&cur);
        }
        ConflictReport report = detect_conflicts(without, roles_for(c.patient_id), catalog_, matrix_);
        if (!report.empty()) {
            throw Error(Errc::ConsentConflict, msg + ": " + report.str());
        }
    }

    std::string peek_consent_id(std::size_t offset) const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "IC-%06llu", static_cast<unsigned long long>(consent_seq_ + offset));
        return buf;
    }

    std::string next_consent_id() {
        std::string id = peek_consent_id(0);
        ++consent_seq_;
        return id;
    }

    Receipt submit_tx(const std::string& sender, const std::string& method, const json& args,
                      LogicalTime at) {
        const std::string s = args.dump();
        return chain_.submit(sender, kContractAccount, method, Bytes(s.begin(), s.end()), at);
    }

    // Submit-and-seal; administration operations are synchronous. Operations
    // pre-validate, so a failed execution is an engine defect and surfaces.
    Receipt run_tx(const std::string& sender, const std::string& method, const json& args, LogicalTime at) {
        Receipt pending = submit_tx(sender, method, args, at);
        seal(at);
        Receipt r = chain_.receipt(pending.tx_id);
        if (r.status == TxStatus::Failed) {
            throw Error(Errc::ConsentConflict, method + " execution failed: " + r.error);
        }
        return r;
    }

    void ensure_container_tx(const std::string& patient_id, LogicalTime at) {
        if (containers_.count(patient_id)) return;
        submit_tx(kScduSender, "container.create", json{{"patient_id", patient_id}}, at);
    }

    // --- contract execution (runs inside seal_block) --------------------

    void wire_contract() {
        chain_.register_contract(kContractAccount, [this](const Transaction& tx) { return execute(tx); });
        chain_.set_block_finalizer([this](LogicalTime now) { return finalize_block(now); });
    }

    static json parse_args(const Transaction& tx) {
        try {
            return json::parse(std::string(tx.args.begin(), tx.args.end()));
        } catch (const json::exception& e) {
            throw Error(Errc::ParseError, std::string("malformed call args: ") + e.what());
        }
    }

    static std::uint64_t slots_for(const json& doc) {
        const std::string s = doc.dump();
        return (s.size() + 31) / 32;
    }

    ExecutionResult execute(const Transaction& tx) {
        json args = parse_args(tx);
        if (tx.method == "ppa.store_integrity") return exec_store_integrity(args, tx);
        if (tx.method == "container.create") return exec_container_create(args, tx);
        if (tx.method == "consent.create") return exec_consent_create(args, tx);
        if (tx.method == "consent.alter") return exec_consent_alter(args, tx);
        if (tx.method == "consent.terminate") return exec_consent_terminate(args, tx);
        if (tx.method == "consent.archive") return exec_consent_archive(args, tx);
        if (tx.method == "consent.sweep") return exec_sweep(args, tx);
        if (tx.method == "access.log") return exec_access_log(args, tx);
        throw Error(Errc::ParseError, "unknown contract method " + tx.method);
    }

    ExecutionResult exec_store_integrity(const json& args, const Transaction& tx) {
        const std::string ppa_id = args.at("ppa_id").get<std::string>();
        if (registry_.count(ppa_id)) {
            throw Error(Errc::DuplicatePpaId, ppa_id + " integrity already anchored");
        }
        PpaRegistryEntry entry;
        entry.ppa_id = ppa_id;
        entry.patient_id = args.at("patient_id").get<std::string>();
        entry.h_ppa = Digest::from_hex(args.at("h_ppa").get<std::string>());
        entry.stored_at = tx.submitted_at;
        registry_.emplace(ppa_id, std::move(entry));

        ExecutionResult res;
        res.bill.slots_new = 1; // one 32-byte digest slot
        res.events.push_back({EventKind::PpaIntegrityStored, args});
        res.output = json{{"ppa_id", ppa_id}};
        return res;
    }

    ExecutionResult exec_container_create(const json& args, const Transaction&) {
        const std::string patient_id = args.at("patient_id").get<std::string>();
        if (!containers_.count(patient_id)) {
            ConsentContainer c;
            c.patient_id = patient_id;
            containers_.emplace(patient_id, std::move(c));
        }
        ExecutionResult res;
        res.bill.is_deploy = true;
        res.bill.code_size = args.dump().size();
        res.output = json{{"patient_id", patient_id}};
        return res;
    }

    ExecutionResult exec_consent_create(const json& args, const Transaction&) {
        InformedConsent ic = consent_from_json(args.at("consent"));
        ConsentContainer& c = containers_.at(ic.patient_id);
        if (c.has_active(ic.consent_id) || c.has_archived(ic.consent_id)) {
            throw Error(Errc::ConsentConflict, ic.consent_id + " already present");
        }
        json payload = created_payload(ic);
        const std::string id = ic.consent_id;
        const std::string patient = ic.patient_id;
        c.repository.emplace(id, std::move(ic));
        profiles_[patient].patient_id = patient;
        profiles_[patient].consent_ids.push_back(id);

        ExecutionResult res;
        res.bill.slots_new = slots_for(args.at("consent"));
        res.events.push_back({EventKind::ConsentCreated, std::move(payload)});
        res.output = json{{"consent_id", id}};
        return res;
    }

    ExecutionResult exec_consent_alter(const json& args, const Transaction& tx) {
        const std::string old_id = args.at("old_id").get<std::string>();
        InformedConsent next = consent_from_json(args.at("consent"));
        ConsentContainer& c = containers_.at(next.patient_id);
        if (!c.has_active(old_id)) throw Error(Errc::UnknownConsent, old_id);

        ExecutionResult res;
        res.events.push_back({EventKind::ConsentAltered,
                              json{{"consent_id", old_id},
                                   {"patient_id", next.patient_id},
                                   {"replaced_by", next.consent_id}}});
        ArchiveReason reason;
        reason.cause = ArchiveCause::Altered;
        reason.replaced_by = next.consent_id;
        apply_archive(c, old_id, reason, tx, res);

        json payload = created_payload(next);
        const std::string new_id = next.consent_id;
        c.repository.emplace(new_id, std::move(next));
        profiles_[c.patient_id].consent_ids.push_back(new_id);
        res.events.push_back({EventKind::ConsentCreated, std::move(payload)});

        res.bill.slots_new += slots_for(args.at("consent"));
        res.output = json{{"consent_id", new_id}, {"replaces", old_id}};
        return res;
    }

    ExecutionResult exec_consent_terminate(const json& args, const Transaction& tx) {
        const std::string id = args.at("consent_id").get<std::string>();
        ConsentContainer& c = container_of_active(id);
        ExecutionResult res;
        res.events.push_back(
            {EventKind::ConsentTerminated, json{{"consent_id", id}, {"patient_id", c.patient_id}}});
        apply_archive(c, id, ArchiveReason{ArchiveCause::Terminated, "", std::nullopt}, tx, res);
        res.output = json{{"consent_id", id}};
        return res;
    }

    ExecutionResult exec_consent_archive(const json& args, const Transaction& tx) {
        const std::string id = args.at("consent_id").get<std::string>();
        ArchiveReason reason = ArchiveReason::from_json(args.at("reason"));
        ConsentContainer& c = container_of_active(id);
        ExecutionResult res;
        apply_archive(c, id, reason, tx, res);
        res.output = json{{"consent_id", id}};
        return res;
    }

    // Archive step shared by alter/terminate/archive/sweep execution paths.
    void apply_archive(ConsentContainer& c, const std::string& id, const ArchiveReason& reason,
                       const Transaction& tx, ExecutionResult& res) {
        auto it = c.repository.find(id);
        if (it == c.repository.end()) throw Error(Errc::UnknownConsent, id);
        ArchiveEntry entry;
        entry.consent = std::move(it->second);
        entry.consent.status = ConsentStatus::archived_as(reason.cause, tx.submitted_at);
        entry.reason = reason;
        entry.archived_at = tx.submitted_at;
        entry.tx_id = tx.tx_id;
        res.bill.slots_new += slots_for(consent_to_json(entry.consent)); // archive copy
        res.bill.slots_update += 1;                                      // repository index
        res.events.push_back({EventKind::ConsentArchived,
                              json{{"archived_at", entry.archived_at},
                                   {"consent_id", id},
                                   {"patient_id", c.patient_id},
                                   {"reason", reason.to_json()}}});
        c.repository.erase(it);
        c.archive.emplace(id, std::move(entry));
    }

    ExecutionResult exec_sweep(const json& args, const Transaction& tx) {
        const CivilDateTime now = CivilDateTime::parse(args.at("now").get<std::string>());
        ExecutionResult res;
        std::size_t swept = 0;
        for (const auto& [id, violated, patient] : collect_sweepable(now)) {
            ConsentContainer& c = containers_.at(patient);
            if (!c.has_active(id)) continue; // removability may shift as we archive
            std::vector<const InformedConsent*> without;
            for (const auto& [cid, cur] : c.repository) {
                if (cid != id) without.push_back(&cur);
            }
            if (!detect_conflicts(without, roles_for(patient), catalog_, matrix_).empty()) continue;
            res.events.push_back({EventKind::ConsentExpired,
                                  json{{"consent_id", id},
                                       {"patient_id", patient},
                                       {"violated", condition_to_json(violated)}}});
            ArchiveReason reason;
            reason.cause = ArchiveCause::Expired;
            reason.violated = violated;
            apply_archive(c, id, reason, tx, res);
            ++swept;
        }
        res.output = json{{"swept", swept}};
        return res;
    }

    ExecutionResult exec_access_log(const json& args, const Transaction&) {
        const bool granted = args.at("granted").get<bool>();
        json payload = args;
        payload.erase("granted");
        if (granted) {
            grant_counts_[payload.at("consent_id").get<std::string>()]++;
        }
        ExecutionResult res;
        res.events.push_back({granted ? EventKind::AccessGranted : EventKind::AccessDenied,
                              std::move(payload)});
        return res;
    }

    // Terminal consents at `now`: (consent_id, violated condition, patient).
    std::vector<std::tuple<std::string, Condition, std::string>> collect_sweepable(
        const CivilDateTime& now) const {
        std::vector<std::tuple<std::string, Condition, std::string>> out;
        for (const auto& [patient, c] : containers_) {
            for (const auto& [id, ic] : c.repository) {
                for (const Condition& cond : ic.conditions) {
                    if (!condition_is_terminal_kind(cond)) continue;
                    RequestContext ctx;
                    ctx.timestamp = now;
                    ctx.prior_use_count = grant_count(id);
                    if (!evaluate_condition(cond, ctx).satisfied()) {
                        out.emplace_back(id, cond, patient);
                        break;
                    }
                }
            }
        }
        return out;
    }

    // End-of-block hook: appends one sweep call when something is terminally
    // expired and removable at the block timestamp.
    std::vector<SystemCall> finalize_block(LogicalTime now) {
        const CivilDateTime civil = CivilDateTime::from_epoch_ms(now);
        bool removable = false;
        for (const auto& [id, cond, patient] : collect_sweepable(civil)) {
            const ConsentContainer& c = containers_.at(patient);
            std::vector<const InformedConsent*> without;
            for (const auto& [cid, cur] : c.repository) {
                if (cid != id) without.push_back(&cur);
            }
            if (detect_conflicts(without, roles_for(patient), catalog_, matrix_).empty()) {
                removable = true;
                break;
            }
        }
        if (!removable) return {};
        const std::string s = json{{"now", civil.str()}}.dump();
        return {SystemCall{kSystemSender, kContractAccount, "consent.sweep", Bytes(s.begin(), s.end())}};
    }

    json created_payload(const InformedConsent& ic) const {
        json names = json::object();
        for (const auto& phi : ic.objects) names[phi] = catalog_.name_of(phi);
        return json{{"consent", consent_to_json(ic)},
                    {"consent_id", ic.consent_id},
                    {"object_names", names},
                    {"patient_id", ic.patient_id}};
    }

    // --- rebuild fold ----------------------------------------------------

    void fold_event(const EventRecord& ev) {
        switch (ev.kind) {
            case EventKind::PpaIntegrityStored: {
                PpaRegistryEntry entry;
                entry.ppa_id = ev.payload_str("ppa_id");
                entry.patient_id = ev.payload_str("patient_id");
                entry.h_ppa = Digest::from_hex(ev.payload_str("h_ppa"));
                registry_.emplace(entry.ppa_id, entry);
                profiles_[entry.patient_id].patient_id = entry.patient_id;
                profiles_[entry.patient_id].ppa_ids.push_back(entry.ppa_id);
                break;
            }
            case EventKind::ConsentCreated: {
                InformedConsent ic = consent_from_json(ev.payload.at("consent"));
                ConsentContainer& c = containers_[ic.patient_id];
                c.patient_id = ic.patient_id;
                profiles_[ic.patient_id].patient_id = ic.patient_id;
                profiles_[ic.patient_id].consent_ids.push_back(ic.consent_id);
                bump_consent_seq(ic.consent_id);
                c.repository.emplace(ic.consent_id, std::move(ic));
                break;
            }
            case EventKind::ConsentArchived: {
                const std::string id = ev.payload_str("consent_id");
                const std::string patient = ev.payload_str("patient_id");
                ConsentContainer& c = containers_.at(patient);
                auto it = c.repository.find(id);
                if (it == c.repository.end()) {
                    throw Error(Errc::MalformedEvent, "archive of unknown consent " + id);
                }
                ArchiveEntry entry;
                entry.consent = std::move(it->second);
                entry.reason = ArchiveReason::from_json(ev.payload.at("reason"));
                entry.archived_at = ev.payload.at("archived_at").get<LogicalTime>();
                entry.tx_id = ev.tx_id;
                entry.consent.status = ConsentStatus::archived_as(entry.reason.cause, entry.archived_at);
                c.repository.erase(it);
                c.archive.emplace(id, std::move(entry));
                break;
            }
            case EventKind::AccessGranted:
                grant_counts_[ev.payload_str("consent_id")]++;
                break;
            case EventKind::ConsentAltered:
            case EventKind::ConsentTerminated:
            case EventKind::ConsentExpired:
            case EventKind::AccessDenied:
                break; // structural effects arrive via ConsentCreated/Archived
        }
    }

    void bump_consent_seq(const std::string& consent_id) {
        if (consent_id.rfind("IC-", 0) == 0) {
            std::uint64_t n = std::strtoull(consent_id.c_str() + 3, nullptr, 10);
            if (n >= consent_seq_) consent_seq_ = n + 1;
        }
    }

    PhiCatalog catalog_;
    PermissionMatrix matrix_;
    Options opts_;
    Chain chain_;
    std::map<std::string, ConsentContainer> containers_;
    std::map<std::string, PpaRegistryEntry> registry_; // on-chain face of the PPA repository
    std::map<std::string, Ppa> ppa_store_;             // off-chain agreement documents
    std::map<std::string, PatientProfile> profiles_;
    std::map<std::string, std::set<RoleCode>> required_roles_override_;
    std::map<std::string, std::uint32_t> grant_counts_;
    std::uint64_t consent_seq_ = 1;
};

} // namespace consentchain
