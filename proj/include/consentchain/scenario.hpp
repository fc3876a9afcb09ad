#pragma once

// consentchain/scenario.hpp — scenario file execution.
//
// A scenario is a JSON document driving a fresh engine: chain overrides,
// catalog/matrix fixture paths, required roles, and an ordered step list.
// Every step carries a logical clock value, so two runs of the same file
// produce byte-identical machine transcripts. `expect` steps check a prior
// step's outcome; the run exits 0 only when every expectation holds.
//
// Step kinds: create_ppa, create_consent, alter, terminate, sweep, request,
// seal, query, expect. Steps may reference consent ids minted by earlier
// steps via {"ref": "<step id>"} (plus "index" for PPA deployments).

#include <json.hpp>

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "consentchain/authorize.hpp"
#include "consentchain/engine.hpp"
#include "consentchain/provenance.hpp"

namespace consentchain {

struct StepResult {
    std::string step_id;
    std::string op;
    bool ok = true;
    std::string error_code;    // Errc name when !ok
    std::string error_detail;
    std::vector<std::string> consent_ids;       // minted / swept ids
    std::optional<DecisionSummary> decision;    // request steps
    json extra;                                  // query rows, tx ids, ...
};

struct ScenarioOutcome {
    int exit_code = 0; // 0 pass, 1 expectation failed, 2 parse error
    std::string transcript;        // human-readable
    std::string machine_transcript; // one JSON object per line
    std::vector<std::string> failures;
};

class ScenarioRunner {
public:
    ScenarioRunner(json doc, std::string fixture_dir)
        : doc_(std::move(doc)), fixture_dir_(std::move(fixture_dir)) {}

    static json load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(Errc::ParseError, "cannot open scenario " + path);
        try {
            return json::parse(in);
        } catch (const json::exception& e) {
            throw Error(Errc::ParseError, path + ": " + e.what());
        }
    }

    ScenarioOutcome run() {
        ScenarioOutcome out;
        std::ostringstream human, machine;
        try {
            setup();
        } catch (const std::exception& e) {
            out.exit_code = 2;
            out.transcript = std::string("parse error: ") + e.what() + "\n";
            out.machine_transcript = json{{"error", e.what()}, {"status", "parse_error"}}.dump() + "\n";
            return out;
        }

        const auto& steps = doc_.value("steps", json::array());
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const json& step = steps[i];
            StepResult r;
            try {
                r = run_step(step, i);
            } catch (const Error& e) {
                // Scenario structure problems (bad refs, missing fields).
                out.exit_code = 2;
                const std::string msg = "step " + step.value("id", std::to_string(i)) + ": " + e.what();
                human << "parse error: " << msg << "\n";
                machine << json{{"error", msg}, {"status", "parse_error"}}.dump() << "\n";
                out.transcript = human.str();
                out.machine_transcript = machine.str();
                return out;
            }
            results_[r.step_id] = r;
            emit(human, machine, r);
            if (r.op == "expect" && !r.ok) {
                out.failures.push_back(r.step_id + ": " + r.error_detail);
            }
        }

        out.exit_code = out.failures.empty() ? 0 : 1;
        human << (out.failures.empty() ? "all expectations passed\n"
                                       : std::to_string(out.failures.size()) + " expectation(s) failed\n");
        out.transcript = human.str();
        out.machine_transcript = machine.str();
        return out;
    }

    ConsentEngine& engine() { return *engine_; }

private:
    std::string resolve_path(const std::string& p) const {
        std::ifstream probe(p);
        if (probe) return p;
        return fixture_dir_.empty() ? p : fixture_dir_ + "/" + p;
    }

    void setup() {
        ChainConfig cfg;
        if (doc_.contains("chain")) cfg = ChainConfig::from_json(doc_.at("chain"));
        ConsentEngine::Options opts;
        opts.chain = cfg;
        if (doc_.contains("required_roles")) {
            opts.required_roles.clear();
            for (const auto& r : doc_.at("required_roles")) {
                opts.required_roles.insert(role_from_name(r.get<std::string>()));
            }
        }
        PhiCatalog catalog = PhiCatalog::load(resolve_path(doc_.value("catalog", "data/phi_catalog.json")));
        PermissionMatrix matrix =
            PermissionMatrix::load(resolve_path(doc_.value("matrix", "data/permission_matrix.json")));
        engine_ = std::make_unique<ConsentEngine>(std::move(catalog), std::move(matrix), std::move(opts));
        authz_ = std::make_unique<AuthorizationModule>(*engine_);
    }

    LogicalTime step_time(const json& step) {
        if (step.contains("at")) last_at_ = CivilDateTime::parse(step.at("at").get<std::string>());
        return last_at_.epoch_ms();
    }

    // Resolve a consent id: literal "consent_id"/"old_id", or a back
    // reference {"ref": "<step>", "index": n}.
    std::string resolve_consent(const json& step, const char* literal_key) {
        if (step.contains(literal_key)) return step.at(literal_key).get<std::string>();
        if (step.contains("ref")) {
            const std::string ref = step.at("ref").get<std::string>();
            auto it = results_.find(ref);
            if (it == results_.end()) {
                throw Error(Errc::ParseError, "reference to unknown step '" + ref + "'");
            }
            const auto& ids = it->second.consent_ids;
            std::size_t index = step.value("index", 0u);
            if (index >= ids.size()) {
                throw Error(Errc::ParseError, "step '" + ref + "' minted no consent #" + std::to_string(index));
            }
            return ids[index];
        }
        throw Error(Errc::ParseError, std::string("step needs '") + literal_key + "' or 'ref'");
    }

    StepResult run_step(const json& step, std::size_t index) {
        StepResult r;
        r.step_id = step.value("id", "step" + std::to_string(index));
        r.op = step.at("op").get<std::string>();

        if (r.op == "expect") return run_expect(step, r);

        const LogicalTime at = step_time(step);
        try {
            if (r.op == "create_ppa") {
                Ppa ppa = ppa_from_json(step.at("ppa"));
                PpaIntegrity integrity = engine_->create_ppa(ppa, at);
                r.consent_ids = engine_->deploy_consents(ppa.ppa_id, at);
                r.extra = json{{"h_ppa", integrity.h_ppa.hex()}, {"ppa_id", ppa.ppa_id}};
            } else if (r.op == "create_consent") {
                InformedConsent ic = consent_from_json(step.at("consent"));
                const std::string patient = step.value("patient", ic.patient_id);
                r.consent_ids = {engine_->create_consent(patient, std::move(ic), at)};
            } else if (r.op == "alter") {
                const std::string old_id = resolve_consent(step, "old_id");
                InformedConsent next = consent_from_json(step.at("consent"));
                r.consent_ids = {engine_->alter_consent(old_id, std::move(next), at)};
                r.extra = json{{"old_id", old_id}};
            } else if (r.op == "terminate") {
                const std::string id = resolve_consent(step, "consent_id");
                engine_->terminate_consent(id, at);
                r.consent_ids = {id};
            } else if (r.op == "sweep") {
                r.consent_ids = engine_->expire_sweep(last_at_);
            } else if (r.op == "seal") {
                const Block& b = engine_->seal(at);
                r.extra = json{{"height", b.height}, {"transactions", b.transactions.size()}};
            } else if (r.op == "request") {
                AccessRequest req;
                req.request_id = r.step_id;
                req.subject = {role_from_name(step.at("role").get<std::string>()),
                               step.at("user").get<std::string>()};
                req.patient_id = step.at("patient").get<std::string>();
                req.phi_id = step.at("phi").get<std::string>();
                req.operation = operation_from_name(step.at("operation").get<std::string>());
                req.context.timestamp = last_at_;
                if (step.contains("zone")) req.context.zone = step.at("zone").get<std::string>();
                if (step.contains("source")) req.context.source_address = step.at("source").get<std::string>();
                AccessDecision d = authz_->authorize(req);
                r.decision = summarize(d);
                if (d.matched_consent) r.consent_ids = {*d.matched_consent};
            } else if (r.op == "query") {
                OrientationQuery q;
                q.orientation = orientation_from_name(step.at("orientation").get<std::string>());
                q.key = step.at("key").get<std::string>();
                q.mode = step.value("mode", "Given") == "Executed" ? QueryMode::Executed : QueryMode::Given;
                ProvenanceGraph g;
                g.ingest(engine_->chain().events());
                auto rows = json::array();
                for (const ReportRow& row : g.query(q)) rows.push_back(row.to_json());
                r.extra = json{{"rows", rows}};
            } else {
                throw Error(Errc::ParseError, "unknown step op '" + r.op + "'");
            }
        } catch (const Error& e) {
            if (e.code() == Errc::ParseError) throw;
            r.ok = false;
            r.error_code = errc_name(e.code());
            r.error_detail = e.what();
        }
        return r;
    }

    StepResult run_expect(const json& step, StepResult r) {
        const std::string target = step.at("target").get<std::string>();
        auto it = results_.find(target);
        if (it == results_.end()) {
            throw Error(Errc::ParseError, "expect targets unknown step '" + target + "'");
        }
        const StepResult& t = it->second;
        std::vector<std::string> problems;

        if (step.contains("outcome")) {
            const std::string want = step.at("outcome").get<std::string>();
            std::string got;
            if (t.decision) {
                got = t.decision->outcome;
            } else {
                got = t.ok ? "ok" : "error";
            }
            if (want != got) problems.push_back("outcome: want " + want + ", got " + got);
        }
        if (step.contains("error")) {
            const std::string want = step.at("error").get<std::string>();
            if (t.ok) {
                problems.push_back("error: want " + want + ", step succeeded");
            } else if (t.error_code != want) {
                problems.push_back("error: want " + want + ", got " + t.error_code);
            }
        }
        if (step.contains("reason")) {
            const std::string want = step.at("reason").get<std::string>();
            bool found = false;
            if (t.decision) {
                for (const auto& reason : t.decision->reasons) {
                    if (reason_code_name(reason.code) == want) found = true;
                }
            }
            if (!found) problems.push_back("reason " + want + " absent");
        }
        if (step.contains("matched")) {
            const std::string want = step.at("matched").get<std::string>();
            const std::string got = t.decision ? t.decision->consent_id : "";
            if (want != got) problems.push_back("matched: want " + want + ", got " + got);
        }
        if (step.contains("swept")) {
            const std::size_t want = step.at("swept").get<std::size_t>();
            if (t.consent_ids.size() != want) {
                problems.push_back("swept: want " + std::to_string(want) + ", got " +
                                   std::to_string(t.consent_ids.size()));
            }
        }
        if (step.contains("event_count")) {
            const json& spec = step.at("event_count");
            EventFilter f;
            if (spec.contains("kind")) f.kind = event_kind_from_name(spec.at("kind").get<std::string>());
            if (spec.contains("patient")) f.patient_id = spec.at("patient").get<std::string>();
            if (spec.contains("consent")) f.consent_id = spec.at("consent").get<std::string>();
            const std::size_t want = spec.at("equals").get<std::size_t>();
            const std::size_t got = engine_->chain().count_events(f);
            if (want != got) {
                problems.push_back("event_count: want " + std::to_string(want) + ", got " +
                                   std::to_string(got));
            }
        }
        if (step.contains("rows")) {
            const std::size_t want = step.at("rows").get<std::size_t>();
            const std::size_t got = t.extra.contains("rows") ? t.extra.at("rows").size() : 0;
            if (want != got) {
                problems.push_back("rows: want " + std::to_string(want) + ", got " + std::to_string(got));
            }
        }

        if (!problems.empty()) {
            r.ok = false;
            r.error_code = "ExpectationFailed";
            std::string joined;
            for (const auto& p : problems) {
                if (!joined.empty()) joined += "; ";
                joined += p;
            }
            r.error_detail = "target " + target + ": " + joined;
        }
        r.extra = json{{"target", target}};
        return r;
    }

    void emit(std::ostringstream& human, std::ostringstream& machine, const StepResult& r) {
        json line{{"op", r.op}, {"step", r.step_id}};
        line["status"] = r.ok ? "ok" : (r.error_code.empty() ? "failed" : r.error_code);
        if (!r.consent_ids.empty()) line["consents"] = r.consent_ids;
        if (r.decision) {
            auto reasons = json::array();
            for (const auto& reason : r.decision->reasons) reasons.push_back(reason.str());
            line["decision"] = json{{"consent_id", r.decision->consent_id},
                                    {"outcome", r.decision->outcome},
                                    {"reasons", reasons}};
        }
        if (!r.extra.is_null()) line["detail"] = r.extra;
        if (!r.ok && !r.error_detail.empty()) line["error"] = r.error_detail;
        machine << line.dump() << "\n";

        human << r.step_id << " " << r.op << ": ";
        if (r.op == "request" && r.decision) {
            human << r.decision->outcome;
            if (!r.decision->consent_id.empty()) human << " via " << r.decision->consent_id;
            if (!r.decision->reasons.empty()) {
                human << " [";
                for (std::size_t i = 0; i < r.decision->reasons.size(); ++i) {
                    if (i) human << ", ";
                    human << r.decision->reasons[i].str();
                }
                human << "]";
            }
        } else if (r.ok) {
            human << "ok";
            if (!r.consent_ids.empty()) {
                human << " (";
                for (std::size_t i = 0; i < r.consent_ids.size(); ++i) {
                    if (i) human << ", ";
                    human << r.consent_ids[i];
                }
                human << ")";
            }
        } else {
            human << (r.error_code.empty() ? "failed" : r.error_code);
            if (!r.error_detail.empty()) human << " — " << r.error_detail;
        }
        human << "\n";
    }

    json doc_;
    std::string fixture_dir_;
    std::unique_ptr<ConsentEngine> engine_;
    std::unique_ptr<AuthorizationModule> authz_;
    std::map<std::string, StepResult> results_;
    CivilDateTime last_at_ = CivilDateTime::parse("1970-01-01T00:00");
};

} // namespace consentchain
