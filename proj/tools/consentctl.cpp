// consentctl — command-line front door for the consent engine: scenario
// execution, consent administration, access requests, provenance queries,
// chain inspection, and the benchmark harness.
//
// Engine state persists between invocations as a chain dump file (one JSON
// block per line); containers and counters are refolded from sealed events on
// load. PPA documents live next to the state file under <state>.ppa/.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "consentchain/authorize.hpp"
#include "consentchain/bench.hpp"
#include "consentchain/engine.hpp"
#include "consentchain/provenance.hpp"
#include "consentchain/scenario.hpp"

namespace fs = std::filesystem;
using namespace consentchain;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string state_path;
    std::string config_path;
    std::string profile;
    std::int64_t block_interval_ms = 0; // 0 = take from profile/config
    std::string data_dir;
    std::vector<std::string> required_roles = {"DOC", "NRS"};
    bool machine = false;
};

std::string data_file(const CommonOpts& c, const std::string& name) {
    return (fs::path(c.data_dir) / name).string();
}

// config file first, then flag overrides
ChainConfig load_chain_config(const CommonOpts& c) {
    ChainConfig cfg;
    if (!c.config_path.empty()) {
        std::ifstream in(c.config_path);
        if (!in) throw Error(Errc::ParseError, "cannot open config " + c.config_path);
        cfg = ChainConfig::from_json(json::parse(in));
    }
    if (!c.profile.empty()) cfg = ChainConfig::profile(c.profile);
    if (c.block_interval_ms > 0) cfg.block_interval_ms = c.block_interval_ms;
    return cfg;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, path + ": " + e.what());
    }
}

fs::path ppa_store_dir(const CommonOpts& c) { return fs::path(c.state_path + ".ppa"); }

std::unique_ptr<ConsentEngine> open_engine(const CommonOpts& c) {
    ConsentEngine::Options opts;
    opts.chain = load_chain_config(c);
    opts.required_roles.clear();
    for (const auto& r : c.required_roles) opts.required_roles.insert(role_from_name(r));
    auto engine = std::make_unique<ConsentEngine>(PhiCatalog::load(data_file(c, "phi_catalog.json")),
                                                  PermissionMatrix::load(data_file(c, "permission_matrix.json")),
                                                  std::move(opts));
    if (!c.state_path.empty() && fs::exists(c.state_path)) {
        std::ifstream in(c.state_path);
        std::stringstream buf;
        buf << in.rdbuf();
        engine->adopt_chain(Chain::restore(load_chain_config(c), buf.str()));
        if (fs::exists(ppa_store_dir(c))) {
            for (const auto& entry : fs::directory_iterator(ppa_store_dir(c))) {
                if (entry.path().extension() == ".json") {
                    engine->restore_ppa_document(ppa_from_json(load_json_file(entry.path().string())));
                }
            }
        }
    }
    return engine;
}

void save_engine(const CommonOpts& c, const ConsentEngine& engine) {
    if (c.state_path.empty()) return;
    std::ofstream out(c.state_path, std::ios::trunc);
    out << engine.chain().dump();
}

void save_ppa_document(const CommonOpts& c, const Ppa& ppa) {
    if (c.state_path.empty()) return;
    fs::create_directories(ppa_store_dir(c));
    std::ofstream out(ppa_store_dir(c) / (ppa.ppa_id + ".json"), std::ios::trunc);
    out << ppa_to_json(ppa).dump(2) << "\n";
}

LogicalTime parse_at(const std::string& at) { return CivilDateTime::parse(at).epoch_ms(); }

void emit(const CommonOpts& c, const json& machine_doc, const std::string& human) {
    if (c.machine) {
        std::cout << machine_doc.dump() << "\n";
    } else {
        std::cout << human << "\n";
    }
}

int fail(const CommonOpts& c, const Error& e) {
    if (c.machine) {
        std::cout << json{{"error", errc_name(e.code())}, {"detail", e.what()}}.dump() << "\n";
    } else {
        std::cerr << "error: " << e.what() << "\n";
    }
    return e.code() == Errc::ParseError ? 2 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"consentchain control tool"};
    app.require_subcommand(1);

    CommonOpts common;
    const char* env_dir = std::getenv("CONSENTCHAIN_DATA_DIR");
    common.data_dir = env_dir ? env_dir : "data";
    app.add_option("--state", common.state_path, "chain state file (JSON lines, one block per line)");
    app.add_option("--config", common.config_path, "chain config JSON file");
    app.add_option("--chain-profile", common.profile,
                   "chain profile (polygon-like|optimism-like|arbitrum-like|ethereum-like)");
    app.add_option("--interval-ms", common.block_interval_ms, "block interval override in milliseconds");
    app.add_option("--data-dir", common.data_dir, "fixture directory (catalog, matrix)")
        ->envname("CONSENTCHAIN_DATA_DIR");
    app.add_option("--required-roles", common.required_roles,
                   "roles every repository must keep covered (default DOC NRS)");
    app.add_flag("--machine", common.machine, "machine-readable JSON output");

    // --- run ---------------------------------------------------------
    auto* cmd_run = app.add_subcommand("run", "execute a scenario file");
    std::string scenario_path, out_path, fixture_dir;
    cmd_run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd_run->add_option("--out", out_path, "write transcript to file");
    cmd_run->add_option("--fixture-dir", fixture_dir, "base directory for fixture paths in the scenario");

    // --- bench -------------------------------------------------------
    auto* cmd_bench = app.add_subcommand("bench", "run the gas/latency benchmark");
    BenchOptions bench_opts;
    std::string bench_out;
    std::int64_t bench_interval = 0;
    cmd_bench->add_option("--profile", bench_opts.profiles, "chain profiles");
    cmd_bench->add_option("--counts", bench_opts.counts, "consent counts");
    cmd_bench->add_option("--ops", bench_opts.operations, "operations (create alter terminate expire)");
    cmd_bench->add_option("--block-interval-ms", bench_interval, "override block interval for all profiles");
    cmd_bench->add_flag("--wall-clock", bench_opts.wall_clock, "measure wall-clock latencies");
    cmd_bench->add_option("--out", bench_out, "write CSV to file");

    // --- ppa-create ----------------------------------------------------
    auto* cmd_ppa = app.add_subcommand("ppa-create", "register a PPA, anchor its integrity, deploy consents");
    std::string ppa_path, at_str;
    cmd_ppa->add_option("--ppa", ppa_path, "PPA document JSON")->required();
    cmd_ppa->add_option("--at", at_str, "logical time, YYYY-MM-DDTHH:MM")->required();

    // --- consent administration ----------------------------------------
    auto* cmd_create = app.add_subcommand("consent-create", "add a consent to a patient container");
    std::string consent_path, patient_id, consent_id, old_id;
    cmd_create->add_option("--patient", patient_id, "patient id")->required();
    cmd_create->add_option("--consent", consent_path, "consent JSON file")->required();
    cmd_create->add_option("--at", at_str, "logical time")->required();

    auto* cmd_alter = app.add_subcommand("consent-alter", "replace an active consent");
    cmd_alter->add_option("--old-id", old_id, "consent id to replace")->required();
    cmd_alter->add_option("--consent", consent_path, "replacement consent JSON file")->required();
    cmd_alter->add_option("--at", at_str, "logical time")->required();

    auto* cmd_term = app.add_subcommand("consent-terminate", "withdraw an active consent");
    cmd_term->add_option("--id", consent_id, "consent id")->required();
    cmd_term->add_option("--at", at_str, "logical time")->required();

    auto* cmd_sweep = app.add_subcommand("consent-sweep", "archive terminally expired consents");
    cmd_sweep->add_option("--at", at_str, "logical time")->required();

    // --- request ---------------------------------------------------------
    auto* cmd_request = app.add_subcommand("request", "issue an access request");
    std::string req_user, req_role, req_phi, req_op, req_zone, req_source, req_id = "cli-request";
    cmd_request->add_option("--patient", patient_id)->required();
    cmd_request->add_option("--user", req_user)->required();
    cmd_request->add_option("--role", req_role)->required();
    cmd_request->add_option("--phi", req_phi)->required();
    cmd_request->add_option("--operation", req_op)->required();
    cmd_request->add_option("--at", at_str, "logical time")->required();
    cmd_request->add_option("--zone", req_zone);
    cmd_request->add_option("--source", req_source);
    cmd_request->add_option("--request-id", req_id);

    // --- provenance ------------------------------------------------------
    auto* cmd_pquery = app.add_subcommand("provenance-query", "query the consent provenance graph");
    std::string orientation, key, mode = "Given";
    cmd_pquery->add_option("--orientation", orientation, "UserOriented|ResourceOriented|OperationOriented|ConditionOriented")
        ->required();
    cmd_pquery->add_option("--key", key)->required();
    cmd_pquery->add_option("--mode", mode, "Given|Executed");

    auto* cmd_pexport = app.add_subcommand("provenance-export", "export the provenance graph");
    std::string format = "dot";
    cmd_pexport->add_option("--format", format, "dot|json");
    cmd_pexport->add_option("--out", out_path, "write to file");

    // --- chain -----------------------------------------------------------
    auto* cmd_verify = app.add_subcommand("chain-verify", "recompute all digests and linkage");
    auto* cmd_dump = app.add_subcommand("chain-dump", "print the chain, one block per line");

    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough(); // lets --state/--machine/--data-dir follow the subcommand
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_run) {
            ScenarioRunner runner(ScenarioRunner::load_file(scenario_path), fixture_dir);
            ScenarioOutcome outcome = runner.run();
            const std::string& text = common.machine ? outcome.machine_transcript : outcome.transcript;
            if (!out_path.empty()) {
                std::ofstream out(out_path, std::ios::trunc);
                out << text;
            } else {
                std::cout << text;
            }
            return outcome.exit_code;
        }
        if (*cmd_bench) {
            if (bench_interval > 0) bench_opts.block_interval_ms = bench_interval;
            BenchHarness harness(PhiCatalog::load(data_file(common, "phi_catalog.json")),
                                 PermissionMatrix::load(data_file(common, "permission_matrix.json")));
            if (!common.machine) {
                for (const auto& name : bench_opts.profiles) {
                    ChainConfig p = ChainConfig::profile(name);
                    const std::int64_t interval =
                        bench_opts.block_interval_ms ? *bench_opts.block_interval_ms : p.block_interval_ms;
                    std::fprintf(stderr, "# profile %s: block interval %lld ms, gas price multiplier %.2f\n",
                                 name.c_str(), static_cast<long long>(interval), p.gas_price_multiplier);
                }
            }
            const std::string csv = harness.run(bench_opts).to_csv();
            if (!bench_out.empty()) {
                std::ofstream out(bench_out, std::ios::trunc);
                out << csv;
            } else {
                std::cout << csv;
            }
            return 0;
        }

        if (*cmd_verify) {
            auto engine = open_engine(common);
            VerifyResult v = engine->chain().verify_chain();
            emit(common, json{{"valid", v.valid}, {"first_bad_height", v.first_bad_height}},
                 v.valid ? "Valid" : "Broken(" + std::to_string(v.first_bad_height) + ")");
            return v.valid ? 0 : 1;
        }
        if (*cmd_dump) {
            auto engine = open_engine(common);
            std::cout << engine->chain().dump();
            return 0;
        }

        if (*cmd_ppa) {
            auto engine = open_engine(common);
            Ppa ppa = ppa_from_json(load_json_file(ppa_path));
            PpaIntegrity integrity = engine->create_ppa(ppa, parse_at(at_str));
            auto ids = engine->deploy_consents(ppa.ppa_id, parse_at(at_str));
            save_ppa_document(common, ppa);
            save_engine(common, *engine);
            emit(common,
                 json{{"consents", ids}, {"h_ppa", integrity.h_ppa.hex()}, {"ppa_id", ppa.ppa_id}},
                 "PPA " + ppa.ppa_id + " anchored (h_ppa " + integrity.h_ppa.hex() + "), " +
                     std::to_string(ids.size()) + " consent(s) deployed");
            return 0;
        }
        if (*cmd_create) {
            auto engine = open_engine(common);
            InformedConsent ic = consent_from_json(load_json_file(consent_path));
            std::string id = engine->create_consent(patient_id, std::move(ic), parse_at(at_str));
            save_engine(common, *engine);
            emit(common, json{{"consent_id", id}}, "created " + id);
            return 0;
        }
        if (*cmd_alter) {
            auto engine = open_engine(common);
            InformedConsent next = consent_from_json(load_json_file(consent_path));
            std::string id = engine->alter_consent(old_id, std::move(next), parse_at(at_str));
            save_engine(common, *engine);
            emit(common, json{{"consent_id", id}, {"replaces", old_id}},
                 old_id + " archived, replaced by " + id);
            return 0;
        }
        if (*cmd_term) {
            auto engine = open_engine(common);
            engine->terminate_consent(consent_id, parse_at(at_str));
            save_engine(common, *engine);
            emit(common, json{{"consent_id", consent_id}}, consent_id + " terminated and archived");
            return 0;
        }
        if (*cmd_sweep) {
            auto engine = open_engine(common);
            auto swept = engine->expire_sweep(CivilDateTime::parse(at_str));
            save_engine(common, *engine);
            emit(common, json{{"swept", swept}},
                 swept.empty() ? "nothing to sweep" : std::to_string(swept.size()) + " consent(s) expired");
            return 0;
        }
        if (*cmd_request) {
            auto engine = open_engine(common);
            AuthorizationModule am(*engine);
            AccessRequest req;
            req.request_id = req_id;
            req.subject = {role_from_name(req_role), req_user};
            req.patient_id = patient_id;
            req.phi_id = req_phi;
            req.operation = operation_from_name(req_op);
            req.context.timestamp = CivilDateTime::parse(at_str);
            if (!req_zone.empty()) req.context.zone = req_zone;
            if (!req_source.empty()) req.context.source_address = req_source;
            AccessDecision d = am.authorize(req);
            engine->seal(req.context.timestamp.epoch_ms()); // persistable state has no pool
            save_engine(common, *engine);
            DecisionSummary s = summarize(d);
            auto reasons = json::array();
            std::string reason_text;
            for (const auto& r : s.reasons) {
                reasons.push_back(r.str());
                reason_text += (reason_text.empty() ? "" : ", ") + r.str();
            }
            emit(common,
                 json{{"consent_id", s.consent_id},
                      {"outcome", s.outcome},
                      {"reasons", reasons},
                      {"request_id", s.request_id}},
                 s.outcome + (s.consent_id.empty() ? "" : " via " + s.consent_id) +
                     (reason_text.empty() ? "" : " [" + reason_text + "]"));
            return d.granted() ? 0 : 1;
        }
        if (*cmd_pquery) {
            auto engine = open_engine(common);
            ProvenanceGraph g;
            g.ingest(engine->chain().events());
            OrientationQuery q;
            q.orientation = orientation_from_name(orientation);
            q.key = key;
            q.mode = mode == "Executed" ? QueryMode::Executed : QueryMode::Given;
            auto rows = json::array();
            std::ostringstream human;
            for (const ReportRow& row : g.query(q)) {
                rows.push_back(row.to_json());
                human << row.to_json().dump() << "\n";
            }
            if (common.machine) {
                std::cout << json{{"rows", rows}}.dump() << "\n";
            } else {
                std::cout << human.str();
            }
            return 0;
        }
        if (*cmd_pexport) {
            auto engine = open_engine(common);
            ProvenanceGraph g;
            g.ingest(engine->chain().events());
            const std::string text = format == "json" ? g.export_json().dump(2) + "\n" : g.export_dot();
            if (!out_path.empty()) {
                std::ofstream out(out_path, std::ios::trunc);
                out << text;
            } else {
                std::cout << text;
            }
            return 0;
        }
    } catch (const Error& e) {
        return fail(common, e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
