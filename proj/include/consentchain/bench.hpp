#pragma once

// consentchain/bench.hpp — the desk-scale benchmark harness.
//
// For each chain profile x consent count x operation it builds that many
// consents on a fresh engine, runs the operation batch, and records total gas
// plus latencies. Gas is fully deterministic. Write latency is simulated from
// the chain config (a write becomes visible no earlier than the next block
// boundary); the opt-in wall-clock mode measures elapsed time instead. Read
// latency is always measured: repository and event reads are gas-free and do
// not wait on blocks.

#include <chrono>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "consentchain/engine.hpp"

namespace consentchain {

struct BenchRow {
    std::size_t consent_count = 0;
    std::string operation; // create | alter | terminate | expire
    std::string chain_profile;
    std::uint64_t total_gas = 0;
    double write_latency_ms = 0.0;
    double read_latency_ms = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;

    std::string to_csv() const {
        std::ostringstream out;
        out << "consent_count,operation,chain_profile,total_gas,write_latency_ms,read_latency_ms\n";
        for (const BenchRow& r : rows) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3f,%.3f", r.write_latency_ms, r.read_latency_ms);
            out << r.consent_count << "," << r.operation << "," << r.chain_profile << "," << r.total_gas
                << "," << buf << "\n";
        }
        return out.str();
    }
};

struct BenchOptions {
    std::vector<std::string> profiles = {"polygon-like", "optimism-like", "arbitrum-like"};
    std::vector<std::size_t> counts = {4, 8, 12, 16, 20, 24, 28, 32, 36, 40, 44, 48};
    std::vector<std::string> operations = {"create", "alter", "terminate", "expire"};
    std::optional<std::int64_t> block_interval_ms; // override per profile
    bool wall_clock = false;                        // measure instead of simulate
};

class BenchHarness {
public:
    BenchHarness(PhiCatalog catalog, PermissionMatrix matrix)
        : catalog_(std::move(catalog)), matrix_(std::move(matrix)) {}

    BenchReport run(const BenchOptions& opts) const {
        BenchReport report;
        for (const std::string& profile : opts.profiles) {
            for (const std::string& op : opts.operations) {
                for (std::size_t n : opts.counts) {
                    report.rows.push_back(run_cell(profile, op, n, opts));
                }
            }
        }
        return report;
    }

private:
    using clock = std::chrono::steady_clock;

    static double ms_since(clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    }

    BenchRow run_cell(const std::string& profile, const std::string& op, std::size_t n,
                      const BenchOptions& opts) const {
        ConsentEngine::Options eng_opts;
        eng_opts.chain = ChainConfig::profile(profile);
        if (opts.block_interval_ms) eng_opts.chain.block_interval_ms = *opts.block_interval_ms;
        eng_opts.required_roles = {}; // bench batches terminate everything
        ConsentEngine engine(catalog_, matrix_, eng_opts);

        const std::int64_t interval = engine.chain().config().block_interval_ms;
        const std::string patient = "bench-patient";
        LogicalTime t = CivilDateTime::parse("2025-01-01T08:00").epoch_ms();

        // Consents to exercise: distinct doctor per consent, one readable PHI,
        // plus a calendar bound so the expire batch has something to sweep.
        const CivilDate horizon = CivilDate::parse("2025-06-30");
        auto make_consent = [&](std::size_t i) {
            InformedConsent ic;
            char user[16];
            std::snprintf(user, sizeof user, "doc-%04zu", i);
            ic.users = {UserRef{RoleCode::DOC, user}};
            ic.objects = {"PHI1005"};
            ic.operations = {OperationKind::Read};
            ic.conditions = {Condition(CalendarExpiry{horizon})};
            return ic;
        };

        BenchRow row;
        row.consent_count = n;
        row.operation = op;
        row.chain_profile = profile;

        std::vector<std::string> ids;
        std::uint64_t create_gas = 0;
        auto wall0 = clock::now();
        for (std::size_t i = 0; i < n; ++i) {
            t += interval;
            maybe_wait(opts, interval);
            ids.push_back(engine.create_consent(patient, make_consent(i), t));
            create_gas += last_call_gas(engine, "consent.create");
        }

        if (op == "create") {
            row.total_gas = create_gas;
            row.write_latency_ms = opts.wall_clock ? ms_since(wall0) / static_cast<double>(n)
                                                   : static_cast<double>(interval);
        } else if (op == "alter") {
            std::uint64_t gas = 0;
            wall0 = clock::now();
            for (std::size_t i = 0; i < n; ++i) {
                t += interval;
                maybe_wait(opts, interval);
                InformedConsent next = make_consent(i);
                next.conditions = {Condition(CalendarExpiry{CivilDate::parse("2025-12-31")})};
                engine.alter_consent(ids[i], std::move(next), t);
                gas += last_call_gas(engine, "consent.alter");
            }
            row.total_gas = gas;
            row.write_latency_ms = opts.wall_clock ? ms_since(wall0) / static_cast<double>(n)
                                                   : static_cast<double>(interval);
        } else if (op == "terminate") {
            std::uint64_t gas = 0;
            wall0 = clock::now();
            for (std::size_t i = 0; i < n; ++i) {
                t += interval;
                maybe_wait(opts, interval);
                engine.terminate_consent(ids[i], t);
                gas += last_call_gas(engine, "consent.terminate");
            }
            row.total_gas = gas;
            row.write_latency_ms = opts.wall_clock ? ms_since(wall0) / static_cast<double>(n)
                                                   : static_cast<double>(interval);
        } else if (op == "expire") {
            // One sweep past the calendar horizon archives the whole batch.
            wall0 = clock::now();
            maybe_wait(opts, interval);
            engine.expire_sweep(CivilDateTime::parse("2025-07-01T08:00"));
            row.total_gas = last_call_gas(engine, "consent.sweep");
            row.write_latency_ms = opts.wall_clock ? ms_since(wall0) : static_cast<double>(interval);
        } else {
            throw Error(Errc::ParseError, "unknown bench operation '" + op + "'");
        }

        // Read side: container snapshot plus a filtered event scan.
        auto read0 = clock::now();
        EventFilter f;
        f.patient_id = patient;
        const auto evs = engine.chain().events(f);
        const json snapshot = engine.find_container(patient) ? engine.export_container(patient) : json();
        row.read_latency_ms = ms_since(read0);
        (void)evs;
        (void)snapshot;
        return row;
    }

    static void maybe_wait(const BenchOptions& opts, std::int64_t interval) {
        if (opts.wall_clock) std::this_thread::sleep_for(std::chrono::milliseconds(interval));
    }

    // Gas of the most recent call of `method` on the chain.
    static std::uint64_t last_call_gas(const ConsentEngine& engine, const std::string& method) {
        const auto& blocks = engine.chain().blocks();
        for (auto bi = blocks.rbegin(); bi != blocks.rend(); ++bi) {
            for (auto ti = bi->transactions.rbegin(); ti != bi->transactions.rend(); ++ti) {
                if (ti->method == method) return ti->gas_used;
            }
        }
        return 0;
    }

    PhiCatalog catalog_;
    PermissionMatrix matrix_;
};

} // namespace consentchain
