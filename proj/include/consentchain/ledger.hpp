#pragma once

// consentchain/ledger.hpp — deterministic, embedded, append-only hash-chained
// ledger: FIFO transaction pool, sealed blocks, event log, gas metering.
//
// INVARIANTS:
//   - blocks are append-only; sealed content is never mutated through this API
//   - block_hash covers height, parent hash, timestamp and a digest of every
//     transaction and event byte, so any single-byte mutation is detectable
//   - gas depends only on (schedule, call payload, storage slots, deploy data);
//     replaying a scenario yields identical per-tx gas
//   - reads (events, verify, estimate) never mutate state and charge no gas
//
// One writer at a time: submit/seal go through a single serialized command
// stream. There is no fee market, no forks, no signature checking — senders
// are trusted identifiers. Time is a logical clock supplied by the caller.

#include <json.hpp>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "consentchain/bytes.hpp"
#include "consentchain/civil_time.hpp"
#include "consentchain/encode.hpp"
#include "consentchain/errors.hpp"
#include "consentchain/sha256.hpp"

namespace consentchain {

using json = nlohmann::json;

struct Transaction {
    Digest tx_id; // hash of (sender, target, method, args, submitted_at)
    std::string sender;
    std::string target;
    std::string method;
    Bytes args;
    std::uint64_t gas_used = 0; // filled at execution
    LogicalTime submitted_at = 0;
};

inline Digest compute_tx_id(const Transaction& tx) {
    Encoder e;
    e.str(tx.sender).str(tx.target).str(tx.method).blob(tx.args).i64(tx.submitted_at);
    return sha256(e.bytes());
}

enum class EventKind : std::uint8_t {
    PpaIntegrityStored,
    ConsentCreated,
    ConsentAltered,
    ConsentTerminated,
    ConsentExpired,
    ConsentArchived,
    AccessGranted,
    AccessDenied,
};

inline const char* event_kind_name(EventKind k) {
    static const char* names[] = {"PpaIntegrityStored", "ConsentCreated",  "ConsentAltered",
                                  "ConsentTerminated",  "ConsentExpired",  "ConsentArchived",
                                  "AccessGranted",      "AccessDenied"};
    return names[static_cast<int>(k)];
}

inline EventKind event_kind_from_name(const std::string& s) {
    for (int i = 0; i < 8; ++i) {
        if (s == event_kind_name(static_cast<EventKind>(i))) return static_cast<EventKind>(i);
    }
    throw Error(Errc::ParseError, "unknown event kind '" + s + "'");
}

struct EventRecord {
    std::string event_id;
    std::uint64_t block_height = 0;
    Digest tx_id;
    EventKind kind = EventKind::ConsentCreated;
    json payload; // flat-ish object; keys stay sorted in dumps

    std::string payload_str(const std::string& key) const {
        if (!payload.contains(key)) {
            throw Error(Errc::MalformedEvent, std::string(event_kind_name(kind)) + " missing key " + key);
        }
        return payload.at(key).get<std::string>();
    }
};

struct Block {
    std::uint64_t height = 0;
    Digest parent_hash; // 32 zero bytes at height 0
    LogicalTime timestamp = 0;
    std::vector<Transaction> transactions;
    std::vector<EventRecord> events;
    Digest block_hash;
};

inline Digest hash_transaction(const Transaction& tx) {
    Encoder e;
    e.digest(tx.tx_id).str(tx.sender).str(tx.target).str(tx.method).blob(tx.args);
    e.u64(tx.gas_used).i64(tx.submitted_at);
    return sha256(e.bytes());
}

inline Digest hash_event(const EventRecord& ev) {
    Encoder e;
    e.str(ev.event_id).u64(ev.block_height).digest(ev.tx_id);
    e.u8(static_cast<std::uint8_t>(ev.kind)).str(ev.payload.dump());
    return sha256(e.bytes());
}

inline Digest block_body_digest(const Block& b) {
    Encoder e;
    e.count(b.transactions.size());
    for (const auto& tx : b.transactions) e.digest(hash_transaction(tx));
    e.count(b.events.size());
    for (const auto& ev : b.events) e.digest(hash_event(ev));
    return sha256(e.bytes());
}

inline Digest compute_block_hash(const Block& b) {
    Encoder e;
    e.u64(b.height).digest(b.parent_hash).i64(b.timestamp).digest(block_body_digest(b));
    return sha256(e.bytes());
}

// Gas units per metered action. EVM-magnitude defaults; fixed per chain.
struct GasSchedule {
    std::uint64_t tx_base = 21'000;
    std::uint64_t calldata_nonzero_byte = 16;
    std::uint64_t calldata_zero_byte = 4;
    std::uint64_t storage_slot_new = 20'000;
    std::uint64_t storage_slot_update = 5'000;
    std::uint64_t contract_deploy_base = 32'000;
    std::uint64_t contract_code_byte = 200;
};

// Storage-side effects reported by a contract call, priced by the schedule.
struct GasBill {
    std::uint64_t slots_new = 0;
    std::uint64_t slots_update = 0;
    bool is_deploy = false;
    std::uint64_t code_size = 0;
};

inline std::uint64_t estimate_gas(const GasSchedule& s, const Bytes& payload, const GasBill& bill) {
    std::uint64_t gas = s.tx_base;
    for (std::uint8_t b : payload) {
        gas += b == 0 ? s.calldata_zero_byte : s.calldata_nonzero_byte;
    }
    gas += bill.slots_new * s.storage_slot_new;
    gas += bill.slots_update * s.storage_slot_update;
    if (bill.is_deploy) {
        gas += s.contract_deploy_base + bill.code_size * s.contract_code_byte;
    }
    return gas;
}

struct ChainConfig {
    std::string chain_name = "ethereum-like";
    // Mainnet's ~12 s block time scaled by the desk-scale test factor 1/120.
    std::int64_t block_interval_ms = 100;
    bool test_mode = true; // test mode permits forced seals before the interval
    double gas_price_multiplier = 1.0; // reporting knob only, never affects gas units
    GasSchedule gas;

    // polygon-like / optimism-like / arbitrum-like. They differ only in block
    // interval and the reporting multiplier; arbitrum-like runs shorter blocks.
    static ChainConfig profile(const std::string& name) {
        ChainConfig c;
        c.chain_name = name;
        if (name == "polygon-like") {
            c.block_interval_ms = 100;
            c.gas_price_multiplier = 1.0;
        } else if (name == "optimism-like") {
            c.block_interval_ms = 100;
            c.gas_price_multiplier = 1.2;
        } else if (name == "arbitrum-like") {
            c.block_interval_ms = 25;
            c.gas_price_multiplier = 2.5;
        } else if (name == "ethereum-like") {
            c.block_interval_ms = 100;
            c.gas_price_multiplier = 1.0;
        } else {
            throw Error(Errc::ParseError, "unknown chain profile '" + name + "'");
        }
        return c;
    }

    static ChainConfig from_json(const json& j) {
        ChainConfig c = j.contains("profile") ? profile(j.at("profile").get<std::string>()) : ChainConfig{};
        if (j.contains("chain_name")) c.chain_name = j.at("chain_name").get<std::string>();
        if (j.contains("block_interval_ms")) c.block_interval_ms = j.at("block_interval_ms").get<std::int64_t>();
        if (j.contains("test_mode")) c.test_mode = j.at("test_mode").get<bool>();
        if (j.contains("gas_price_multiplier")) c.gas_price_multiplier = j.at("gas_price_multiplier").get<double>();
        if (c.block_interval_ms <= 0) throw Error(Errc::ParseError, "block_interval_ms must be positive");
        return c;
    }
};

enum class TxStatus : std::uint8_t { Pending, Executed, Failed };

struct Receipt {
    Digest tx_id;
    TxStatus status = TxStatus::Pending;
    std::uint64_t gas_used = 0;
    std::uint64_t block_height = 0; // valid once sealed
    LogicalTime submitted_at = 0;
    LogicalTime sealed_at = 0; // valid once sealed
    std::string error;         // set when Failed
    json output;               // contract-defined result, off-chain convenience
};

// What a contract call did: events to append and storage effects to price.
struct ExecutionResult {
    std::vector<std::pair<EventKind, json>> events;
    GasBill bill;
    json output;
};

using ContractHandler = std::function<ExecutionResult(const Transaction&)>;

// A system transaction a finalizer wants appended at the end of the block
// being sealed (used for automatic expiry sweeps).
struct SystemCall {
    std::string sender;
    std::string target;
    std::string method;
    Bytes args;
};

using BlockFinalizer = std::function<std::vector<SystemCall>(LogicalTime)>;

struct EventFilter {
    std::optional<EventKind> kind;
    std::optional<std::string> patient_id;
    std::optional<std::string> consent_id;
    std::optional<std::uint64_t> from_height;
    std::optional<std::uint64_t> to_height; // inclusive
};

struct VerifyResult {
    bool valid = true;
    std::uint64_t first_bad_height = 0;

    bool operator==(const VerifyResult&) const = default;
};

class Chain {
public:
    explicit Chain(ChainConfig cfg = {}) : cfg_(std::move(cfg)) {
        Block genesis;
        genesis.height = 0;
        genesis.parent_hash = Digest::zero();
        genesis.timestamp = 0;
        genesis.block_hash = compute_block_hash(genesis);
        blocks_.push_back(std::move(genesis));
    }

    const ChainConfig& config() const { return cfg_; }

    void register_contract(const std::string& account, ContractHandler handler) {
        contracts_[account] = std::move(handler);
    }

    void set_block_finalizer(BlockFinalizer f) { finalizer_ = std::move(f); }

    Receipt submit(const std::string& sender, const std::string& target, const std::string& method,
                   Bytes args, LogicalTime at) {
        if (!contracts_.count(target)) {
            throw Error(Errc::UnknownTarget, "no contract at account '" + target + "'");
        }
        Transaction tx;
        tx.sender = sender;
        tx.target = target;
        tx.method = method;
        tx.args = std::move(args);
        tx.submitted_at = at;
        tx.tx_id = compute_tx_id(tx);
        if (receipts_.count(tx.tx_id)) {
            throw Error(Errc::DuplicateTxId, "transaction " + tx.tx_id.hex() + " already submitted");
        }
        Receipt r;
        r.tx_id = tx.tx_id;
        r.submitted_at = at;
        receipts_.emplace(tx.tx_id, r);
        pool_.push_back(std::move(tx));
        return r;
    }

    std::size_t pending_count() const { return pool_.size(); }

    // Drains the pending pool in FIFO order, executes each call, charges gas,
    // then lets the block finalizer append system calls (expiry sweeps) into
    // the same block. Outside test mode a seal before the interval elapses is
    // refused with NotYetDue.
    const Block& seal_block(LogicalTime now) {
        const Block& tip = blocks_.back();
        if (!cfg_.test_mode && blocks_.size() > 1 && now < tip.timestamp + cfg_.block_interval_ms) {
            throw Error(Errc::NotYetDue, "block due at " + std::to_string(tip.timestamp + cfg_.block_interval_ms));
        }
        Block b;
        b.height = tip.height + 1;
        b.parent_hash = tip.block_hash;
        b.timestamp = std::max(now, tip.timestamp);

        while (!pool_.empty()) {
            Transaction tx = std::move(pool_.front());
            pool_.pop_front();
            execute_into(b, std::move(tx));
        }
        if (finalizer_) {
            // Run to quiescence; a sane finalizer returns nothing on the
            // second pass once its effects are in.
            for (int round = 0; round < 8; ++round) {
                auto extra = finalizer_(b.timestamp);
                if (extra.empty()) break;
                for (auto& call : extra) {
                    Transaction tx;
                    tx.sender = call.sender;
                    tx.target = call.target;
                    tx.method = call.method;
                    tx.args = std::move(call.args);
                    tx.submitted_at = b.timestamp;
                    tx.tx_id = compute_tx_id(tx);
                    Receipt r;
                    r.tx_id = tx.tx_id;
                    r.submitted_at = b.timestamp;
                    receipts_.emplace(tx.tx_id, r);
                    execute_into(b, std::move(tx));
                }
            }
        }
        b.block_hash = compute_block_hash(b);
        blocks_.push_back(std::move(b));
        return blocks_.back();
    }

    // Recomputes every digest and linkage from height 0.
    VerifyResult verify_chain() const {
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const Block& b = blocks_[i];
            if (b.height != i) return {false, static_cast<std::uint64_t>(i)};
            const Digest expect_parent = i == 0 ? Digest::zero() : blocks_[i - 1].block_hash;
            if (b.parent_hash != expect_parent) return {false, b.height};
            for (const auto& tx : b.transactions) {
                if (compute_tx_id(tx) != tx.tx_id) return {false, b.height};
            }
            if (compute_block_hash(b) != b.block_hash) return {false, b.height};
        }
        return {};
    }

    // Gas-free read over sealed blocks, in chain order.
    std::vector<EventRecord> events(const EventFilter& f = {}) const {
        std::vector<EventRecord> out;
        for (const Block& b : blocks_) {
            if (f.from_height && b.height < *f.from_height) continue;
            if (f.to_height && b.height > *f.to_height) continue;
            for (const EventRecord& ev : b.events) {
                if (f.kind && ev.kind != *f.kind) continue;
                if (f.patient_id &&
                    (!ev.payload.contains("patient_id") || ev.payload.at("patient_id") != *f.patient_id)) {
                    continue;
                }
                if (f.consent_id &&
                    (!ev.payload.contains("consent_id") || ev.payload.at("consent_id") != *f.consent_id)) {
                    continue;
                }
                out.push_back(ev);
            }
        }
        return out;
    }

    std::size_t count_events(const EventFilter& f) const {
        std::size_t n = 0;
        for (const Block& b : blocks_) {
            if (f.from_height && b.height < *f.from_height) continue;
            if (f.to_height && b.height > *f.to_height) continue;
            for (const EventRecord& ev : b.events) {
                if (f.kind && ev.kind != *f.kind) continue;
                if (f.patient_id &&
                    (!ev.payload.contains("patient_id") || ev.payload.at("patient_id") != *f.patient_id)) {
                    continue;
                }
                if (f.consent_id &&
                    (!ev.payload.contains("consent_id") || ev.payload.at("consent_id") != *f.consent_id)) {
                    continue;
                }
                ++n;
            }
        }
        return n;
    }

    // Structured-text event export, e.g. for provenance ingestion elsewhere.
    json events_json(const EventFilter& f = {}) const {
        auto arr = json::array();
        for (const EventRecord& ev : events(f)) arr.push_back(event_to_json(ev));
        return arr;
    }

    std::uint64_t estimate(const Bytes& payload, const GasBill& bill) const {
        return estimate_gas(cfg_.gas, payload, bill);
    }

    const std::vector<Block>& blocks() const { return blocks_; }
    const Block& tip() const { return blocks_.back(); }
    std::uint64_t height() const { return blocks_.back().height; }

    const Receipt& receipt(const Digest& tx_id) const {
        auto it = receipts_.find(tx_id);
        if (it == receipts_.end()) throw Error(Errc::ParseError, "no receipt for " + tx_id.hex());
        return it->second;
    }

    // ------------------------------------------------------------------
    // Dump / restore: one JSON object per block, bit-exact round trip.
    // ------------------------------------------------------------------

    static json tx_to_json(const Transaction& tx) {
        return json{{"args", to_hex(tx.args)},         {"gas_used", tx.gas_used},
                    {"method", tx.method},             {"sender", tx.sender},
                    {"submitted_at", tx.submitted_at}, {"target", tx.target},
                    {"tx_id", tx.tx_id.hex()}};
    }

    static Transaction tx_from_json(const json& j) {
        Transaction tx;
        tx.args = from_hex(j.at("args").get<std::string>());
        tx.gas_used = j.at("gas_used").get<std::uint64_t>();
        tx.method = j.at("method").get<std::string>();
        tx.sender = j.at("sender").get<std::string>();
        tx.submitted_at = j.at("submitted_at").get<LogicalTime>();
        tx.target = j.at("target").get<std::string>();
        tx.tx_id = Digest::from_hex(j.at("tx_id").get<std::string>());
        return tx;
    }

    static json event_to_json(const EventRecord& ev) {
        return json{{"block_height", ev.block_height},
                    {"event_id", ev.event_id},
                    {"kind", event_kind_name(ev.kind)},
                    {"payload", ev.payload},
                    {"tx_id", ev.tx_id.hex()}};
    }

    static EventRecord event_from_json(const json& j) {
        EventRecord ev;
        ev.block_height = j.at("block_height").get<std::uint64_t>();
        ev.event_id = j.at("event_id").get<std::string>();
        ev.kind = event_kind_from_name(j.at("kind").get<std::string>());
        ev.payload = j.at("payload");
        ev.tx_id = Digest::from_hex(j.at("tx_id").get<std::string>());
        return ev;
    }

    static json block_to_json(const Block& b) {
        auto txs = json::array();
        for (const auto& tx : b.transactions) txs.push_back(tx_to_json(tx));
        auto evs = json::array();
        for (const auto& ev : b.events) evs.push_back(event_to_json(ev));
        return json{{"block_hash", b.block_hash.hex()}, {"events", evs},
                    {"height", b.height},               {"parent_hash", b.parent_hash.hex()},
                    {"timestamp", b.timestamp},         {"transactions", txs}};
    }

    static Block block_from_json(const json& j) {
        Block b;
        b.block_hash = Digest::from_hex(j.at("block_hash").get<std::string>());
        b.height = j.at("height").get<std::uint64_t>();
        b.parent_hash = Digest::from_hex(j.at("parent_hash").get<std::string>());
        b.timestamp = j.at("timestamp").get<LogicalTime>();
        for (const auto& t : j.at("transactions")) b.transactions.push_back(tx_from_json(t));
        for (const auto& e : j.at("events")) b.events.push_back(event_from_json(e));
        return b;
    }

    std::string dump() const {
        std::ostringstream out;
        for (const Block& b : blocks_) out << block_to_json(b).dump() << "\n";
        return out.str();
    }

    // Rebuilds a chain value from dumped blocks. No re-execution happens;
    // verify_chain() is the tamper check for restored content.
    static Chain restore(ChainConfig cfg, const std::string& text) {
        std::vector<Block> blocks;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                blocks.push_back(block_from_json(json::parse(line)));
            } catch (const json::exception& e) {
                throw Error(Errc::ParseError, "chain dump line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return from_blocks(std::move(cfg), std::move(blocks));
    }

    static Chain from_blocks(ChainConfig cfg, std::vector<Block> blocks) {
        if (blocks.empty()) throw Error(Errc::ParseError, "chain dump has no blocks");
        Chain c(std::move(cfg));
        c.blocks_ = std::move(blocks);
        c.receipts_.clear();
        std::uint64_t n_events = 0;
        for (const Block& b : c.blocks_) {
            for (const Transaction& tx : b.transactions) {
                Receipt r;
                r.tx_id = tx.tx_id;
                r.status = TxStatus::Executed;
                r.gas_used = tx.gas_used;
                r.block_height = b.height;
                r.submitted_at = tx.submitted_at;
                r.sealed_at = b.timestamp;
                c.receipts_.emplace(tx.tx_id, r);
            }
            n_events += b.events.size();
        }
        c.event_seq_ = n_events;
        return c;
    }

private:
    void execute_into(Block& b, Transaction tx) {
        Receipt& r = receipts_.at(tx.tx_id);
        auto handler = contracts_.find(tx.target);
        try {
            if (handler == contracts_.end()) {
                throw Error(Errc::UnknownTarget, "no contract at account '" + tx.target + "'");
            }
            ExecutionResult res = handler->second(tx);
            tx.gas_used = estimate(tx.args, res.bill);
            r.status = TxStatus::Executed;
            r.output = std::move(res.output);
            b.transactions.push_back(std::move(tx));
            const Transaction& sealed_tx = b.transactions.back();
            for (auto& [kind, payload] : res.events) {
                EventRecord ev;
                ev.event_id = next_event_id();
                ev.block_height = b.height;
                ev.tx_id = sealed_tx.tx_id;
                ev.kind = kind;
                ev.payload = std::move(payload);
                b.events.push_back(std::move(ev));
            }
        } catch (const std::exception& e) {
            // Failed calls stay in the block with base gas charged; no events.
            tx.gas_used = estimate(tx.args, GasBill{});
            r.status = TxStatus::Failed;
            r.error = e.what();
            b.transactions.push_back(std::move(tx));
        }
        r.gas_used = b.transactions.back().gas_used;
        r.block_height = b.height;
        r.sealed_at = b.timestamp;
    }

    std::string next_event_id() {
        char buf[16];
        std::snprintf(buf, sizeof buf, "ev%08llu", static_cast<unsigned long long>(event_seq_++));
        return buf;
    }

    ChainConfig cfg_;
    std::vector<Block> blocks_;
    std::deque<Transaction> pool_;
    std::map<Digest, Receipt> receipts_;
    std::map<std::string, ContractHandler> contracts_;
    BlockFinalizer finalizer_;
    std::uint64_t event_seq_ = 0;
};

} // namespace consentchain
