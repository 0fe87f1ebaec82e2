#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "delaudit/bytes.hpp"
#include "delaudit/collectors.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/rng.hpp"

namespace delaudit {

enum class Party : std::uint8_t { X, Y, Z, X1, X2 };
enum class Origin : std::uint8_t { Y, Z, Internal };

inline std::string to_string(Party p) {
    switch (p) {
        case Party::X: return "X";
        case Party::Y: return "Y";
        case Party::Z: return "Z";
        case Party::X1: return "X1";
        case Party::X2: return "X2";
    }
    return "?";
}

inline Party parse_party(std::string_view s) {
    if (s == "X") return Party::X;
    if (s == "Y") return Party::Y;
    if (s == "Z") return Party::Z;
    if (s == "X1") return Party::X1;
    if (s == "X2") return Party::X2;
    throw UnknownParty("unknown party: " + std::string(s));
}

struct SessionRecord {
    std::uint64_t sid = 0;
    Origin initiator = Origin::Z;
    Party from = Party::Z;
    Party to = Party::X;
    bool is_deletion = false;
    std::string protocol;  // pi name; "pid" for deletion sessions; "send_to_z"
    Bytes request;
    Bytes response;
    // Pi records carry the token the collector issued (possibly empty);
    // pid records carry the token they were invoked with.
    Bytes token;
    std::uint64_t order_index = 0;
};

inline Bytes encode_record(const SessionRecord& r) {
    Bytes out;
    put_u64(out, r.sid);
    put_u8(out, static_cast<std::uint8_t>(r.initiator));
    put_u8(out, static_cast<std::uint8_t>(r.from));
    put_u8(out, static_cast<std::uint8_t>(r.to));
    put_u8(out, r.is_deletion ? 1 : 0);
    put_bstr(out, r.protocol);
    put_bstr(out, r.request);
    put_bstr(out, r.response);
    put_bstr(out, r.token);
    put_u64(out, r.order_index);
    return out;
}

// The interaction view of one party restricted to a single counterparty,
// records in activation order.
struct View {
    Party owner = Party::Z;
    Party peer = Party::X;
    std::vector<SessionRecord> records;
};

inline Bytes encode_view(const View& v) {
    Bytes out;
    put_u8(out, static_cast<std::uint8_t>(v.owner));
    put_u8(out, static_cast<std::uint8_t>(v.peer));
    put_u32(out, static_cast<std::uint32_t>(v.records.size()));
    for (const auto& r : v.records) put_bstr(out, encode_record(r));
    return out;
}

struct CollectorState {
    Bytes bytes;
    bool operator==(const CollectorState&) const = default;
};

struct RoleSeeds {
    std::uint64_t x_private = 0;
    std::uint64_t y = 0;
    std::uint64_t z = 0;
    std::uint64_t scheduler = 0;
};

inline RoleSeeds derive_role_seeds(std::uint64_t master_seed, std::uint64_t trial_index = 0,
                                   std::string_view stream = "") {
    return RoleSeeds{
        derive_seed(master_seed, "x_private", trial_index, stream),
        derive_seed(master_seed, "y", trial_index, stream),
        derive_seed(master_seed, "z", trial_index, stream),
        derive_seed(master_seed, "scheduler", trial_index, stream),
    };
}

struct ExecutionConfig {
    std::uint32_t lambda = 16;
    std::uint64_t master_seed = 0;
    RoleSeeds seeds;  // pure function of (master_seed, role, trial, stream)
    std::uint64_t max_sessions = 4096;
    // Bernoulli parameter for "Y acts next" when Z's script has no explicit
    // activate_y actions. Unset and no activate_y: Y is never activated.
    std::optional<double> interleave_p;

    static ExecutionConfig make(std::uint32_t lambda, std::uint64_t master_seed,
                                std::uint64_t trial_index = 0, std::string_view stream = "") {
        ExecutionConfig cfg;
        cfg.lambda = lambda;
        cfg.master_seed = master_seed;
        cfg.seeds = derive_role_seeds(master_seed, trial_index, stream);
        return cfg;
    }

    void validate() const {
        if (lambda < 8 || lambda > 256) throw ConfigError("lambda must be in [8, 256]");
        if (max_sessions == 0) throw ConfigError("max_sessions must be positive");
        if (interleave_p && (*interleave_p < 0.0 || *interleave_p > 1.0))
            throw ConfigError("interleave_p must be in [0, 1]");
    }
};

struct ExecutionResult {
    CollectorState state_x;  // after the terminate phase
    View view_z_x;
    View view_y_x;
    std::vector<SessionRecord> transcript;  // everything, internal records included
};

inline Bytes encode_execution_result(const ExecutionResult& r) {
    Bytes out;
    put_bstr(out, r.state_x.bytes);
    put_bstr(out, encode_view(r.view_z_x));
    put_bstr(out, encode_view(r.view_y_x));
    put_u32(out, static_cast<std::uint32_t>(r.transcript.size()));
    for (const auto& rec : r.transcript) put_bstr(out, encode_record(rec));
    return out;
}

// ---------------------------------------------------------------------------
// Party scripts
// ---------------------------------------------------------------------------

struct Action {
    enum class Op : std::uint8_t { Post, Fetch, Query, Delete, ActivateY, Capture, SendToZ };
    Op op = Op::Query;
    int index = 0;  // sub-collector index for parallel compositions (1 or 2); 0 = none
    Bytes key, msg;         // post
    std::string token_ref;  // delete: captured name
    std::optional<Bytes> token_literal;  // delete: raw token (e.g. an absent key)
    std::string capture_name;
    Bytes payload;           // send_to_z
    std::uint32_t count = 1; // activate_y

    static Action post(Bytes k, Bytes m, int index = 0) {
        Action a;
        a.op = Op::Post;
        a.key = std::move(k);
        a.msg = std::move(m);
        a.index = index;
        return a;
    }
    static Action fetch(int index = 0) {
        Action a;
        a.op = Op::Fetch;
        a.index = index;
        return a;
    }
    static Action query(int index = 0) {
        Action a;
        a.op = Op::Query;
        a.index = index;
        return a;
    }
    static Action del(std::string ref, int index = 0) {
        Action a;
        a.op = Op::Delete;
        a.token_ref = std::move(ref);
        a.index = index;
        return a;
    }
    static Action del_literal(Bytes token, int index = 0) {
        Action a;
        a.op = Op::Delete;
        a.token_literal = std::move(token);
        a.index = index;
        return a;
    }
    static Action activate_y(std::uint32_t n) {
        Action a;
        a.op = Op::ActivateY;
        a.count = n;
        return a;
    }
    static Action capture(std::string name) {
        Action a;
        a.op = Op::Capture;
        a.capture_name = std::move(name);
        return a;
    }
    static Action send_to_z(Bytes payload) {
        Action a;
        a.op = Op::SendToZ;
        a.payload = std::move(payload);
        return a;
    }
};

using PartyScript = std::vector<Action>;

inline bool script_has_send_to_z(const PartyScript& s) {
    for (const auto& a : s)
        if (a.op == Action::Op::SendToZ) return true;
    return false;
}

inline bool script_has_activate_y(const PartyScript& s) {
    for (const auto& a : s)
        if (a.op == Action::Op::ActivateY) return true;
    return false;
}

// Static script checks: protocol names must exist on the collector, token
// references must resolve to an earlier capture in the same script.
inline void validate_script(const PartyScript& script, const CollectorProgram& collector,
                            std::string_view who) {
    const auto protos = collector.protocols();
    auto has_proto = [&](const std::string& p) {
        for (const auto& q : protos)
            if (q == p) return true;
        return false;
    };
    auto proto_name = [&](const Action& a, std::string_view base) {
        return a.index == 0 ? std::string(base) : std::to_string(a.index) + ":" + std::string(base);
    };
    std::vector<std::string> captured;
    for (const auto& a : script) {
        switch (a.op) {
            case Action::Op::Post:
            case Action::Op::Fetch:
            case Action::Op::Query: {
                std::string base = a.op == Action::Op::Post    ? "post"
                                   : a.op == Action::Op::Fetch ? "fetch"
                                                               : "query";
                std::string p = proto_name(a, base);
                if (!has_proto(p))
                    throw ConfigError(std::string(who) + " script uses protocol '" + p +
                                      "' unknown to collector " + collector.name());
                break;
            }
            case Action::Op::Delete:
                if (!a.token_literal) {
                    bool found = false;
                    for (const auto& c : captured)
                        if (c == a.token_ref) found = true;
                    if (!found)
                        throw ConfigError(std::string(who) + " script deletes token '" +
                                          a.token_ref + "' with no earlier capture");
                }
                break;
            case Action::Op::Capture:
                captured.push_back(a.capture_name);
                break;
            case Action::Op::ActivateY:
                if (who != "Z")
                    throw ConfigError("activate_y is an environment action; found in " +
                                      std::string(who) + " script");
                break;
            case Action::Op::SendToZ:
                if (who != "Y")
                    throw ConfigError("send_to_z is a deletion-requester action; found in " +
                                      std::string(who) + " script");
                break;
        }
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace detail {

struct PartyCursor {
    const PartyScript* script = nullptr;
    std::size_t pos = 0;
    std::map<std::string, Bytes> token_env;
    std::optional<Bytes> last_token;
    SplitMix64 rng{0};  // the party's randomness tape; scripted actions leave it unread

    bool exhausted() const { return pos >= script->size(); }
};

class Executor {
  public:
    Executor(CollectorProgram& collector, const PartyScript& y_script, const PartyScript& z_script,
             const ExecutionConfig& cfg)
        : collector_(collector), cfg_(cfg), sched_rng_(cfg.seeds.scheduler) {
        cfg_.validate();
        y_.script = &y_script;
        z_.script = &z_script;
        y_.rng = SplitMix64(cfg.seeds.y);
        z_.rng = SplitMix64(cfg.seeds.z);
    }

    ExecutionResult run() {
        collector_.init(cfg_.lambda, cfg_.seeds.x_private);
        alive_phase();
        terminate_phase();
        ExecutionResult result;
        result.state_x = CollectorState{collector_.serialize_state()};
        result.view_z_x = restrict(Party::Z, Party::X);
        result.view_y_x = restrict(Party::Y, Party::X);
        result.transcript = std::move(transcript_);
        return result;
    }

  private:
    void alive_phase() {
        if (script_has_activate_y(*z_.script)) {
            // Script-driven activation: Z runs to completion and hands Y the
            // stated number of activations; leftover Y actions are dropped
            // when Z declares the alive phase over.
            while (!z_.exhausted()) {
                const Action& a = (*z_.script)[z_.pos++];
                if (a.op == Action::Op::ActivateY) {
                    for (std::uint32_t i = 0; i < a.count && !y_.exhausted(); ++i)
                        perform(Party::Y, y_, (*y_.script)[y_.pos++]);
                } else {
                    perform(Party::Z, z_, a);
                }
            }
        } else if (cfg_.interleave_p) {
            const double p = *cfg_.interleave_p;
            while (!y_.exhausted() || !z_.exhausted()) {
                bool pick_y;
                if (y_.exhausted()) pick_y = false;
                else if (z_.exhausted()) pick_y = true;
                else pick_y = sched_rng_.bernoulli(p);
                PartyCursor& c = pick_y ? y_ : z_;
                perform(pick_y ? Party::Y : Party::Z, c, (*c.script)[c.pos++]);
            }
        } else {
            // Activation order is under Z's control; with no activations
            // granted, Y never runs.
            while (!z_.exhausted()) perform(Party::Z, z_, (*z_.script)[z_.pos++]);
        }
    }

    // For every Y-initiated pi session whose token Y has not deleted, Y
    // initiates pid with that session's token, in session order.
    void terminate_phase() {
        for (std::size_t i = 0; i < outstanding_y_.size(); ++i) {
            if (outstanding_y_[i].second) continue;
            run_pid(Origin::Y, Party::Y, outstanding_y_[i].first);
        }
    }

    void perform(Party who, PartyCursor& cursor, const Action& a) {
        const Origin origin = who == Party::Y ? Origin::Y : Origin::Z;
        switch (a.op) {
            case Action::Op::Post:
                run_pi(origin, who, protocol_for(a, "post"), encode_post_request(a.key, a.msg),
                       cursor);
                break;
            case Action::Op::Fetch:
                run_pi(origin, who, protocol_for(a, "fetch"), {}, cursor);
                break;
            case Action::Op::Query:
                run_pi(origin, who, protocol_for(a, "query"), {}, cursor);
                break;
            case Action::Op::Delete: {
                Bytes token;
                if (a.token_literal) {
                    token = *a.token_literal;
                    if (a.index != 0) token = Bytes(1, static_cast<char>('0' + a.index)) + token;
                } else {
                    auto it = cursor.token_env.find(a.token_ref);
                    if (it == cursor.token_env.end())
                        throw ScriptError("delete references unknown token '" + a.token_ref + "'");
                    token = it->second;
                }
                run_pid(origin, who, token);
                if (who == Party::Y) mark_deleted(token);
                break;
            }
            case Action::Op::ActivateY:
                throw ScriptError("activate_y inside Y script or interleaved Z script");
            case Action::Op::Capture:
                if (!cursor.last_token)
                    throw ScriptError("capture '" + a.capture_name + "' with no completed session");
                cursor.token_env[a.capture_name] = *cursor.last_token;
                break;
            case Action::Op::SendToZ: {
                SessionRecord rec;
                rec.sid = next_sid_++;
                rec.initiator = Origin::Y;
                rec.from = Party::Y;
                rec.to = Party::Z;
                rec.protocol = "send_to_z";
                rec.request = a.payload;
                rec.order_index = next_order_++;
                push(std::move(rec));
                break;
            }
        }
    }

    std::string protocol_for(const Action& a, std::string_view base) const {
        if (a.index == 0) return std::string(base);
        return std::to_string(a.index) + ":" + std::string(base);
    }

    void run_pi(Origin origin, Party who, const std::string& protocol, Bytes request,
                PartyCursor& cursor) {
        PiResult r = collector_.handle_pi(protocol, request);
        SessionRecord rec;
        rec.sid = next_sid_++;
        rec.initiator = origin;
        rec.from = who;
        rec.to = Party::X;
        rec.protocol = protocol;
        rec.request = std::move(request);
        rec.response = r.response;
        rec.token = r.token;
        rec.order_index = next_order_++;
        push(std::move(rec));
        record_internals(r.internals);
        cursor.last_token = r.token;
        if (origin == Origin::Y) outstanding_y_.emplace_back(r.token, false);
    }

    void run_pid(Origin origin, Party who, const Bytes& token) {
        PidResult r = collector_.handle_pid(token);
        SessionRecord rec;
        rec.sid = next_sid_++;
        rec.initiator = origin;
        rec.from = who;
        rec.to = Party::X;
        rec.is_deletion = true;
        rec.protocol = "pid";
        rec.request = token;
        rec.response = r.ack;
        rec.token = token;
        rec.order_index = next_order_++;
        push(std::move(rec));
        record_internals(r.internals);
    }

    void record_internals(const std::vector<InternalEvent>& internals) {
        for (const auto& ev : internals) {
            SessionRecord rec;
            rec.sid = next_sid_++;
            rec.initiator = Origin::Internal;
            rec.from = Party::X1;
            rec.to = Party::X2;
            rec.is_deletion = ev.is_deletion;
            rec.protocol = ev.protocol;
            rec.request = ev.request;
            rec.response = ev.response;
            rec.token = ev.token;
            rec.order_index = next_order_++;
            push(std::move(rec));
        }
    }

    void mark_deleted(const Bytes& token) {
        for (auto& [t, deleted] : outstanding_y_) {
            if (!deleted && t == token) {
                deleted = true;
                return;
            }
        }
    }

    void push(SessionRecord rec) {
        if (transcript_.size() >= cfg_.max_sessions)
            throw SessionLimitExceeded("session cap reached: " + std::to_string(cfg_.max_sessions));
        transcript_.push_back(std::move(rec));
    }

    View restrict(Party a, Party b) const {
        View v{a, b, {}};
        for (const auto& r : transcript_)
            if ((r.from == a && r.to == b) || (r.from == b && r.to == a)) v.records.push_back(r);
        return v;
    }

    CollectorProgram& collector_;
    ExecutionConfig cfg_;
    SplitMix64 sched_rng_;
    PartyCursor y_, z_;
    std::vector<SessionRecord> transcript_;
    std::vector<std::pair<Bytes, bool>> outstanding_y_;  // (token, deleted by Y)
    std::uint64_t next_sid_ = 1;
    std::uint64_t next_order_ = 1;
};

}  // namespace detail

inline ExecutionResult run_execution(CollectorProgram& collector, const PartyScript& requester,
                                     const PartyScript& environment, const ExecutionConfig& cfg) {
    return detail::Executor(collector, requester, environment, cfg).run();
}

// Ideal execution: Y is replaced by the silent Y0 that does nothing.
inline ExecutionResult run_ideal_execution(CollectorProgram& collector,
                                           const PartyScript& environment,
                                           const ExecutionConfig& cfg) {
    static const PartyScript y0;
    return run_execution(collector, y0, environment, cfg);
}

// Exactly the records between the pair, order preserved. Internal records
// only surface when both endpoints are sub-collectors.
inline View restrict_view(const std::vector<SessionRecord>& transcript, Party a, Party b) {
    View v{a, b, {}};
    for (const auto& r : transcript)
        if ((r.from == a && r.to == b) || (r.from == b && r.to == a)) v.records.push_back(r);
    return v;
}

inline View restrict_view(const std::vector<SessionRecord>& transcript, std::string_view a,
                          std::string_view b) {
    return restrict_view(transcript, parse_party(a), parse_party(b));
}

}  // namespace delaudit
