#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "delaudit/bytes.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/hi.hpp"
#include "delaudit/rng.hpp"

namespace delaudit {

// A sub-protocol session run between the two halves of a sequential
// composition, surfaced so the scheduler can put it on the transcript.
struct InternalEvent {
    std::string protocol;  // "pid" for deletion sessions
    bool is_deletion = false;
    Bytes request;
    Bytes response;
    Bytes token;
};

struct PiResult {
    Bytes response;
    Bytes token;  // deletion token for this session; empty when nothing was stored
    std::vector<InternalEvent> internals;
};

struct PidResult {
    Bytes ack;
    std::vector<InternalEvent> internals;
};

// The data-collector under audit. After init, behavior is a deterministic
// function of the work tape and inbound payloads; the only sanctioned
// randomness is the private sampling stream seeded at init (the counter's
// identifier draw uses it).
class CollectorProgram {
  public:
    virtual ~CollectorProgram() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> protocols() const = 0;
    virtual void init(std::uint32_t lambda, std::uint64_t private_seed) = 0;
    virtual PiResult handle_pi(std::string_view protocol, const Bytes& request) = 0;
    virtual PidResult handle_pid(const Bytes& token) = 0;
    virtual Bytes serialize_state() const = 0;
    // True when sessions spawn internal X1<->X2 sub-sessions; such collectors
    // cannot sit inside a parallel composition (the transcript has one
    // internal channel).
    virtual bool emits_internal_sessions() const { return false; }
};

using CollectorFactory = std::function<std::unique_ptr<CollectorProgram>()>;

inline constexpr char kAckOk = 1;
inline constexpr char kAckFail = 0;

// Shared canonical encodings; the bespoke simulators emit the same bytes.
inline Bytes encode_counter_state(const SortedKeySet& xs, std::int64_t q) {
    Bytes out = "CS";
    put_u64(out, static_cast<std::uint64_t>(q));
    put_u32(out, static_cast<std::uint32_t>(xs.keys.size()));
    for (const auto& x : xs.keys) put_bstr(out, x);
    return out;
}

inline Bytes encode_pair_state(const Bytes& first, const Bytes& second) {
    Bytes out = "PR";
    put_bstr(out, first);
    put_bstr(out, second);
    return out;
}

// Request payload for keyed protocols: length-prefixed (k, m).
inline Bytes encode_post_request(const Bytes& k, const Bytes& m) {
    Bytes out;
    put_bstr(out, k);
    put_bstr(out, m);
    return out;
}

inline std::pair<Bytes, Bytes> decode_post_request(const Bytes& request) {
    ByteReader r{request};
    Bytes k = r.bstr();
    Bytes m = r.bstr();
    return {std::move(k), std::move(m)};
}

// ---------------------------------------------------------------------------
// Counter collector: answers each query with a fresh lambda-bit identifier
// and the running session-count parity. The parity bit is the deliberate
// one-bit leak that separates strong from weak deletion-compliance.
// ---------------------------------------------------------------------------
class CounterCollector final : public CollectorProgram {
  public:
    std::string name() const override { return "counter"; }
    std::vector<std::string> protocols() const override { return {"query"}; }

    void init(std::uint32_t lambda, std::uint64_t private_seed) override {
        lambda_ = lambda;
        rng_ = SplitMix64(private_seed);
        xs_ = SortedKeySet{};
        q_ = 0;
    }

    PiResult handle_pi(std::string_view protocol, const Bytes&) override {
        if (protocol != "query") throw UnknownProtocol("counter has no protocol " + std::string(protocol));
        Bytes x = sample_fresh();
        xs_.insert(x);
        ++q_;
        Bytes response = x;
        response.push_back(static_cast<char>(q_ % 2));
        return {std::move(response), x, {}};
    }

    PidResult handle_pid(const Bytes& token) override {
        if (xs_.erase(token)) {
            --q_;
            return {Bytes(1, kAckOk), {}};
        }
        return {Bytes(1, kAckFail), {}};
    }

    Bytes serialize_state() const override { return encode_counter_state(xs_, q_); }

    std::int64_t session_count() const { return q_; }

  private:
    Bytes sample_fresh() {
        // x in {0,1}^lambda \ X by rejection; cheap at desk scale.
        if (lambda_ < 64 && xs_.keys.size() >= (1ull << lambda_))
            throw DomainExhausted("counter identifier space saturated");
        for (;;) {
            Bytes x = sample_bits(rng_, lambda_);
            if (!xs_.contains(x)) return x;
        }
    }

    std::uint32_t lambda_ = 0;
    SplitMix64 rng_{0};
    SortedKeySet xs_;
    std::int64_t q_ = 0;  // never negative: only successful deletes decrement
};

// ---------------------------------------------------------------------------
// Message board: clients post (k, m), fetch all messages in insertion order,
// and delete by key. Backed by the compacting (history-independent) list.
// ---------------------------------------------------------------------------
class MessageBoard final : public CollectorProgram {
  public:
    std::string name() const override { return "board"; }
    std::vector<std::string> protocols() const override { return {"post", "fetch"}; }

    void init(std::uint32_t, std::uint64_t) override { list_ = CompactingList{}; }

    PiResult handle_pi(std::string_view protocol, const Bytes& request) override {
        if (protocol == "post") {
            auto [k, m] = decode_post_request(request);
            if (!list_.insert(k, m)) return {"dup", {}, {}};  // rejected: no token issued
            return {"ok", k, {}};
        }
        if (protocol == "fetch") {
            Bytes response;
            for (const auto& [k, m] : list_.entries) put_bstr(response, m);
            return {std::move(response), {}, {}};
        }
        throw UnknownProtocol("board has no protocol " + std::string(protocol));
    }

    PidResult handle_pid(const Bytes& token) override {
        return {Bytes(1, list_.erase(token) ? kAckOk : kAckFail), {}};
    }

    Bytes serialize_state() const override { return list_.rep(); }

  private:
    CompactingList list_;
};

// Same interface as the board, but deletion only tombstones. The weak audit's
// negative control.
class TombstoneBoard final : public CollectorProgram {
  public:
    std::string name() const override { return "tombstone_board"; }
    std::vector<std::string> protocols() const override { return {"post", "fetch"}; }

    void init(std::uint32_t, std::uint64_t) override { list_ = TombstoneList{}; }

    PiResult handle_pi(std::string_view protocol, const Bytes& request) override {
        if (protocol == "post") {
            auto [k, m] = decode_post_request(request);
            if (!list_.insert(k, m)) return {"dup", {}, {}};
            return {"ok", k, {}};
        }
        if (protocol == "fetch") {
            Bytes response;
            for (const auto& e : list_.entries)
                if (e.alive) put_bstr(response, e.msg);
            return {std::move(response), {}, {}};
        }
        throw UnknownProtocol("tombstone_board has no protocol " + std::string(protocol));
    }

    PidResult handle_pid(const Bytes& token) override {
        return {Bytes(1, list_.erase(token) ? kAckOk : kAckFail), {}};
    }

    Bytes serialize_state() const override { return list_.rep(); }

  private:
    TombstoneList list_;
};

// Store-only collector: accepts (k, m), acknowledges with constant bytes,
// exposes no read protocol. Deletes silently. Nothing a client sees depends
// on the stored content, which is what makes it pass all three audits.
class VaultCollector final : public CollectorProgram {
  public:
    std::string name() const override { return "vault"; }
    std::vector<std::string> protocols() const override { return {"post"}; }

    void init(std::uint32_t, std::uint64_t) override { map_ = SortedKeyMap{}; }

    PiResult handle_pi(std::string_view protocol, const Bytes& request) override {
        if (protocol != "post") throw UnknownProtocol("vault has no protocol " + std::string(protocol));
        auto [k, m] = decode_post_request(request);
        // ack stays constant either way; a rejected duplicate stores nothing
        // and therefore grants no deletion authority
        bool stored = map_.insert(k, m);
        return {"ok", stored ? k : Bytes{}, {}};
    }

    PidResult handle_pid(const Bytes& token) override {
        map_.erase(token);
        return {Bytes(1, kAckOk), {}};  // constant ack: presence is not disclosed
    }

    Bytes serialize_state() const override { return map_.rep(); }

  private:
    SortedKeyMap map_;
};

// Index frontend used by the sequential composition: records which keys it
// has seen, forwards the payload downstream.
class IndexFrontend final : public CollectorProgram {
  public:
    std::string name() const override { return "frontend"; }
    std::vector<std::string> protocols() const override { return {"post", "fetch"}; }

    void init(std::uint32_t, std::uint64_t) override { index_ = SortedKeySet{}; }

    PiResult handle_pi(std::string_view protocol, const Bytes& request) override {
        if (protocol == "post") {
            auto [k, m] = decode_post_request(request);
            if (!index_.insert(k)) return {"dup", {}, {}};
            return {"ok", k, {}};
        }
        if (protocol == "fetch") return {"ok", {}, {}};
        throw UnknownProtocol("frontend has no protocol " + std::string(protocol));
    }

    PidResult handle_pid(const Bytes& token) override {
        return {Bytes(1, index_.erase(token) ? kAckOk : kAckFail), {}};
    }

    Bytes serialize_state() const override { return index_.rep(); }

  private:
    SortedKeySet index_;
};

// ---------------------------------------------------------------------------
// Parallel composition: one instance of each sub-collector, protocols and
// deletion tokens namespaced by index, composed state = pair of sub-states.
// ---------------------------------------------------------------------------
class ParallelComposite final : public CollectorProgram {
  public:
    ParallelComposite(std::unique_ptr<CollectorProgram> first,
                      std::unique_ptr<CollectorProgram> second)
        : x1_(std::move(first)), x2_(std::move(second)) {
        if (x1_->emits_internal_sessions() || x2_->emits_internal_sessions())
            throw ConfigError("parallel() cannot wrap a collector with internal sessions");
    }

    std::string name() const override {
        return "parallel(" + x1_->name() + "," + x2_->name() + ")";
    }

    std::vector<std::string> protocols() const override {
        std::vector<std::string> out;
        for (const auto& p : x1_->protocols()) out.push_back("1:" + p);
        for (const auto& p : x2_->protocols()) out.push_back("2:" + p);
        return out;
    }

    void init(std::uint32_t lambda, std::uint64_t private_seed) override {
        // Independent sub-streams so each machine runs "independently of one
        // another" even when both sample.
        x1_->init(lambda, mix64(private_seed ^ 1));
        x2_->init(lambda, mix64(private_seed ^ 2));
    }

    PiResult handle_pi(std::string_view protocol, const Bytes& request) override {
        auto [idx, inner] = split_protocol(protocol);
        CollectorProgram& x = idx == 1 ? *x1_ : *x2_;
        PiResult r = x.handle_pi(inner, request);
        Bytes token;
        token.push_back(idx == 1 ? '1' : '2');
        token += r.token;
        return {std::move(r.response), std::move(token), {}};
    }

    PidResult handle_pid(const Bytes& token) override {
        if (token.empty() || (token[0] != '1' && token[0] != '2'))
            throw UnknownProtocolIndex("parallel deletion token lacks a routable index");
        CollectorProgram& x = token[0] == '1' ? *x1_ : *x2_;
        return x.handle_pid(token.substr(1));
    }

    Bytes serialize_state() const override {
        return encode_pair_state(x1_->serialize_state(), x2_->serialize_state());
    }

  private:
    static std::pair<int, std::string_view> split_protocol(std::string_view protocol) {
        if (protocol.size() >= 2 && protocol[1] == ':' && (protocol[0] == '1' || protocol[0] == '2'))
            return {protocol[0] - '0', protocol.substr(2)};
        throw UnknownProtocolIndex("parallel protocol must carry an index: " +
                                   std::string(protocol));
    }

    std::unique_ptr<CollectorProgram> x1_, x2_;
};

// ---------------------------------------------------------------------------
// Sequential composition: clients talk to X1; every session triggers an
// internal session between X1 and X2 whose payload the forwarder derives from
// the inbound request. The client receives X2's response (the frontend is a
// pass-through index), the deletion token is X1's.
// ---------------------------------------------------------------------------
class Forwarder {
  public:
    virtual ~Forwarder() = default;
    virtual std::string name() const = 0;
    // Maps an inbound pi request to the internal pi request for X2.
    virtual std::pair<std::string, Bytes> forward_pi(std::string_view protocol,
                                                     const Bytes& request) const = 0;
    // Maps a deletion token to the internal deletion token for X2.
    virtual Bytes forward_pid(const Bytes& token) const = 0;
};

// Stateless per session and verbatim, which is exactly what makes the
// composition 0-independent: the internal traffic for a session is a function
// of that session's client-side record alone.
class VerbatimForwarder final : public Forwarder {
  public:
    std::string name() const override { return "verbatim"; }
    std::pair<std::string, Bytes> forward_pi(std::string_view protocol,
                                             const Bytes& request) const override {
        return {std::string(protocol), request};
    }
    Bytes forward_pid(const Bytes& token) const override { return token; }
};

inline const VerbatimForwarder& verbatim_forwarder() {
    static const VerbatimForwarder f;
    return f;
}

class SequentialComposite final : public CollectorProgram {
  public:
    SequentialComposite(std::unique_ptr<CollectorProgram> frontend,
                        std::unique_ptr<CollectorProgram> backend,
                        const Forwarder& forwarder = verbatim_forwarder())
        : x1_(std::move(frontend)), x2_(std::move(backend)), forwarder_(&forwarder) {}

    std::string name() const override {
        return "sequential(" + x1_->name() + "," + x2_->name() + ")";
    }

    std::vector<std::string> protocols() const override { return x1_->protocols(); }

    void init(std::uint32_t lambda, std::uint64_t private_seed) override {
        x1_->init(lambda, mix64(private_seed ^ 1));
        x2_->init(lambda, mix64(private_seed ^ 2));
    }

    PiResult handle_pi(std::string_view protocol, const Bytes& request) override {
        PiResult front = x1_->handle_pi(protocol, request);
        std::pair<std::string, Bytes> fwd;
        try {
            fwd = forwarder_->forward_pi(protocol, request);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw ForwarderFailure(std::string("forwarder: ") + e.what());
        }
        PiResult back = x2_->handle_pi(fwd.first, fwd.second);
        std::vector<InternalEvent> internals;
        internals.push_back({fwd.first, false, fwd.second, back.response, back.token});
        return {std::move(back.response), std::move(front.token), std::move(internals)};
    }

    PidResult handle_pid(const Bytes& token) override {
        x1_->handle_pid(token);
        Bytes inner = forwarder_->forward_pid(token);
        PidResult back = x2_->handle_pid(inner);
        std::vector<InternalEvent> internals;
        internals.push_back({"pid", true, inner, back.ack, inner});
        return {std::move(back.ack), std::move(internals)};
    }

    Bytes serialize_state() const override {
        return encode_pair_state(x1_->serialize_state(), x2_->serialize_state());
    }

    bool emits_internal_sessions() const override { return true; }

  private:
    std::unique_ptr<CollectorProgram> x1_, x2_;
    const Forwarder* forwarder_;
};

// ---------------------------------------------------------------------------
// Registry. Grammar: counter | board | tombstone_board | vault | frontend |
// parallel(a,b) | sequential(a,b); compositions nest.
// ---------------------------------------------------------------------------
namespace detail {

inline std::pair<std::string, std::string> split_pair_args(const std::string& inner,
                                                           const std::string& what) {
    int depth = 0;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] == '(') ++depth;
        else if (inner[i] == ')') --depth;
        else if (inner[i] == ',' && depth == 0)
            return {inner.substr(0, i), inner.substr(i + 1)};
    }
    throw ConfigError(what + " needs two comma-separated arguments: " + inner);
}

}  // namespace detail

inline std::unique_ptr<CollectorProgram> make_collector(const std::string& spec) {
    if (spec == "counter") return std::make_unique<CounterCollector>();
    if (spec == "board") return std::make_unique<MessageBoard>();
    if (spec == "tombstone_board") return std::make_unique<TombstoneBoard>();
    if (spec == "vault") return std::make_unique<VaultCollector>();
    if (spec == "frontend") return std::make_unique<IndexFrontend>();
    if (spec.starts_with("parallel(") && spec.ends_with(")")) {
        auto [a, b] = detail::split_pair_args(spec.substr(9, spec.size() - 10), "parallel");
        return std::make_unique<ParallelComposite>(make_collector(a), make_collector(b));
    }
    if (spec.starts_with("sequential(") && spec.ends_with(")")) {
        auto [a, b] = detail::split_pair_args(spec.substr(11, spec.size() - 12), "sequential");
        return std::make_unique<SequentialComposite>(make_collector(a), make_collector(b));
    }
    throw ConfigError("unknown collector: " + spec);
}

inline CollectorFactory collector_factory(std::string spec) {
    make_collector(spec);  // validate eagerly so config errors surface at load
    return [spec = std::move(spec)] { return make_collector(spec); };
}

}  // namespace delaudit
