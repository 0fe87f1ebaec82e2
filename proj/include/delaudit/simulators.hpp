#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "delaudit/bytes.hpp"
#include "delaudit/collectors.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/execution.hpp"

namespace delaudit {

// Reconstructs the collector's post-terminate state from the environment's
// interaction view alone. Pure function of (view, lambda, seed); the fresh
// private seed is drawn per invocation by the auditor.
class Simulator {
  public:
    virtual ~Simulator() = default;
    virtual std::string name() const = 0;
    virtual CollectorState simulate(const View& view, std::uint32_t lambda,
                                    std::uint64_t fresh_private_seed) const = 0;
};

// Counter simulator: start from (S, q) = (empty, 0); every pi record inserts
// its identifier and bumps q, every pid record with a known identifier
// removes it and drops q, unknown deletes do nothing. Output is the canonical
// (sorted S, q) encoding.
class CounterSimulator final : public Simulator {
  public:
    std::string name() const override { return "counter"; }

    CollectorState simulate(const View& view, std::uint32_t, std::uint64_t) const override {
        SortedKeySet s;
        std::int64_t q = 0;
        for (const auto& rec : view.records) {
            if (rec.is_deletion) {
                if (s.erase(rec.request)) --q;
            } else {
                if (rec.protocol != "query")
                    throw MalformedView("counter simulator got protocol " + rec.protocol);
                if (rec.response.size() < 2)
                    throw MalformedView("counter response too short");
                s.insert(rec.response.substr(0, rec.response.size() - 1));
                ++q;
            }
        }
        return {encode_counter_state(s, q)};
    }
};

// Message-board simulator: replay posts and deletes, ignore fetches. A post
// whose recorded ack is the duplicate rejection is skipped, matching what the
// collector stored.
class BoardSimulator final : public Simulator {
  public:
    std::string name() const override { return "board"; }

    CollectorState simulate(const View& view, std::uint32_t, std::uint64_t) const override {
        CompactingList list;
        for (const auto& rec : view.records) {
            if (rec.is_deletion) {
                list.erase(rec.request);
            } else if (rec.protocol == "post") {
                auto [k, m] = decode_request(rec);
                if (rec.response != "dup") list.insert(k, m);
            } else if (rec.protocol != "fetch") {
                throw MalformedView("board simulator got protocol " + rec.protocol);
            }
        }
        return {list.rep()};
    }

  private:
    static std::pair<Bytes, Bytes> decode_request(const SessionRecord& rec) {
        try {
            return decode_post_request(rec.request);
        } catch (const std::exception&) {
            throw MalformedView("undecodable post request in record " + std::to_string(rec.sid));
        }
    }
};

// Frontend simulator: track which keys survive.
class FrontendSimulator final : public Simulator {
  public:
    std::string name() const override { return "frontend"; }

    CollectorState simulate(const View& view, std::uint32_t, std::uint64_t) const override {
        SortedKeySet index;
        for (const auto& rec : view.records) {
            if (rec.is_deletion) {
                index.erase(rec.request);
            } else if (rec.protocol == "post") {
                Bytes k;
                try {
                    k = decode_post_request(rec.request).first;
                } catch (const std::exception&) {
                    throw MalformedView("undecodable post request in record " +
                                        std::to_string(rec.sid));
                }
                if (rec.response != "dup") index.insert(k);
            } else if (rec.protocol != "fetch") {
                throw MalformedView("frontend simulator got protocol " + rec.protocol);
            }
        }
        return {index.rep()};
    }
};

// Generic simulator for collectors that are deterministic after init: start a
// fresh instance with a fresh private tape and replay every recorded session
// in view order, demanding that each replayed response reproduce the recorded
// one. A divergence means the determinism hypothesis fails (e.g. the counter
// resamples a different identifier) and is reported as an error rather than
// silently producing an inconsistent state.
class ReplaySimulator final : public Simulator {
  public:
    ReplaySimulator(CollectorFactory factory, std::string collector_name)
        : factory_(std::move(factory)), collector_name_(std::move(collector_name)) {}

    std::string name() const override { return "replay(" + collector_name_ + ")"; }

    CollectorState simulate(const View& view, std::uint32_t lambda,
                            std::uint64_t fresh_private_seed) const override {
        auto collector = factory_();
        collector->init(lambda, fresh_private_seed);
        for (const auto& rec : view.records) {
            if (rec.is_deletion) {
                PidResult r = collector->handle_pid(rec.request);
                if (r.ack != rec.response)
                    throw ReplayDivergence("pid ack diverged at sid " + std::to_string(rec.sid));
            } else {
                PiResult r = collector->handle_pi(rec.protocol, rec.request);
                if (r.response != rec.response)
                    throw ReplayDivergence("response diverged at sid " + std::to_string(rec.sid));
            }
        }
        return {collector->serialize_state()};
    }

  private:
    CollectorFactory factory_;
    std::string collector_name_;
};

// ---------------------------------------------------------------------------
// Composition simulators
// ---------------------------------------------------------------------------

// Splits the composite view by protocol index (tokens carry the index for
// deletion records), hands each half to the matching sub-simulator, returns
// the canonical pair.
class ParallelSimulator final : public Simulator {
  public:
    ParallelSimulator(std::unique_ptr<Simulator> first, std::unique_ptr<Simulator> second)
        : s1_(std::move(first)), s2_(std::move(second)) {}

    std::string name() const override { return "parallel(" + s1_->name() + "," + s2_->name() + ")"; }

    CollectorState simulate(const View& view, std::uint32_t lambda,
                            std::uint64_t fresh_private_seed) const override {
        View v1{view.owner, view.peer, {}};
        View v2{view.owner, view.peer, {}};
        for (const auto& rec : view.records) {
            SessionRecord inner = rec;
            int idx;
            if (rec.is_deletion) {
                if (rec.token.empty() || (rec.token[0] != '1' && rec.token[0] != '2'))
                    throw MalformedView("unroutable deletion token at sid " +
                                        std::to_string(rec.sid));
                idx = rec.token[0] - '0';
                inner.token = rec.token.substr(1);
                inner.request = inner.token;
            } else {
                if (rec.protocol.size() < 3 || rec.protocol[1] != ':' ||
                    (rec.protocol[0] != '1' && rec.protocol[0] != '2'))
                    throw MalformedView("unroutable protocol '" + rec.protocol + "' at sid " +
                                        std::to_string(rec.sid));
                idx = rec.protocol[0] - '0';
                inner.protocol = rec.protocol.substr(2);
                inner.token = rec.token.empty() ? Bytes{} : rec.token.substr(1);
            }
            (idx == 1 ? v1 : v2).records.push_back(std::move(inner));
        }
        CollectorState st1 = s1_->simulate(v1, lambda, mix64(fresh_private_seed ^ 1));
        CollectorState st2 = s2_->simulate(v2, lambda, mix64(fresh_private_seed ^ 2));
        return {encode_pair_state(st1.bytes, st2.bytes)};
    }

  private:
    std::unique_ptr<Simulator> s1_, s2_;
};

// Independence extractors for the shipped verbatim-forward sequential
// composition. Given the environment's client-side view of the composite,
// reconstruct (byte-exactly) the internal X1<->X2 records attributable to
// those sessions: the internal request is the forwarded client request, the
// internal response is the response the client saw (the frontend passes the
// backend's answer through), and sids/order slots sit right after the client
// record's.
using ViewExtractor = std::function<View(const View&)>;

inline View extract_frontend_view(const View& view) { return view; }

inline View extract_internal_view(const View& view) {
    View internal{Party::X1, Party::X2, {}};
    for (const auto& rec : view.records) {
        SessionRecord r;
        r.sid = rec.sid + 1;
        r.initiator = Origin::Internal;
        r.from = Party::X1;
        r.to = Party::X2;
        r.order_index = rec.order_index + 1;
        r.response = rec.response;
        if (rec.is_deletion) {
            r.is_deletion = true;
            r.protocol = "pid";
            r.request = verbatim_forwarder().forward_pid(rec.token);
            r.token = r.request;
        } else {
            auto [proto, req] = verbatim_forwarder().forward_pi(rec.protocol, rec.request);
            r.protocol = proto;
            r.request = req;
            if (proto == "post") {
                try {
                    r.token = decode_post_request(req).first;
                } catch (const std::exception&) {
                    throw ExtractorFailure("undecodable post request at sid " +
                                           std::to_string(rec.sid));
                }
            }
        }
        internal.records.push_back(std::move(r));
    }
    return internal;
}

// Sequential-composition simulator: apply the extractors to recover the two
// per-machine views, then the matching sub-simulator to each.
class SequentialSimulator final : public Simulator {
  public:
    SequentialSimulator(std::unique_ptr<Simulator> frontend, std::unique_ptr<Simulator> backend,
                        ViewExtractor v1 = extract_frontend_view,
                        ViewExtractor v2 = extract_internal_view)
        : s1_(std::move(frontend)),
          s2_(std::move(backend)),
          v1_(std::move(v1)),
          v2_(std::move(v2)) {}

    std::string name() const override {
        return "sequential(" + s1_->name() + "," + s2_->name() + ")";
    }

    CollectorState simulate(const View& view, std::uint32_t lambda,
                            std::uint64_t fresh_private_seed) const override {
        CollectorState st1 = s1_->simulate(v1_(view), lambda, mix64(fresh_private_seed ^ 1));
        CollectorState st2 = s2_->simulate(v2_(view), lambda, mix64(fresh_private_seed ^ 2));
        return {encode_pair_state(st1.bytes, st2.bytes)};
    }

  private:
    std::unique_ptr<Simulator> s1_, s2_;
    ViewExtractor v1_, v2_;
};

// ---------------------------------------------------------------------------
// Registry. Grammar: counter | board | frontend | replay(<collector>) |
// parallel(a,b) | sequential(frontend,board).
// ---------------------------------------------------------------------------
inline std::unique_ptr<Simulator> make_simulator(const std::string& spec) {
    if (spec == "counter") return std::make_unique<CounterSimulator>();
    if (spec == "board") return std::make_unique<BoardSimulator>();
    if (spec == "frontend") return std::make_unique<FrontendSimulator>();
    if (spec.starts_with("replay(") && spec.ends_with(")")) {
        std::string inner = spec.substr(7, spec.size() - 8);
        return std::make_unique<ReplaySimulator>(collector_factory(inner), inner);
    }
    if (spec.starts_with("parallel(") && spec.ends_with(")")) {
        auto [a, b] = detail::split_pair_args(spec.substr(9, spec.size() - 10), "parallel");
        return std::make_unique<ParallelSimulator>(make_simulator(a), make_simulator(b));
    }
    if (spec.starts_with("sequential(") && spec.ends_with(")")) {
        auto [a, b] = detail::split_pair_args(spec.substr(11, spec.size() - 12), "sequential");
        if (a != "frontend" || b != "board")
            throw ConfigError(
                "sequential simulator is only shipped for sequential(frontend,board); "
                "independence extractors are forwarder-specific");
        return std::make_unique<SequentialSimulator>(make_simulator(a), make_simulator(b));
    }
    throw ConfigError("unknown simulator: " + spec);
}

}  // namespace delaudit
