#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delaudit/bytes.hpp"
#include "delaudit/errors.hpp"

namespace delaudit {

// ---------------------------------------------------------------------------
// Container types backing collector work tapes. Each one owns a complete,
// canonical byte encoding of itself (rep()); that encoding doubles as the
// memory representation checked for history independence and as the payload
// of the collector's serialized state.
// ---------------------------------------------------------------------------

// Set of keys kept in sorted order. Canonical: rep is a pure function of the
// set's content.
struct SortedKeySet {
    std::vector<Bytes> keys;  // strictly increasing

    bool contains(const Bytes& k) const {
        return std::binary_search(keys.begin(), keys.end(), k);
    }
    // false if already present
    bool insert(const Bytes& k) {
        auto it = std::lower_bound(keys.begin(), keys.end(), k);
        if (it != keys.end() && *it == k) return false;
        keys.insert(it, k);
        return true;
    }
    bool erase(const Bytes& k) {
        auto it = std::lower_bound(keys.begin(), keys.end(), k);
        if (it == keys.end() || *it != k) return false;
        keys.erase(it);
        return true;
    }
    Bytes rep() const {
        Bytes out = "FI";
        put_u32(out, static_cast<std::uint32_t>(keys.size()));
        for (const auto& k : keys) put_bstr(out, k);
        return out;
    }
    void load(const Bytes& bytes) {
        ByteReader r{bytes};
        if (bytes.size() < 2 || bytes[0] != 'F' || bytes[1] != 'I') throw InvalidOp("bad sorted-set rep");
        r.pos = 2;
        keys.clear();
        for (std::uint32_t n = r.u32(); n > 0; --n) keys.push_back(r.bstr());
    }
};

// Keyed entries in insertion order, compacted on removal: no gaps, no
// tombstones. The abstract state deliberately includes the surviving entries'
// order because board fetches expose it.
struct CompactingList {
    std::vector<std::pair<Bytes, Bytes>> entries;

    bool contains(const Bytes& k) const {
        for (const auto& e : entries)
            if (e.first == k) return true;
        return false;
    }
    bool insert(const Bytes& k, const Bytes& m) {
        if (contains(k)) return false;
        entries.emplace_back(k, m);
        return true;
    }
    bool erase(const Bytes& k) {
        for (auto it = entries.begin(); it != entries.end(); ++it) {
            if (it->first == k) {
                entries.erase(it);
                return true;
            }
        }
        return false;
    }
    Bytes rep() const {
        Bytes out = "BL";
        put_u32(out, static_cast<std::uint32_t>(entries.size()));
        for (const auto& [k, m] : entries) {
            put_bstr(out, k);
            put_bstr(out, m);
        }
        return out;
    }
    void load(const Bytes& bytes) {
        ByteReader r{bytes};
        if (bytes.size() < 2 || bytes[0] != 'B' || bytes[1] != 'L') throw InvalidOp("bad list rep");
        r.pos = 2;
        entries.clear();
        for (std::uint32_t n = r.u32(); n > 0; --n) {
            Bytes k = r.bstr();
            Bytes m = r.bstr();
            entries.emplace_back(std::move(k), std::move(m));
        }
    }
};

// Negative control: removal only flips a liveness flag and never compacts,
// so the rep retains the full operation history.
struct TombstoneList {
    struct Entry {
        Bytes key, msg;
        bool alive = true;
    };
    std::vector<Entry> entries;

    bool contains(const Bytes& k) const {
        for (const auto& e : entries)
            if (e.alive && e.key == k) return true;
        return false;
    }
    bool insert(const Bytes& k, const Bytes& m) {
        if (contains(k)) return false;
        entries.push_back({k, m, true});
        return true;
    }
    bool erase(const Bytes& k) {
        for (auto& e : entries) {
            if (e.alive && e.key == k) {
                e.alive = false;
                return true;
            }
        }
        return false;
    }
    Bytes rep() const {
        Bytes out = "TL";
        put_u32(out, static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) {
            put_bstr(out, e.key);
            put_bstr(out, e.msg);
            put_u8(out, e.alive ? 1 : 0);
        }
        return out;
    }
    void load(const Bytes& bytes) {
        ByteReader r{bytes};
        if (bytes.size() < 2 || bytes[0] != 'T' || bytes[1] != 'L') throw InvalidOp("bad tombstone rep");
        r.pos = 2;
        entries.clear();
        for (std::uint32_t n = r.u32(); n > 0; --n) {
            Entry e;
            e.key = r.bstr();
            e.msg = r.bstr();
            e.alive = r.u8() != 0;
            entries.push_back(std::move(e));
        }
    }
};

// Keyed entries kept sorted by key. Canonical regardless of insertion order.
struct SortedKeyMap {
    std::vector<std::pair<Bytes, Bytes>> entries;  // sorted by key

    bool contains(const Bytes& k) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), k,
                                   [](const auto& e, const Bytes& key) { return e.first < key; });
        return it != entries.end() && it->first == k;
    }
    bool insert(const Bytes& k, const Bytes& m) {
        auto it = std::lower_bound(entries.begin(), entries.end(), k,
                                   [](const auto& e, const Bytes& key) { return e.first < key; });
        if (it != entries.end() && it->first == k) return false;
        entries.emplace(it, k, m);
        return true;
    }
    bool erase(const Bytes& k) {
        auto it = std::lower_bound(entries.begin(), entries.end(), k,
                                   [](const auto& e, const Bytes& key) { return e.first < key; });
        if (it == entries.end() || it->first != k) return false;
        entries.erase(it);
        return true;
    }
    Bytes rep() const {
        Bytes out = "VM";
        put_u32(out, static_cast<std::uint32_t>(entries.size()));
        for (const auto& [k, m] : entries) {
            put_bstr(out, k);
            put_bstr(out, m);
        }
        return out;
    }
    void load(const Bytes& bytes) {
        ByteReader r{bytes};
        if (bytes.size() < 2 || bytes[0] != 'V' || bytes[1] != 'M') throw InvalidOp("bad map rep");
        r.pos = 2;
        entries.clear();
        for (std::uint32_t n = r.u32(); n > 0; --n) {
            Bytes k = r.bstr();
            Bytes m = r.bstr();
            entries.emplace_back(std::move(k), std::move(m));
        }
    }
};

// ---------------------------------------------------------------------------
// Abstract-data-structure layer: operations, abstract transition semantics,
// implementations under test, and the exhaustive checkers.
// ---------------------------------------------------------------------------

struct AdsOp {
    enum class Kind : std::uint8_t { Insert, Remove, Read };
    Kind kind = Kind::Read;
    Bytes key;
    Bytes value;

    static AdsOp insert(Bytes k, Bytes v) { return {Kind::Insert, std::move(k), std::move(v)}; }
    static AdsOp remove(Bytes k) { return {Kind::Remove, std::move(k), {}}; }
    static AdsOp read() { return {}; }

    std::string to_string() const {
        switch (kind) {
            case Kind::Insert: return "insert(" + key + "," + value + ")";
            case Kind::Remove: return "remove(" + key + ")";
            case Kind::Read: return "read";
        }
        return "?";
    }
};

using MemoryRep = Bytes;
using AdsState = Bytes;  // canonical encoding of abstract content

// Reference transition semantics of an abstract data structure; deliberately
// independent of any implementation's memory layout. Duplicate insert is an
// invalid transition (the protocols guarantee fresh keys); remove of an
// absent key and read are valid no-ops.
class AdsSpec {
  public:
    virtual ~AdsSpec() = default;
    virtual std::string name() const = 0;
    virtual AdsState initial() const = 0;
    virtual AdsState apply(const AdsState& state, const AdsOp& op) const = 0;
};

// Unordered set of keys; state encoded as the sorted key list.
class KeySetSpec final : public AdsSpec {
  public:
    std::string name() const override { return "key_set"; }
    AdsState initial() const override { return encode({}); }
    AdsState apply(const AdsState& state, const AdsOp& op) const override {
        std::vector<Bytes> keys = decode(state);
        switch (op.kind) {
            case AdsOp::Kind::Insert: {
                auto it = std::lower_bound(keys.begin(), keys.end(), op.key);
                if (it != keys.end() && *it == op.key) throw InvalidOp("duplicate insert: " + op.key);
                keys.insert(it, op.key);
                break;
            }
            case AdsOp::Kind::Remove: {
                auto it = std::lower_bound(keys.begin(), keys.end(), op.key);
                if (it != keys.end() && *it == op.key) keys.erase(it);
                break;
            }
            case AdsOp::Kind::Read: break;
        }
        return encode(keys);
    }

  private:
    static AdsState encode(const std::vector<Bytes>& keys) {
        Bytes out;
        for (const auto& k : keys) put_bstr(out, k);
        return out;
    }
    static std::vector<Bytes> decode(const AdsState& s) {
        std::vector<Bytes> keys;
        ByteReader r{s};
        while (!r.done()) keys.push_back(r.bstr());
        return keys;
    }
};

// Surviving keyed entries in insertion order. Order is part of the abstract
// state because fetch-style reads expose it.
class OrderedMapSpec final : public AdsSpec {
  public:
    std::string name() const override { return "ordered_map"; }
    AdsState initial() const override { return {}; }
    AdsState apply(const AdsState& state, const AdsOp& op) const override {
        std::vector<std::pair<Bytes, Bytes>> entries = decode(state);
        switch (op.kind) {
            case AdsOp::Kind::Insert: {
                for (const auto& e : entries)
                    if (e.first == op.key) throw InvalidOp("duplicate insert: " + op.key);
                entries.emplace_back(op.key, op.value);
                break;
            }
            case AdsOp::Kind::Remove: {
                for (auto it = entries.begin(); it != entries.end(); ++it) {
                    if (it->first == op.key) {
                        entries.erase(it);
                        break;
                    }
                }
                break;
            }
            case AdsOp::Kind::Read: break;
        }
        Bytes out;
        for (const auto& [k, m] : entries) {
            put_bstr(out, k);
            put_bstr(out, m);
        }
        return out;
    }

  private:
    static std::vector<std::pair<Bytes, Bytes>> decode(const AdsState& s) {
        std::vector<std::pair<Bytes, Bytes>> entries;
        ByteReader r{s};
        while (!r.done()) {
            Bytes k = r.bstr();
            Bytes m = r.bstr();
            entries.emplace_back(std::move(k), std::move(m));
        }
        return entries;
    }
};

inline const KeySetSpec& key_set_spec() {
    static const KeySetSpec s;
    return s;
}
inline const OrderedMapSpec& ordered_map_spec() {
    static const OrderedMapSpec s;
    return s;
}

// Implementation under test: stateful, produces a memory representation.
class AdsImpl {
  public:
    virtual ~AdsImpl() = default;
    virtual std::string name() const = 0;
    virtual const AdsSpec& spec() const = 0;
    virtual void reset() = 0;
    virtual void apply_op(const AdsOp& op) = 0;  // throws InvalidOp on duplicate insert
    virtual MemoryRep rep() const = 0;
    virtual void load(const MemoryRep& rep) = 0;
    virtual std::unique_ptr<AdsImpl> clone() const = 0;
};

namespace detail {

template <class Container, bool KeyOnly>
class ContainerAdsImpl final : public AdsImpl {
  public:
    ContainerAdsImpl(std::string name, const AdsSpec& spec) : name_(std::move(name)), spec_(&spec) {}

    std::string name() const override { return name_; }
    const AdsSpec& spec() const override { return *spec_; }
    void reset() override { c_ = Container{}; }
    void apply_op(const AdsOp& op) override {
        switch (op.kind) {
            case AdsOp::Kind::Insert: {
                bool ok;
                if constexpr (KeyOnly)
                    ok = c_.insert(op.key);
                else
                    ok = c_.insert(op.key, op.value);
                if (!ok) throw InvalidOp("duplicate insert: " + op.key);
                break;
            }
            case AdsOp::Kind::Remove:
                c_.erase(op.key);
                break;
            case AdsOp::Kind::Read:
                break;
        }
    }
    MemoryRep rep() const override { return c_.rep(); }
    void load(const MemoryRep& rep) override { c_.load(rep); }
    std::unique_ptr<AdsImpl> clone() const override {
        return std::make_unique<ContainerAdsImpl>(*this);
    }

  private:
    std::string name_;
    const AdsSpec* spec_;
    Container c_;
};

}  // namespace detail

using SortedSetAds = detail::ContainerAdsImpl<SortedKeySet, true>;
using CompactingListAds = detail::ContainerAdsImpl<CompactingList, false>;
using TombstoneListAds = detail::ContainerAdsImpl<TombstoneList, false>;
using SortedMapAds = detail::ContainerAdsImpl<SortedKeyMap, false>;

inline std::unique_ptr<AdsImpl> make_ads_impl(const std::string& name) {
    if (name == "sorted_set") return std::make_unique<SortedSetAds>("sorted_set", key_set_spec());
    if (name == "compacting_list")
        return std::make_unique<CompactingListAds>("compacting_list", ordered_map_spec());
    if (name == "tombstone_list")
        return std::make_unique<TombstoneListAds>("tombstone_list", ordered_map_spec());
    if (name == "sorted_map") return std::make_unique<SortedMapAds>("sorted_map", ordered_map_spec());
    throw ConfigError("unknown ADS implementation: " + name);
}

// Functional transition: load rep, apply op, return the new rep.
inline MemoryRep ads_apply(const AdsImpl& impl, const MemoryRep& rep, const AdsOp& op) {
    auto copy = impl.clone();
    copy->load(rep);
    copy->apply_op(op);
    return copy->rep();
}

// ---------------------------------------------------------------------------
// Checkers
// ---------------------------------------------------------------------------

struct HiCounterexample {
    std::vector<AdsOp> seq_s, seq_t;  // both reach the same abstract state
    MemoryRep rep_s, rep_t;           // yet their reps differ
    AdsState state;
};

struct HiCheckResult {
    bool ok = true;
    std::optional<HiCounterexample> counterexample;
    std::uint64_t sequences_checked = 0;
};

inline std::vector<AdsOp> hi_op_alphabet(std::span<const Bytes> universe) {
    std::vector<AdsOp> arr;
    for (const auto& k : universe) arr.push_back(AdsOp::insert(k, k));
    for (const auto& k : universe) arr.push_back(AdsOp::remove(k));
    arr.push_back(AdsOp::read());
    return arr;
}

// Exhaustively enumerates every operation sequence of length <= max_len over
// the universe's insert/remove/read alphabet, starting from the empty
// structure, and demands that sequences reaching the same abstract state
// yield byte-identical memory representations. That is the deterministic
// special case of strong history independence ("identical distributions"
// collapses to equality; the shipped implementations take no initialization
// randomness). Branches with an invalid transition are pruned. Depth limits
// grow one at a time so the witness reported for a failing implementation is
// of minimal length.
inline HiCheckResult check_history_independence(const AdsImpl& prototype,
                                                std::span<const Bytes> universe,
                                                std::size_t max_len,
                                                std::uint64_t budget = 2'000'000) {
    const std::vector<AdsOp> alphabet = hi_op_alphabet(universe);
    const AdsSpec& spec = prototype.spec();

    struct Seen {
        MemoryRep rep;
        std::vector<AdsOp> seq;
    };
    struct Frame {
        std::unique_ptr<AdsImpl> impl;
        AdsState state;
        std::vector<AdsOp> seq;
    };

    HiCheckResult result;
    std::uint64_t applied = 0;

    for (std::size_t depth = 0; depth <= max_len; ++depth) {
        std::map<AdsState, Seen> seen;
        auto visit = [&](auto&& self, const Frame& frame) -> bool {
            ++result.sequences_checked;
            auto it = seen.find(frame.state);
            if (it == seen.end()) {
                seen.emplace(frame.state, Seen{frame.impl->rep(), frame.seq});
            } else if (it->second.rep != frame.impl->rep()) {
                result.ok = false;
                result.counterexample = HiCounterexample{it->second.seq, frame.seq, it->second.rep,
                                                         frame.impl->rep(), frame.state};
                return false;
            }
            if (frame.seq.size() == depth) return true;
            for (const AdsOp& op : alphabet) {
                if (++applied > budget)
                    throw BudgetExceeded("history-independence enumeration budget");
                AdsState next_state;
                try {
                    next_state = spec.apply(frame.state, op);
                } catch (const InvalidOp&) {
                    continue;
                }
                Frame next{frame.impl->clone(), std::move(next_state), frame.seq};
                next.impl->apply_op(op);
                next.seq.push_back(op);
                if (!self(self, next)) return false;
            }
            return true;
        };

        auto root_impl = prototype.clone();
        root_impl->reset();
        Frame root{std::move(root_impl), spec.initial(), {}};
        if (!visit(visit, root)) return result;
    }
    return result;
}

struct DeletionOpCounterexample {
    std::vector<AdsOp> r, s, t;
    AdsState state_with_pair;  // state after R p S p_D T
    AdsState state_without;    // state after R S T
};

struct DeletionOpCheckResult {
    bool ok = true;
    std::optional<DeletionOpCounterexample> counterexample;
    std::uint64_t triples_checked = 0;
};

// Verifies the deletion-operation property for the pair (p, p_D): for all
// R, S, T over the universe with |R|+|S|+|T| <= max_len, running R p S p_D T
// reaches the same abstract state as R S T. States are compared at the
// abstract level only; representations are the previous checker's concern.
// p's key is expected to be fresh (outside the universe), mirroring how the
// protocols only ever delete tokens they issued.
inline DeletionOpCheckResult check_deletion_op(const AdsSpec& spec, const AdsOp& p,
                                               const AdsOp& p_d, std::span<const Bytes> universe,
                                               std::size_t max_len,
                                               std::uint64_t budget = 20'000'000) {
    const std::vector<AdsOp> alphabet = hi_op_alphabet(universe);
    DeletionOpCheckResult result;
    std::uint64_t applied = 0;
    auto step = [&](const AdsState& st, const AdsOp& op) {
        if (++applied > budget) throw BudgetExceeded("deletion-op enumeration budget");
        return spec.apply(st, op);
    };

    // Enumerate flat sequences, then every split into (R, S, T).
    std::vector<std::vector<AdsOp>> sequences{{}};
    for (std::size_t pos = 0; pos < sequences.size(); ++pos) {
        if (sequences[pos].size() >= max_len) continue;
        for (const AdsOp& op : alphabet) {
            auto next = sequences[pos];
            next.push_back(op);
            sequences.push_back(std::move(next));
        }
    }

    for (const auto& seq : sequences) {
        const std::size_t n = seq.size();
        for (std::size_t i = 0; i <= n; ++i) {
            for (std::size_t j = i; j <= n; ++j) {
                ++result.triples_checked;
                bool valid = true;
                AdsState with_pair = spec.initial();
                AdsState without = spec.initial();
                try {
                    std::size_t idx = 0;
                    for (; idx < i; ++idx) with_pair = step(with_pair, seq[idx]);
                    with_pair = step(with_pair, p);
                    for (; idx < j; ++idx) with_pair = step(with_pair, seq[idx]);
                    with_pair = step(with_pair, p_d);
                    for (; idx < n; ++idx) with_pair = step(with_pair, seq[idx]);
                    for (std::size_t k = 0; k < n; ++k) without = step(without, seq[k]);
                } catch (const InvalidOp&) {
                    valid = false;  // vacuous: not a path in the ADS graph
                }
                if (valid && with_pair != without) {
                    result.ok = false;
                    result.counterexample = DeletionOpCounterexample{
                        {seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(i)},
                        {seq.begin() + static_cast<std::ptrdiff_t>(i),
                         seq.begin() + static_cast<std::ptrdiff_t>(j)},
                        {seq.begin() + static_cast<std::ptrdiff_t>(j), seq.end()},
                        with_pair,
                        without};
                    return result;
                }
            }
        }
    }
    return result;
}

}  // namespace delaudit
